import json

import pytest

from smartmoney.errors import (
    ConfigError,
    DeadlockDetected,
    DuplicateNode,
    MissingNotary,
    MissingRole,
    QueueOverflow,
    WrongNode,
)
from smartmoney.flows import FlowRequest
from smartmoney.listings import listing
from smartmoney.model import AccountKind, MoneyKind, Role
from smartmoney.netsim import CostModel, Fault, NetworkConfig, NodeConfig, start_network


def make(**kw):
    net = start_network(NetworkConfig(**kw))
    led = net.ledger
    alice = led.create_account(Role.BUYER.value, "Alice", AccountKind.CONSUMER)
    mega = led.create_account(Role.SELLER.value, "MegaCompany", AccountKind.SELLER)
    led.fund(alice, MoneyKind.CURRENT, 1_000_000)
    return net, alice, mega


def test_topology_validation():
    roles = [r for r in Role if r is not Role.NOTARY]
    with pytest.raises(MissingNotary):
        start_network(NetworkConfig(nodes=tuple(NodeConfig(r) for r in roles)))
    with pytest.raises(DuplicateNode):
        start_network(NetworkConfig(nodes=tuple(NodeConfig(r) for r in Role) + (NodeConfig(Role.NOTARY),)))
    with pytest.raises(MissingRole):
        start_network(NetworkConfig(nodes=(NodeConfig(Role.NOTARY), NodeConfig(Role.BUYER))))
    with pytest.raises(ConfigError):
        NetworkConfig(mode="quantum")


def test_government_accounts_exist():
    net = start_network()
    assert net.vat_payments.host_node == "HMRCCWP"
    assert net.vat_investigator.host_node == "HMRCCWP"
    assert net.legal_authority.host_node == "LegalCWP"


def test_empty_network_is_idle():
    net = start_network()
    net.run_until_idle()
    assert net.now() == 0.0


def test_client_routing():
    net, alice, mega = make()
    buyer_client = net.client(Role.BUYER.value)
    with pytest.raises(WrongNode):
        net.submit_flow(buyer_client, FlowRequest.issue_invoice(mega, alice, listing(2).lines))
    with pytest.raises(WrongNode):
        net.client(Role.SELLER.value, buyer_client.client_id)


def test_queue_overflow():
    net, alice, mega = make(client_queue_limit=2)
    c = net.client(Role.SELLER.value)
    req = FlowRequest.issue_invoice(mega, alice, listing(2).lines)
    net.submit_flow(c, req)
    net.submit_flow(c, req)
    with pytest.raises(QueueOverflow):
        net.submit_flow(c, req)
    net.run_until_idle()
    net.submit_flow(c, req)  # drained, accepts again


def test_drop_notary_session_keeps_state_atomic():
    net, alice, mega = make()
    inv = net.issue_invoice(mega, alice, listing(1).lines)["invoice_id"]
    before = net.ledger.snapshot()
    net.inject_fault(Fault("drop-session", src=Role.BUYER.value, dst=Role.NOTARY.value, count=1))
    res = net.pay_invoice(alice, inv)
    assert res.error_name == "SessionFailure"
    assert net.ledger.snapshot() == before
    assert net.pay_invoice(alice, inv).ok  # fault was single-shot


def test_delay_increases_latency_and_lowers_throughput():
    def run(delay_ms):
        net, alice, mega = make(cost=CostModel.corda_like())
        if delay_ms:
            net.inject_fault(Fault("delay", delay_ms=delay_ms))
        c = net.client(Role.SELLER.value)
        futs = [net.submit_flow(c, FlowRequest.issue_invoice(mega, alice, listing(2).lines)) for _ in range(20)]
        net.run_until_idle()
        res = [f.result() for f in futs]
        lat = sum(r.latency for r in res) / len(res)
        span = max(r.notarized_at for r in res) - min(r.submitted_at for r in res)
        return lat, len(res) / span

    lat0, tps0 = run(0)
    lat1, tps1 = run(10)
    assert lat1 > lat0 and tps1 < tps0


def test_pausing_legal_stalls_warrants_only():
    net, alice, mega = make()
    net.inject_fault(Fault("node-pause", node=Role.LEGAL.value))
    inv = net.issue_invoice(mega, alice, listing(2).lines)["invoice_id"]
    assert net.pay_invoice(alice, inv).ok
    fut = net.submit_flow(net.client(Role.HMRC.value), FlowRequest.request_warrant(net.vat_investigator, mega))
    net.run_until_idle()
    assert not fut.done()
    net.inject_fault(Fault("node-resume", node=Role.LEGAL.value))
    net.run_until_idle()
    assert fut.result().ok


def test_pausing_notary_blocks_commits():
    net, alice, mega = make()
    net.inject_fault(Fault("node-pause", node=Role.NOTARY.value))
    with pytest.raises(DeadlockDetected):
        net.issue_invoice(mega, alice, listing(2).lines)
    assert net.ledger.transactions == {}


def test_timed_pause_resumes_itself():
    net, alice, mega = make(cost=CostModel.corda_like())
    net.inject_fault(Fault("node-pause", node=Role.NOTARY.value, duration_s=1.0))
    res = net.issue_invoice(mega, alice, listing(2).lines)
    assert res.ok and res.notarized_at >= 1.0


def test_faults_need_deterministic_mode():
    net = start_network(NetworkConfig(mode="concurrent"))
    try:
        with pytest.raises(ConfigError):
            net.inject_fault(Fault("delay", delay_ms=1))
    finally:
        net.close()


def test_seeded_runs_replay_identically():
    def run(seed):
        net, alice, mega = make(seed=seed, jitter_s=0.003, cost=CostModel.corda_like())
        s, b = net.client(Role.SELLER.value), net.client(Role.BUYER.value)
        futs = [net.submit_flow(s, FlowRequest.issue_invoice(mega, alice, listing(i % 2 + 1).lines)) for i in range(30)]
        net.run_until_idle()
        for f in futs:
            net.submit_flow(b, FlowRequest.pay_invoice(alice, f.result()["invoice_id"]))
        net.run_until_idle()
        return net.ledger.log_bytes()

    assert run(1) == run(1)
    assert run(2) == run(2)


def test_every_flow_terminates_concurrently():
    net, alice, mega = make(mode="concurrent")
    try:
        clients = [net.client(Role.SELLER.value, f"c{i}") for i in range(10)]
        futs = [net.submit_flow(clients[i % 10], FlowRequest.issue_invoice(mega, alice, listing(2).lines))
                for i in range(200)]
        net.run_until_idle(timeout=60)
        assert all(f.result().ok for f in futs)
        assert len(net.ledger.transactions) == 200
    finally:
        net.close()


def test_config_files(tmp_path):
    (tmp_path / "net.json").write_text(json.dumps({
        "seed": 9, "latency_s": 0.001, "cost": "corda_like",
        "nodes": ["HMRCCWP", "BuyerCWP", "SellerCWP", "LegalCWP", {"role": "Notary", "workers": 2}],
        "faults": [{"kind": "delay", "delay_ms": 5}],
    }))
    cfg = NetworkConfig.load(tmp_path / "net.json")
    assert cfg.seed == 9 and cfg.cost == CostModel.corda_like() and cfg.nodes[-1].workers == 2
    assert cfg.faults == (Fault("delay", delay_ms=5),)

    (tmp_path / "net.toml").write_text('seed = 4\nmode = "concurrent"\nsplit_enabled = false\n[cost]\nflow_step_s = 0.001\n')
    cfg = NetworkConfig.load(tmp_path / "net.toml")
    assert cfg.mode == "concurrent" and not cfg.split_enabled and cfg.cost.flow_step_s == 0.001

    (tmp_path / "bad.json").write_text('{"sed": 1}')
    with pytest.raises(ConfigError):
        NetworkConfig.load(tmp_path / "bad.json")
