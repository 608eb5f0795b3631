import pytest

from smartmoney import contracts
from smartmoney.errors import Reason
from smartmoney.flows import FlowRequest
from smartmoney.listings import listing
from smartmoney.model import AccountKind, InvoiceStatus, ItemLine, MoneyKind, Role, WarrantStatus
from smartmoney.netsim import CostModel, NetworkConfig, start_network


def setup(split=True, mode="deterministic", **kw):
    net = start_network(NetworkConfig(split_enabled=split, mode=mode, **kw))
    led = net.ledger
    alice = led.create_account(Role.BUYER.value, "Alice", AccountKind.CONSUMER)
    bob = led.create_account(Role.BUYER.value, "Bob", AccountKind.CONSUMER)
    mega = led.create_account(Role.SELLER.value, "MegaCompany", AccountKind.SELLER)
    led.fund(alice, MoneyKind.CURRENT, 200_000)
    return net, alice, bob, mega


@pytest.fixture
def env():
    net, alice, bob, mega = setup()
    yield net, alice, bob, mega
    net.close()


def test_issue_and_pay_split(env):
    net, alice, _, mega = env
    doc = listing(1)
    res = net.issue_invoice(mega, alice, doc.lines)
    assert res.ok and res.latency is not None
    inv = res["invoice_id"]
    assert net.ledger.vault_lookup(net.vat_payments, inv) is None
    paid = net.pay_invoice(alice, inv)
    assert paid.ok
    assert net.get_balance(alice) == 200_000 - 58051
    assert net.get_balance(mega) == 55592
    assert net.get_balance(net.vat_payments) == 2459
    for acct in (alice, mega, net.vat_payments):
        assert net.ledger.vault_lookup(acct, inv)[1].status is InvoiceStatus.PAID


def test_non_split_pays_seller_gross():
    net, alice, _, mega = setup(split=False)
    inv = net.issue_invoice(mega, alice, listing(1).lines)["invoice_id"]
    tx = net.ledger.transactions[net.ledger.vault_lookup(alice, inv)[0].tx_id]
    assert net.vat_payments not in tx.required_signers
    assert net.pay_invoice(alice, inv).ok
    assert net.get_balance(mega) == 58051
    assert net.get_balance(net.vat_payments) == 0
    assert net.ledger.vault_lookup(net.vat_payments, inv) is None


def test_pay_errors(env):
    net, alice, bob, mega = env
    inv = net.issue_invoice(mega, alice, listing(2).lines)["invoice_id"]
    assert net.pay_invoice(bob, inv).error_name == "UnknownInvoice"  # not in Bob's vault
    assert net.pay_invoice(alice, "INV-999999").error_name == "UnknownInvoice"
    poor = net.issue_invoice(mega, bob, listing(2).lines)["invoice_id"]
    res = net.pay_invoice(bob, poor)
    assert res.error_name == "InsufficientFunds" and str(res.error) == "insufficient funds available"
    assert net.pay_invoice(alice, inv).ok
    assert net.pay_invoice(alice, inv).error_name == Reason.ALREADY_PAID.value


def test_issue_to_unknown_buyer(env):
    net, _, _, mega = env
    res = net.issue_invoice(mega, "ghost@BuyerCWP", [ItemLine("Books", 100, 1, 0)])
    assert res.error_name == "SessionFailure"


def test_tampered_rate_rejected_before_commit(env):
    net, alice, _, mega = env
    res = net.issue_invoice(mega, alice, [ItemLine("Energy", 100, 1, 0)])
    assert res.error_name == Reason.RATE_MISMATCH.value
    assert net.ledger.transactions == {}


def test_tokens(env):
    net, alice, _, mega = env
    assert net.issue_tokens(Role.HMRC.value, alice, 40_000).ok
    assert net.get_balance(alice, MoneyKind.TOKEN) == 40_000
    bad = net.run_flow(FlowRequest.issue_tokens(mega, alice, 5))
    assert bad.error_name == Reason.UNAUTHORIZED_ISSUER.value
    assert net.issue_tokens(Role.HMRC.value, alice, 0).error_name == Reason.NON_POSITIVE_AMOUNT.value

    inv = net.issue_invoice(mega, alice, listing(2).lines, MoneyKind.TOKEN)["invoice_id"]
    assert net.pay_invoice(alice, inv).error_name == Reason.WRONG_MONEY_KIND.value
    assert net.pay_invoice_with_tokens(alice, inv).ok
    assert net.get_balance(alice, MoneyKind.TOKEN) == 40_000 - 32473
    assert net.get_balance(net.vat_payments, MoneyKind.TOKEN) == 255

    booze = net.issue_invoice(mega, alice, listing(1).lines, MoneyKind.TOKEN)["invoice_id"]
    res = net.pay_invoice_with_tokens(alice, booze)
    assert str(res.error) == "you cannot pay for invalid goods with money from your token account"


def test_warrant_lifecycle(env):
    net, alice, _, mega = env
    net.pay_invoice(alice, net.issue_invoice(mega, alice, listing(2).lines)["invoice_id"])
    req = net.request_warrant(net.vat_investigator, mega)
    assert req.ok
    wid = req["warrant_id"]
    state = net.ledger.vault_lookup(net.vat_investigator, wid)[1]
    assert state.status is WarrantStatus.AUTHORIZED and state.subject == mega
    assert net.ledger.vault_lookup(net.legal_authority, wid) is not None

    first = net.execute_warrant(net.vat_investigator, wid)
    assert first.ok
    assert list(first["data"]) == net.ledger.vault_query(mega, "invoice")
    assert net.ledger.vault_lookup(net.vat_investigator, wid)[1].status is WarrantStatus.EXECUTED
    again = net.execute_warrant(net.vat_investigator, wid)
    assert again.error_name == Reason.ALREADY_EXECUTED.value


def test_warrant_roles(env):
    net, alice, _, mega = env
    assert net.request_warrant(alice, mega).error_name == Reason.NOT_INVESTIGATOR.value
    assert net.request_warrant(net.vat_investigator, "ghost@SellerCWP").error_name == "UnknownSubject"
    wid = net.request_warrant(net.vat_investigator, mega)["warrant_id"]
    # VATPayments lives on the same node but did not request the warrant.
    assert net.execute_warrant(net.vat_payments, wid).error_name == Reason.NOT_REQUESTER.value
    assert net.execute_warrant(net.vat_investigator, "DAR-424242").error_name == Reason.UNKNOWN_WARRANT.value


def test_legal_authority_can_refuse(env):
    net, _, _, mega = env
    net.approval_policy = lambda tx: False
    res = net.request_warrant(net.vat_investigator, mega)
    assert res.error_name == "WarrantRejected"
    assert net.ledger.vault_query(net.vat_investigator, "warrant") == []


def test_concurrent_double_spend_races():
    """Real threads: two payments of one invoice, many times over."""
    net, alice, _, mega = setup(mode="concurrent", cost=CostModel(flow_step_s=1e-4))
    try:
        lines = [ItemLine("Electrical", 100, 1, 20)]
        total = contracts.total_amount(lines)
        for i in range(150):
            inv = net.issue_invoice(mega, alice, lines)["invoice_id"]
            before = net.get_balance(alice)
            a, b = net.client(Role.BUYER.value, "a"), net.client(Role.BUYER.value, "b")
            futs = [net.submit_flow(c, FlowRequest.pay_invoice(alice, inv)) for c in (a, b)]
            results = [f.result(timeout=30) for f in futs]
            assert sum(r.ok for r in results) == 1
            assert {r.error_name for r in results if not r.ok} <= {"DoubleSpend", "AlreadyPaid"}
            assert net.get_balance(alice) == before - total
    finally:
        net.close()
