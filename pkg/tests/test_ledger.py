import threading
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smartmoney import contracts
from smartmoney.errors import (
    AccountKindConflict,
    DoubleSpend,
    DuplicateAccountName,
    InsufficientFunds,
    InvalidSignature,
    MissingSignature,
    NotParticipant,
    SignerNotParticipant,
    UnknownAccount,
    UnknownInput,
    UnknownNode,
)
from smartmoney.ledger import HashSigner, Ledger, read_log
from smartmoney.model import (
    AccountKind,
    Command,
    InvoiceState,
    InvoiceStatus,
    ItemLine,
    MoneyKind,
    MoneyMove,
    StateRef,
)

LINES = (ItemLine("Electrical", 1000, 2, 20), ItemLine("Groceries", 333, 1, 0))


@pytest.fixture
def world():
    led = Ledger()
    w = {
        "led": led,
        "seller": led.create_account("SellerCWP", "Mega", AccountKind.SELLER),
        "buyer": led.create_account("BuyerCWP", "Alice", AccountKind.CONSUMER),
        "tax": led.create_account("HMRCCWP", "VATPayments", AccountKind.GOV_PAYMENTS),
    }
    return w


def issue(w, lines=LINES):
    led = w["led"]
    net, vat, total = contracts.amounts(lines)
    inv = InvoiceState(led.new_linear_id("INV"), w["seller"], w["buyer"], lines, MoneyKind.CURRENT,
                       net, vat, total, InvoiceStatus.UNPAID, (w["seller"], w["buyer"]), w["tax"])
    tx = led.build_and_sign(w["seller"], (), (inv,), Command.ISSUE_INVOICE, contracts.invoice_signers(inv))
    tx = led.sign(tx, [w["buyer"], w["tax"]])
    done = led.notarize(tx).tx
    led.record_transaction(done, [w["seller"], w["buyer"]])
    return done.output_ref(0), inv


def pay_tx(w, ref, inv):
    led = w["led"]
    moves = [MoneyMove(led.account(a), k, d) for (a, k), d in contracts.expected_movements(inv, MoneyKind.CURRENT).items()]
    paid = replace(inv, status=InvoiceStatus.PAID, participants=contracts.paid_participants(inv))
    tx = led.build_and_sign(w["buyer"], (ref,), (paid,), Command.PAY_INVOICE, contracts.invoice_signers(inv), moves)
    return led.sign(tx, [w["seller"], w["tax"]])


def test_account_rules(world):
    led = world["led"]
    with pytest.raises(DuplicateAccountName):
        led.create_account("BuyerCWP", "Alice", AccountKind.CONSUMER)
    led.create_account("SellerCWP", "Alice", AccountKind.SELLER)  # same name, other node: fine
    with pytest.raises(UnknownNode):
        led.create_account("Mars", "X", AccountKind.CONSUMER)
    with pytest.raises(AccountKindConflict):
        led.create_account("HMRCCWP", "Other", AccountKind.GOV_PAYMENTS)
    with pytest.raises(AccountKindConflict):
        led.create_account("BuyerCWP", "Inv", AccountKind.GOV_INVESTIGATOR)
    with pytest.raises(UnknownAccount):
        led.account("nobody@BuyerCWP")
    assert led.find_account("Alice", "BuyerCWP") == world["buyer"]


def test_tx_id_is_content_hash(world):
    ref, inv = issue(world)
    tx = pay_tx(world, ref, inv)
    assert tx.tx_id == replace(tx, signatures={}).tx_id
    assert tx.tx_id != replace(tx, movements=tx.movements[:-1]).tx_id


def test_pay_moves_money_and_updates_vaults(world):
    led = world["led"]
    led.fund(world["buyer"], MoneyKind.CURRENT, 10_000)
    ref, inv = issue(world)
    assert led.vault_query(world["tax"], "invoice") == []
    done = led.notarize(pay_tx(world, ref, inv)).tx
    led.record_transaction(done, [world["seller"], world["buyer"], world["tax"]])
    assert led.get_balance(world["buyer"]) == 10_000 - inv.total_amount
    assert led.get_balance(world["seller"]) == inv.net_amount
    assert led.get_balance(world["tax"]) == inv.vat_amount
    for who in ("seller", "buyer", "tax"):
        (state,) = led.vault_query(world[who], "invoice")
        assert state.status is InvoiceStatus.PAID
    assert len(led.vaults[world["buyer"].id].historic) == 1


def rival(w, tx):
    """A different transaction spending the same input (signers listed in another order)."""
    led = w["led"]
    t = replace(tx, signatures={}, required_signers=tuple(reversed(tx.required_signers)))
    return led.sign(t, t.required_signers)


def test_double_spend_rejected(world):
    led = world["led"]
    led.fund(world["buyer"], MoneyKind.CURRENT, 10_000)
    ref, inv = issue(world)
    tx = pay_tx(world, ref, inv)
    other = rival(world, tx)
    assert other.tx_id != tx.tx_id
    led.notarize(tx)
    with pytest.raises(DoubleSpend):
        led.notarize(tx)
    with pytest.raises(DoubleSpend):
        led.notarize(other)


def test_insufficient_funds_leaves_state_untouched(world):
    led = world["led"]
    led.fund(world["buyer"], MoneyKind.CURRENT, 10)
    ref, inv = issue(world)
    before = led.snapshot()
    with pytest.raises(InsufficientFunds) as err:
        led.notarize(pay_tx(world, ref, inv))
    assert str(err.value) == "insufficient funds available"
    assert led.snapshot() == before
    assert ref not in led.consumed


def test_signature_checks(world):
    led = world["led"]
    ref, inv = issue(world)
    tx = pay_tx(world, ref, inv)
    missing = replace(tx, signatures={k: v for k, v in tx.signatures.items() if k != world["tax"].id})
    with pytest.raises(MissingSignature):
        led.notarize(missing)
    forged = replace(tx, signatures={**tx.signatures, world["tax"].id: "00" * 32})
    with pytest.raises(InvalidSignature):
        led.notarize(forged)
    outsider = led.create_account("BuyerCWP", "Eve", AccountKind.CONSUMER)
    with pytest.raises(SignerNotParticipant):
        led.sign(tx, [outsider])


def test_unknown_input(world):
    led = world["led"]
    _, inv = issue(world)
    with pytest.raises(UnknownInput):
        pay_tx(world, StateRef("ff" * 32, 0), inv)


def test_record_requires_participant(world):
    led = world["led"]
    ref, inv = issue(world)
    tx = led.transactions[ref.tx_id]
    with pytest.raises(NotParticipant):
        led.record_state(world["tax"], inv, tx.tx_id)


def test_signer_is_deterministic():
    s = HashSigner(b"k")
    sig = s.sign("a", "tx")
    assert s.verify("a", "tx", sig) and not s.verify("b", "tx", sig)
    assert HashSigner(b"k").sign("a", "tx") == sig


def test_concurrent_notarisation_one_winner(world):
    led = world["led"]
    led.fund(world["buyer"], MoneyKind.CURRENT, 100_000)
    ref, inv = issue(world)
    tx = pay_tx(world, ref, inv)
    twin = rival(world, tx)
    outcomes = []
    barrier = threading.Barrier(8)

    def go(t):
        barrier.wait()
        try:
            led.notarize(t)
            outcomes.append("ok")
        except DoubleSpend:
            outcomes.append("double")

    threads = [threading.Thread(target=go, args=(tx if i % 2 else twin,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert outcomes.count("ok") == 1 and outcomes.count("double") == 7


def test_replay_rebuilds_state(world, tmp_path):
    led = world["led"]
    led.fund(world["buyer"], MoneyKind.CURRENT, 50_000)
    for _ in range(3):
        ref, inv = issue(world)
        done = led.notarize(pay_tx(world, ref, inv)).tx
        led.record_transaction(done, [world["seller"], world["buyer"], world["tax"]])
    path = tmp_path / "log.jsonl"
    led.write_log(path)
    again = Ledger.replay(read_log(path))
    assert again.snapshot() == led.snapshot()
    assert again.log_bytes() == led.log_bytes()


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 5000), st.integers(1, 3), st.sampled_from(["Energy", "Alcohol", "Books"])),
                min_size=1, max_size=15),
       st.integers(0, 60_000))
def test_conservation_property(items, funds):
    led = Ledger()
    w = {
        "led": led,
        "seller": led.create_account("SellerCWP", "S", AccountKind.SELLER),
        "buyer": led.create_account("BuyerCWP", "B", AccountKind.CONSUMER),
        "tax": led.create_account("HMRCCWP", "T", AccountKind.GOV_PAYMENTS),
    }
    if funds:
        led.fund(w["buyer"], MoneyKind.CURRENT, funds)
    for price, qty, item in items:
        ref, inv = issue(w, (ItemLine(item, price, qty, contracts.VAT_RATES[item]),))
        try:
            led.notarize(pay_tx(w, ref, inv))
        except InsufficientFunds:
            pass
        assert led.total_balance(MoneyKind.CURRENT) == funds
        assert all(b.current >= 0 for b in led.balances.values())
    for rec in led.log:
        if rec["type"] == "tx":
            assert sum(m[2] for m in rec["movements"]) == 0
