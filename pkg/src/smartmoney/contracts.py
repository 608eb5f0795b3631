"""Contract verification and VAT arithmetic.

Everything here is a pure function of its arguments. Each signing party runs
:func:`verify` on a proposed transaction before signing it; the notary does
not (it only checks uniqueness, signatures and balances).

VAT is rounded per line, half-up to the minor unit, then summed. That keeps
``vat_amount`` additive under concatenation of line lists.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, InvalidLine, RateMismatch, Reason, violation
from .model import (
    HMRC_NODE,
    AccountKind,
    AccountRef,
    Command,
    DataAccessRequestState,
    InvoiceState,
    InvoiceStatus,
    ItemLine,
    MoneyKind,
    SignedTransaction,
    State,
    TokenIssuanceState,
    WarrantStatus,
)

VAT_RATES: Mapping[str, int] = {
    "Adult Clothing": 20,
    "Alcohol": 20,
    "Books": 0,
    "Children's Clothing": 0,
    "Electrical": 20,
    "Energy": 5,
    "Groceries": 0,
}
GOODS_CLASSES = tuple(VAT_RATES)
ALLOWED_RATES = frozenset({0, 5, 20})
DEFAULT_ALLOWED_GOODS = frozenset({"Groceries", "Energy", "Books", "Children's Clothing"})


@dataclass(frozen=True)
class ContractRules:
    vat_rates: Mapping[str, int] = field(default_factory=lambda: dict(VAT_RATES))
    allowed_goods: frozenset[str] = DEFAULT_ALLOWED_GOODS
    hmrc_node: str = HMRC_NODE

    def __post_init__(self):
        missing = set(GOODS_CLASSES) - set(self.vat_rates)
        if missing:
            raise ConfigError(f"VAT table missing classes: {sorted(missing)}")
        bad = {k: v for k, v in self.vat_rates.items() if v not in ALLOWED_RATES}
        if bad:
            raise ConfigError(f"VAT rates must be one of {sorted(ALLOWED_RATES)}: {bad}")
        unknown = set(self.allowed_goods) - set(self.vat_rates)
        if unknown:
            raise ConfigError(f"allowed goods not in VAT table: {sorted(unknown)}")

    @classmethod
    def from_files(cls, vat_table: str | Path | None = None, allowed_goods: str | Path | None = None) -> ContractRules:
        kwargs = {}
        if vat_table is not None:
            kwargs["vat_rates"] = load_vat_table(vat_table)
        if allowed_goods is not None:
            kwargs["allowed_goods"] = load_allowed_goods(allowed_goods)
        return cls(**kwargs)


def load_vat_table(path: str | Path) -> dict[str, int]:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict) or not all(isinstance(v, int) for v in data.values()):
        raise ConfigError(f"{path}: expected a JSON object mapping goods class to integer percent")
    return data


def load_allowed_goods(path: str | Path) -> frozenset[str]:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list) or not all(isinstance(v, str) for v in data):
        raise ConfigError(f"{path}: expected a JSON array of goods classes")
    return frozenset(data)


# -- amounts --------------------------------------------------------------

def _check_line(line: ItemLine) -> None:
    if line.price < 0 or line.quantity < 1:
        raise InvalidLine(f"{line.item}: price={line.price} quantity={line.quantity}")


def net_amount(lines: Iterable[ItemLine]) -> int:
    total = 0
    for line in lines:
        _check_line(line)
        total += line.price * line.quantity
    return total


def line_vat(line: ItemLine) -> int:
    # round_half_up(price * quantity * rate / 100) for non-negative integers
    return (line.price * line.quantity * line.vat_rate + 50) // 100


def check_rate(line: ItemLine, vat_rates: Mapping[str, int] = VAT_RATES) -> None:
    expected = vat_rates.get(line.item)
    if expected is None:
        raise RateMismatch(f"unknown goods class {line.item!r}")
    if line.vat_rate != expected:
        raise RateMismatch(f"{line.item}: vat_rate {line.vat_rate} != table rate {expected}")


def vat_amount(lines: Iterable[ItemLine], vat_rates: Mapping[str, int] = VAT_RATES) -> int:
    total = 0
    for line in lines:
        _check_line(line)
        check_rate(line, vat_rates)
        total += line_vat(line)
    return total


def total_amount(lines: Sequence[ItemLine], vat_rates: Mapping[str, int] = VAT_RATES) -> int:
    return net_amount(lines) + vat_amount(lines, vat_rates)


def amounts(lines: Sequence[ItemLine], vat_rates: Mapping[str, int] = VAT_RATES) -> tuple[int, int, int]:
    """Return ``(net, vat, total)`` for a list of lines."""
    net = net_amount(lines)
    vat = vat_amount(lines, vat_rates)
    return net, vat, net + vat


def expected_movements(invoice: InvoiceState, kind: MoneyKind) -> dict[tuple[str, MoneyKind], int]:
    """Money movements a payment of ``invoice`` must carry, zero legs omitted."""
    if invoice.split:
        legs = [
            (invoice.buyer.id, -invoice.total_amount),
            (invoice.seller.id, invoice.net_amount),
            (invoice.tax_account.id, invoice.vat_amount),
        ]
    else:
        legs = [(invoice.buyer.id, -invoice.total_amount), (invoice.seller.id, invoice.total_amount)]
    out: dict[tuple[str, MoneyKind], int] = {}
    for acct, delta in legs:
        if delta:
            out[(acct, kind)] = out.get((acct, kind), 0) + delta
    return out


def invoice_signers(invoice: InvoiceState) -> tuple[AccountRef, ...]:
    signers = (invoice.seller, invoice.buyer)
    return signers + (invoice.tax_account,) if invoice.split else signers


def paid_participants(invoice: InvoiceState) -> tuple[AccountRef, ...]:
    base = (invoice.seller, invoice.buyer)
    return base + (invoice.tax_account,) if invoice.split else base


# -- verification ---------------------------------------------------------

def _ids(accounts: Iterable[AccountRef]) -> Counter:
    return Counter(a.id for a in accounts)


def _fail(reason: Reason, detail: str = ""):
    raise violation(reason, detail)


def verify(
    tx: SignedTransaction,
    inputs: Sequence[State],
    rules: ContractRules = ContractRules(),
    accounts: Mapping[str, AccountRef] | None = None,
) -> None:
    """Raise :class:`ContractViolation` unless ``tx`` satisfies its command's contract.

    ``inputs`` are the resolved states referenced by ``tx.inputs``, in order.
    """
    if tx.command in (Command.ISSUE_INVOICE, Command.PAY_INVOICE, Command.PAY_INVOICE_TOKENS):
        verify_invoice(tx, inputs, rules)
    elif tx.command in (Command.REQUEST_DAR, Command.EXECUTE_DAR):
        verify_data_access(tx, inputs)
    elif tx.command is Command.ISSUE_TOKENS:
        verify_token_issue(tx, rules, accounts)
    else:  # pragma: no cover - enum is closed
        raise ValueError(tx.command)


def verify_invoice(tx: SignedTransaction, inputs: Sequence[State], rules: ContractRules = ContractRules()) -> None:
    if len(tx.outputs) != 1 or not isinstance(tx.outputs[0], InvoiceState):
        _fail(Reason.WRONG_SHAPE, "expected exactly one invoice output")
    out: InvoiceState = tx.outputs[0]
    if tx.command is Command.ISSUE_INVOICE:
        _verify_issue(tx, inputs, out, rules)
    else:
        _verify_pay(tx, inputs, out, rules)


def _verify_lines(inv: InvoiceState, rules: ContractRules) -> None:
    net, vat, total = amounts(inv.lines, rules.vat_rates)
    if inv.net_amount != net:
        _fail(Reason.WRONG_NET, f"net {inv.net_amount} != {net}")
    if inv.vat_amount != vat:
        _fail(Reason.WRONG_VAT, f"vat {inv.vat_amount} != {vat}")
    if inv.total_amount != total:
        _fail(Reason.WRONG_TOTAL, f"total {inv.total_amount} != {total}")


def _verify_issue(tx, inputs, out: InvoiceState, rules: ContractRules) -> None:
    if tx.inputs or inputs:
        _fail(Reason.WRONG_SHAPE, "invoice issue consumes no inputs")
    if out.status is not InvoiceStatus.UNPAID:
        _fail(Reason.WRONG_SHAPE, "issued invoice must be Unpaid")
    if out.seller == out.buyer:
        _fail(Reason.WRONG_PARTICIPANTS, "seller and buyer must differ")
    if out.tax_account is not None and out.tax_account.kind is not AccountKind.GOV_PAYMENTS:
        _fail(Reason.WRONG_PARTICIPANTS, "tax account must be the GovPayments account")
    _verify_lines(out, rules)
    if tx.movements:
        _fail(Reason.WRONG_MOVEMENTS, "invoice issue moves no money")
    if _ids(out.participants) != _ids([out.seller, out.buyer]):
        _fail(Reason.WRONG_PARTICIPANTS, "unpaid invoice is shared by seller and buyer only")
    if tx.initiator != out.seller or _ids(tx.required_signers) != _ids(invoice_signers(out)):
        _fail(Reason.WRONG_SIGNERS)


def _verify_pay(tx, inputs, out: InvoiceState, rules: ContractRules) -> None:
    if len(tx.inputs) != 1 or len(inputs) != 1 or not isinstance(inputs[0], InvoiceState):
        _fail(Reason.WRONG_SHAPE, "payment consumes exactly one invoice")
    inp: InvoiceState = inputs[0]
    if inp.status is InvoiceStatus.PAID:
        _fail(Reason.ALREADY_PAID, f"invoice {inp.invoice_id} is already paid")
    if out.status is not InvoiceStatus.PAID:
        _fail(Reason.WRONG_SHAPE, "payment output must be Paid")
    same = (
        inp.invoice_id == out.invoice_id
        and inp.seller == out.seller
        and inp.buyer == out.buyer
        and inp.lines == out.lines
        and inp.money_kind == out.money_kind
        and inp.tax_account == out.tax_account
        and (inp.net_amount, inp.vat_amount, inp.total_amount)
        == (out.net_amount, out.vat_amount, out.total_amount)
    )
    if not same:
        _fail(Reason.WRONG_SHAPE, "paid invoice must carry the unpaid invoice's data")
    tokens = tx.command is Command.PAY_INVOICE_TOKENS
    kind = MoneyKind.TOKEN if tokens else MoneyKind.CURRENT
    if out.money_kind is not kind:
        _fail(Reason.WRONG_MONEY_KIND, f"{out.money_kind.value} invoice cannot be paid by {tx.command.value}")
    if tokens and any(line.item not in rules.allowed_goods for line in out.lines):
        _fail(Reason.DISALLOWED_GOODS)
    _verify_lines(out, rules)

    actual: dict[tuple[str, MoneyKind], int] = {}
    for m in tx.movements:
        key = (m.account.id, m.kind)
        actual[key] = actual.get(key, 0) + m.delta
    actual = {k: v for k, v in actual.items() if v}
    expected = expected_movements(out, kind)
    if actual != expected:
        def leg(acct):
            return actual.get((acct.id, kind), 0) != expected.get((acct.id, kind), 0)
        if out.split and leg(out.tax_account):
            _fail(Reason.WRONG_VAT, "VAT leg does not match the invoice")
        if leg(out.seller):
            _fail(Reason.WRONG_NET, "seller leg does not match the invoice")
        if leg(out.buyer):
            _fail(Reason.WRONG_TOTAL, "buyer debit does not match the invoice")
        _fail(Reason.WRONG_MOVEMENTS, "unexpected money movement")
    if _ids(out.participants) != _ids(paid_participants(out)):
        _fail(Reason.WRONG_PARTICIPANTS)
    if tx.initiator != out.buyer or _ids(tx.required_signers) != _ids(invoice_signers(out)):
        _fail(Reason.WRONG_SIGNERS)


def verify_data_access(tx: SignedTransaction, inputs: Sequence[State]) -> None:
    if len(tx.outputs) != 1 or not isinstance(tx.outputs[0], DataAccessRequestState):
        _fail(Reason.WRONG_SHAPE, "expected exactly one data access request output")
    out: DataAccessRequestState = tx.outputs[0]
    if tx.movements:
        _fail(Reason.WRONG_MOVEMENTS)
    if tx.command is Command.REQUEST_DAR:
        if tx.inputs or inputs:
            _fail(Reason.WRONG_SHAPE, "warrant request consumes no inputs")
        if out.status is not WarrantStatus.AUTHORIZED:
            _fail(Reason.WRONG_SHAPE, "recorded warrant must be Authorized")
        if out.requester.kind is not AccountKind.GOV_INVESTIGATOR:
            _fail(Reason.NOT_INVESTIGATOR)
        if tx.initiator != out.requester:
            _fail(Reason.NOT_REQUESTER)
    else:
        if len(tx.inputs) != 1 or len(inputs) != 1 or not isinstance(inputs[0], DataAccessRequestState):
            _fail(Reason.UNKNOWN_WARRANT, "execution consumes exactly one warrant")
        inp: DataAccessRequestState = inputs[0]
        if inp.status is WarrantStatus.EXECUTED:
            _fail(Reason.ALREADY_EXECUTED, f"warrant {inp.warrant_id} already executed")
        if inp.status is not WarrantStatus.AUTHORIZED:
            _fail(Reason.WRONG_SHAPE, "warrant is not authorized")
        if out.warrant_id != inp.warrant_id or out.authorizer != inp.authorizer:
            _fail(Reason.UNKNOWN_WARRANT)
        if tx.initiator != inp.requester or out.requester != inp.requester:
            _fail(Reason.NOT_REQUESTER)
        if out.subject != inp.subject:
            _fail(Reason.WRONG_SHAPE, "warrant subject cannot change")
        if out.status is not WarrantStatus.EXECUTED or out.executed_at is None:
            _fail(Reason.WRONG_SHAPE, "executed warrant must carry an execution time")
    if out.authorizer.kind is not AccountKind.LEGAL_AUTHORITY:
        _fail(Reason.WRONG_AUTHORITY)
    if _ids(tx.required_signers) != _ids([out.requester, out.authorizer]):
        _fail(Reason.WRONG_SIGNERS)


def verify_token_issue(
    tx: SignedTransaction,
    rules: ContractRules = ContractRules(),
    accounts: Mapping[str, AccountRef] | None = None,
) -> None:
    if tx.inputs or len(tx.outputs) != 1 or not isinstance(tx.outputs[0], TokenIssuanceState):
        _fail(Reason.WRONG_SHAPE, "token issue creates exactly one issuance record")
    out: TokenIssuanceState = tx.outputs[0]
    if out.issuer != rules.hmrc_node or tx.initiator.host_node != out.issuer:
        _fail(Reason.UNAUTHORIZED_ISSUER, f"{tx.initiator.host_node} cannot issue tokens")
    if out.amount <= 0:
        _fail(Reason.NON_POSITIVE_AMOUNT, f"amount {out.amount}")
    if accounts is not None and out.recipient.id not in accounts:
        _fail(Reason.UNKNOWN_RECIPIENT)
    moves = [(m.account.id, m.kind, m.delta) for m in tx.movements]
    if moves != [(out.recipient.id, MoneyKind.TOKEN, out.amount)]:
        _fail(Reason.WRONG_MOVEMENTS)
    if _ids(tx.required_signers) != _ids([tx.initiator]):
        _fail(Reason.WRONG_SIGNERS)
