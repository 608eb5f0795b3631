"""Multi-party flows for invoices, tokens and smart warrants.

A flow is a generator. It runs on the node that hosts its initiator and
suspends whenever it needs another node: ``reply = yield Request(node,
handler, payload)``. The scheduler delivers the request, runs the named
responder on the target node (responders are generators too) and resumes
the flow with the responder's return value, or throws the responder's
exception into it.

Flows receive a context object from the simulator exposing ``node``,
``ledger``, ``rules``, ``split``, ``tx_store``, ``origin`` and the
cost-charging helpers ``verify``, ``sign``, ``query``, ``write`` and
``charge``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Generator, Mapping

from . import contracts
from .errors import (
    ContractViolation,
    InsufficientFunds,
    Reason,
    SessionFailure,
    SignerNotParticipant,
    UnknownAccount,
    UnknownInput,
    UnknownInvoice,
    UnknownSubject,
    WarrantRejected,
    WrongBuyer,
)
from .model import (
    NOTARY_NODE,
    AccountKind,
    AccountRef,
    Command,
    DataAccessRequestState,
    InvoiceState,
    InvoiceStatus,
    ItemLine,
    MoneyKind,
    MoneyMove,
    Role,
    SignedTransaction,
    TokenIssuanceState,
    WarrantStatus,
)


@dataclass(frozen=True)
class Request:
    """Open a session with ``to``, run its ``handler`` on ``payload``, await the reply."""

    to: str
    handler: str
    payload: Any = None

    @property
    def wire_size(self) -> int:
        size = getattr(self.payload, "wire_size", None)
        return size if size is not None else 256


class FlowKind(str, enum.Enum):
    ISSUE_INVOICE = "IssueInvoice"
    PAY_INVOICE = "PayInvoice"
    PAY_INVOICE_TOKENS = "PayInvoiceTokens"
    ISSUE_TOKENS = "IssueTokens"
    REQUEST_WARRANT = "RequestWarrant"
    EXECUTE_WARRANT = "ExecuteWarrant"


@dataclass(frozen=True)
class FlowRequest:
    kind: FlowKind
    initiator: AccountRef
    payload: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def issue_invoice(cls, seller, buyer, lines, money_kind=MoneyKind.CURRENT) -> FlowRequest:
        return cls(FlowKind.ISSUE_INVOICE, seller, {"buyer": buyer, "lines": tuple(lines), "money_kind": MoneyKind(money_kind)})

    @classmethod
    def pay_invoice(cls, buyer, invoice_id, tokens: bool = False) -> FlowRequest:
        kind = FlowKind.PAY_INVOICE_TOKENS if tokens else FlowKind.PAY_INVOICE
        return cls(kind, buyer, {"invoice_id": invoice_id})

    @classmethod
    def issue_tokens(cls, issuer, recipient, amount) -> FlowRequest:
        return cls(FlowKind.ISSUE_TOKENS, issuer, {"recipient": recipient, "amount": amount})

    @classmethod
    def request_warrant(cls, requester, subject, authorizer=None) -> FlowRequest:
        return cls(FlowKind.REQUEST_WARRANT, requester, {"subject": subject, "authorizer": authorizer})

    @classmethod
    def execute_warrant(cls, requester, warrant_id, authorizer=None) -> FlowRequest:
        return cls(FlowKind.EXECUTE_WARRANT, requester, {"warrant_id": warrant_id, "authorizer": authorizer})


@dataclass
class FlowResult:
    kind: FlowKind
    ok: bool
    value: dict | None = None
    error: BaseException | None = None
    submitted_at: float = 0.0
    notarized_at: float | None = None
    finished_at: float | None = None

    @property
    def tx_id(self) -> str | None:
        return self.value.get("tx_id") if self.value else None

    @property
    def latency(self) -> float | None:
        if self.notarized_at is None:
            return None
        return self.notarized_at - self.submitted_at

    @property
    def error_name(self) -> str | None:
        if self.error is None:
            return None
        reason = getattr(self.error, "reason", None)
        return reason.value if reason is not None else type(self.error).__name__

    def __getitem__(self, key):
        if not self.ok:
            raise KeyError(key)
        return self.value[key]


FlowGen = Generator[Request, Any, Any]


# -- shared subflows ------------------------------------------------------

def _account(ctx, ref, missing=UnknownAccount) -> AccountRef:
    try:
        return ctx.ledger.account(ref)
    except UnknownAccount:
        raise missing(str(ref)) from None


def resolve_inputs(ctx, tx: SignedTransaction) -> FlowGen:
    """Resolve input states, fetching unknown transactions from the session peer."""
    states = []
    for ref in tx.inputs:
        known = ctx.tx_store.get(ref.tx_id)
        if known is None:
            if ctx.origin is None:
                raise UnknownInput(str(ref))
            known = yield Request(ctx.origin, "fetch_tx", ref.tx_id)
            if not ctx.ledger.is_notarised(known) or known.tx_id != ref.tx_id:
                raise UnknownInput(f"{ref}: peer sent an unnotarised dependency")
            ctx.charge_sigs(len(known.signatures) + 1)
            ctx.tx_store[ref.tx_id] = known
        states.append(known.outputs[ref.output_index])
    return states


def collect_signatures(ctx, tx: SignedTransaction) -> FlowGen:
    by_node: dict[str, list[AccountRef]] = {}
    for party in tx.missing_signers:
        by_node.setdefault(party.host_node, []).append(party)
    for node, parties in by_node.items():
        if node == ctx.node:
            tx = ctx.sign(tx, parties)
            continue
        sigs = yield Request(node, "sign", tx)
        ctx.charge_sigs(len(sigs))
        tx = tx.with_signatures(sigs)
    return tx


def finalise(ctx, tx: SignedTransaction) -> FlowGen:
    """Notarise ``tx`` and distribute it to every participant's node."""
    result = yield Request(NOTARY_NODE, "notarise", tx)
    ctx.notarised(result)
    done = result.tx
    ctx.tx_store[done.tx_id] = done
    participants = list(dict.fromkeys(a for s in done.outputs for a in s.participants))
    for node in dict.fromkeys(a.host_node for a in participants):
        if node != ctx.node:
            yield Request(node, "finality", done)
    local = [a for a in participants if a.host_node == ctx.node]
    ctx.write(done, local)
    return done


# -- initiating flows -----------------------------------------------------

def issue_invoice_flow(ctx, initiator: AccountRef, buyer, lines, money_kind=MoneyKind.CURRENT) -> FlowGen:
    seller = initiator
    buyer = _account(ctx, buyer, SessionFailure)
    lines = tuple(lines)
    net, vat, total = contracts.amounts(lines, ctx.rules.vat_rates)
    tax = ctx.ledger.account_of_kind(AccountKind.GOV_PAYMENTS) if ctx.split else None
    invoice = InvoiceState(
        invoice_id=ctx.ledger.new_linear_id("INV"),
        seller=seller,
        buyer=buyer,
        lines=lines,
        money_kind=MoneyKind(money_kind),
        net_amount=net,
        vat_amount=vat,
        total_amount=total,
        status=InvoiceStatus.UNPAID,
        participants=(seller, buyer),
        tax_account=tax,
    )
    tx = ctx.ledger.build_and_sign(seller, (), (invoice,), Command.ISSUE_INVOICE, contracts.invoice_signers(invoice))
    ctx.charge_sign(1)
    ctx.verify(tx, ())
    tx = yield from collect_signatures(ctx, tx)
    done = yield from finalise(ctx, tx)
    return {"invoice_id": invoice.invoice_id, "tx_id": done.tx_id}


def pay_invoice_flow(ctx, initiator: AccountRef, invoice_id: str, tokens: bool = False) -> FlowGen:
    buyer = initiator
    found = ctx.query(buyer, invoice_id)
    if found is None or not isinstance(found[1], InvoiceState):
        raise UnknownInvoice(invoice_id)
    ref, invoice = found
    if invoice.buyer != buyer:
        raise WrongBuyer(f"{buyer} is not the buyer of {invoice_id}")
    kind = MoneyKind.TOKEN if tokens else MoneyKind.CURRENT
    command = Command.PAY_INVOICE_TOKENS if tokens else Command.PAY_INVOICE
    moves = [
        MoneyMove(ctx.ledger.account(acct), k, delta)
        for (acct, k), delta in contracts.expected_movements(invoice, kind).items()
    ]
    paid = replace(invoice, status=InvoiceStatus.PAID, participants=contracts.paid_participants(invoice))
    tx = ctx.ledger.build_and_sign(buyer, (ref,), (paid,), command, contracts.invoice_signers(invoice), moves)
    ctx.charge_sign(1)
    ctx.verify(tx, (invoice,))
    # Optimistic funds check; the notary commit re-checks atomically.
    if ctx.balance(buyer, kind) < invoice.total_amount:
        raise InsufficientFunds()
    tx = yield from collect_signatures(ctx, tx)
    done = yield from finalise(ctx, tx)
    return {"invoice_id": invoice_id, "tx_id": done.tx_id}


def issue_tokens_flow(ctx, initiator: AccountRef, recipient, amount: int) -> FlowGen:
    recipient = _account(ctx, recipient)
    state = TokenIssuanceState(issuer=initiator.host_node, recipient=recipient, amount=amount)
    moves = (MoneyMove(recipient, MoneyKind.TOKEN, amount),)
    tx = ctx.ledger.build_and_sign(initiator, (), (state,), Command.ISSUE_TOKENS, (initiator,), moves)
    ctx.charge_sign(1)
    ctx.verify(tx, ())
    done = yield from finalise(ctx, tx)
    return {"tx_id": done.tx_id}


def _authority(ctx, authorizer) -> AccountRef:
    if authorizer is None:
        found = ctx.ledger.account_of_kind(AccountKind.LEGAL_AUTHORITY)
        if found is None:
            raise ContractViolation(Reason.WRONG_AUTHORITY, "no LegalAuthority account")
        return found
    return _account(ctx, authorizer)


def request_warrant_flow(ctx, initiator: AccountRef, subject, authorizer=None) -> FlowGen:
    if initiator.kind is not AccountKind.GOV_INVESTIGATOR:
        raise ContractViolation(Reason.NOT_INVESTIGATOR, f"{initiator} cannot request warrants")
    subject = _account(ctx, subject, UnknownSubject)
    authority = _authority(ctx, authorizer)
    dar = DataAccessRequestState(
        warrant_id=ctx.ledger.new_linear_id("DAR"),
        requester=initiator,
        subject=subject,
        authorizer=authority,
        status=WarrantStatus.AUTHORIZED,
        authorized_at=ctx.now(),
    )
    tx = ctx.ledger.build_and_sign(initiator, (), (dar,), Command.REQUEST_DAR, (initiator, authority))
    ctx.charge_sign(1)
    ctx.verify(tx, ())
    tx = yield from collect_signatures(ctx, tx)
    done = yield from finalise(ctx, tx)
    return {"warrant_id": dar.warrant_id, "tx_id": done.tx_id}


def execute_warrant_flow(ctx, initiator: AccountRef, warrant_id: str, authorizer=None) -> FlowGen:
    # Look across every account on this node so a wrong requester on the
    # right node is told NotRequester rather than UnknownWarrant.
    found = None
    for acct in ctx.ledger.hosted_accounts(ctx.node):
        found = ctx.query(acct, warrant_id)
        if found is not None:
            break
    if found is None or not isinstance(found[1], DataAccessRequestState):
        raise ContractViolation(Reason.UNKNOWN_WARRANT, f"no warrant {warrant_id}")
    ref, warrant = found
    if warrant.requester != initiator:
        raise ContractViolation(Reason.NOT_REQUESTER, "warrant must be executed by its requester")
    if authorizer is not None and _account(ctx, authorizer) != warrant.authorizer:
        raise ContractViolation(Reason.UNKNOWN_WARRANT, "authority does not match the issued warrant")
    executed = replace(warrant, status=WarrantStatus.EXECUTED, executed_at=ctx.now())
    tx = ctx.ledger.build_and_sign(initiator, (ref,), (executed,), Command.EXECUTE_DAR, (initiator, warrant.authorizer))
    ctx.charge_sign(1)
    ctx.verify(tx, (warrant,))
    tx = yield from collect_signatures(ctx, tx)
    done = yield from finalise(ctx, tx)
    data = yield Request(warrant.subject.host_node, "warrant_query", done)
    return {"warrant_id": warrant_id, "tx_id": done.tx_id, "data": data}


FLOWS: dict[FlowKind, Callable[..., FlowGen]] = {
    FlowKind.ISSUE_INVOICE: issue_invoice_flow,
    FlowKind.PAY_INVOICE: pay_invoice_flow,
    FlowKind.PAY_INVOICE_TOKENS: lambda ctx, initiator, invoice_id: pay_invoice_flow(ctx, initiator, invoice_id, tokens=True),
    FlowKind.ISSUE_TOKENS: issue_tokens_flow,
    FlowKind.REQUEST_WARRANT: request_warrant_flow,
    FlowKind.EXECUTE_WARRANT: execute_warrant_flow,
}


# -- responders -----------------------------------------------------------

def always_approve(tx: SignedTransaction) -> bool:
    return True


def sign_responder(ctx, tx: SignedTransaction) -> FlowGen:
    inputs = yield from resolve_inputs(ctx, tx)
    ctx.verify(tx, inputs)
    mine = [a for a in tx.missing_signers if a.host_node == ctx.node]
    if not mine:
        raise SignerNotParticipant(f"{ctx.node} hosts no pending signer of {tx.tx_id[:12]}")
    if any(a.kind is AccountKind.LEGAL_AUTHORITY for a in mine) and not ctx.approval_policy(tx):
        raise WarrantRejected(f"{ctx.node} declined {tx.command.value}")
    signed = ctx.sign(tx, mine)
    return {a.id: signed.signatures[a.id] for a in mine}


def fetch_tx_responder(ctx, tx_id: str):
    tx = ctx.tx_store.get(tx_id)
    if tx is None:
        raise UnknownInput(tx_id)
    return tx
    yield  # pragma: no cover - makes this a generator


def finality_responder(ctx, tx: SignedTransaction):
    ctx.charge_sigs(len(tx.signatures) + 1)
    if not ctx.ledger.is_notarised(tx):
        raise SessionFailure(f"{tx.tx_id[:12]} is not notarised")
    ctx.tx_store[tx.tx_id] = tx
    hosted = {a for s in tx.outputs for a in s.participants if a.host_node == ctx.node}
    ctx.write(tx, hosted)
    return True
    yield  # pragma: no cover


def notarise_responder(ctx, tx: SignedTransaction):
    ctx.charge_sigs(len(tx.signatures))
    ctx.charge_commit()
    return ctx.ledger.notarize(tx, wall_time=ctx.now())
    yield  # pragma: no cover


def warrant_query_responder(ctx, tx: SignedTransaction):
    """Serve one executed warrant's data request from the subject's vault."""
    ctx.charge_sigs(len(tx.signatures) + 1)
    if not ctx.ledger.is_notarised(tx) or tx.command is not Command.EXECUTE_DAR:
        raise ContractViolation(Reason.UNKNOWN_WARRANT, "not a notarised warrant execution")
    warrant: DataAccessRequestState = tx.outputs[0]
    if warrant.subject.host_node != ctx.node:
        raise ContractViolation(Reason.UNKNOWN_WARRANT, "subject is not hosted here")
    served = ctx.node_state.setdefault("served_warrants", set())
    if warrant.warrant_id in served:
        raise ContractViolation(Reason.ALREADY_EXECUTED, f"warrant {warrant.warrant_id} already served")
    served.add(warrant.warrant_id)
    ctx.charge_query()
    return tuple(ctx.ledger.vault_query(warrant.subject, "invoice"))
    yield  # pragma: no cover


RESPONDERS: dict[str, Callable[..., Any]] = {
    "sign": sign_responder,
    "fetch_tx": fetch_tx_responder,
    "finality": finality_responder,
    "notarise": notarise_responder,
    "warrant_query": warrant_query_responder,
}

INSTALLED: dict[Role, frozenset[str]] = {
    Role.HMRC: frozenset({"sign", "fetch_tx", "finality"}),
    Role.BUYER: frozenset({"sign", "fetch_tx", "finality", "warrant_query"}),
    Role.SELLER: frozenset({"sign", "fetch_tx", "finality", "warrant_query"}),
    Role.LEGAL: frozenset({"sign", "fetch_tx", "finality"}),
    Role.NOTARY: frozenset({"notarise"}),
}


def coerce_lines(lines) -> tuple[ItemLine, ...]:
    return tuple(ln if isinstance(ln, ItemLine) else ItemLine.from_record(ln) for ln in lines)
