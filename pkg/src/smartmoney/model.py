"""Domain types: accounts, on-ledger states and transactions.

States are frozen dataclasses. A transaction's id is the SHA-256 of its
canonical JSON content (everything except signatures and notarisation), so
any change to inputs, outputs, command, signers or money movements yields a
different id and invalidates previously collected signatures.
"""
from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping, Union

HMRC_NODE = "HMRCCWP"
NOTARY_NODE = "Notary"


class Role(str, enum.Enum):
    HMRC = "HMRCCWP"
    BUYER = "BuyerCWP"
    SELLER = "SellerCWP"
    LEGAL = "LegalCWP"
    NOTARY = "Notary"


class AccountKind(str, enum.Enum):
    CONSUMER = "Consumer"
    SELLER = "Seller"
    GOV_PAYMENTS = "GovPayments"
    GOV_INVESTIGATOR = "GovInvestigator"
    LEGAL_AUTHORITY = "LegalAuthority"


class MoneyKind(str, enum.Enum):
    CURRENT = "Current"
    TOKEN = "Token"


class InvoiceStatus(str, enum.Enum):
    UNPAID = "Unpaid"
    PAID = "Paid"


class WarrantStatus(str, enum.Enum):
    REQUESTED = "Requested"
    AUTHORIZED = "Authorized"
    EXECUTED = "Executed"


class Command(str, enum.Enum):
    ISSUE_INVOICE = "IssueInvoice"
    PAY_INVOICE = "PayInvoice"
    PAY_INVOICE_TOKENS = "PayInvoiceTokens"
    ISSUE_TOKENS = "IssueTokens"
    REQUEST_DAR = "RequestDAR"
    EXECUTE_DAR = "ExecuteDAR"


@dataclass(frozen=True)
class AccountRef:
    id: str
    display_name: str
    host_node: str
    kind: AccountKind

    def __str__(self) -> str:
        return self.id


@dataclass
class Balances:
    current: int = 0
    token: int = 0

    def get(self, kind: MoneyKind) -> int:
        return self.current if kind is MoneyKind.CURRENT else self.token

    def add(self, kind: MoneyKind, delta: int) -> None:
        if kind is MoneyKind.CURRENT:
            self.current += delta
        else:
            self.token += delta


@dataclass(frozen=True)
class ItemLine:
    item: str
    price: int
    quantity: int
    vat_rate: int

    def to_record(self) -> dict:
        return {"item": self.item, "price": self.price, "quantity": self.quantity, "vatRate": self.vat_rate}

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> ItemLine:
        return cls(rec["item"], rec["price"], rec["quantity"], rec["vatRate"])


@dataclass(frozen=True)
class InvoiceState:
    invoice_id: str
    seller: AccountRef
    buyer: AccountRef
    lines: tuple[ItemLine, ...]
    money_kind: MoneyKind
    net_amount: int
    vat_amount: int
    total_amount: int
    status: InvoiceStatus
    participants: tuple[AccountRef, ...]
    # VATPayments account when the invoice is settled as a split payment.
    tax_account: AccountRef | None = None

    @property
    def linear_id(self) -> str:
        return self.invoice_id

    @property
    def split(self) -> bool:
        return self.tax_account is not None


@dataclass(frozen=True)
class DataAccessRequestState:
    warrant_id: str
    requester: AccountRef
    subject: AccountRef
    authorizer: AccountRef
    status: WarrantStatus
    authorized_at: float | None = None
    executed_at: float | None = None

    @property
    def linear_id(self) -> str:
        return self.warrant_id

    @property
    def participants(self) -> tuple[AccountRef, ...]:
        return (self.requester, self.authorizer)


@dataclass(frozen=True)
class TokenIssuanceState:
    issuer: str
    recipient: AccountRef
    amount: int

    @property
    def linear_id(self) -> None:
        return None

    @property
    def participants(self) -> tuple[AccountRef, ...]:
        return (self.recipient,)


State = Union[InvoiceState, DataAccessRequestState, TokenIssuanceState]


@dataclass(frozen=True, order=True)
class StateRef:
    tx_id: str
    output_index: int

    def __str__(self) -> str:
        return f"{self.tx_id[:12]}:{self.output_index}"


@dataclass(frozen=True)
class MoneyMove:
    account: AccountRef
    kind: MoneyKind
    delta: int


# -- serialisation --------------------------------------------------------

def state_to_record(state: State) -> dict:
    if isinstance(state, InvoiceState):
        return {
            "type": "invoice",
            "invoice_id": state.invoice_id,
            "seller": state.seller.id,
            "buyer": state.buyer.id,
            "lines": [ln.to_record() for ln in state.lines],
            "money_kind": state.money_kind.value,
            "net": state.net_amount,
            "vat": state.vat_amount,
            "total": state.total_amount,
            "status": state.status.value,
            "participants": [a.id for a in state.participants],
            "tax_account": state.tax_account.id if state.tax_account else None,
        }
    if isinstance(state, DataAccessRequestState):
        return {
            "type": "warrant",
            "warrant_id": state.warrant_id,
            "requester": state.requester.id,
            "subject": state.subject.id,
            "authorizer": state.authorizer.id,
            "status": state.status.value,
            "authorized_at": state.authorized_at,
            "executed_at": state.executed_at,
        }
    if isinstance(state, TokenIssuanceState):
        return {"type": "token", "issuer": state.issuer, "recipient": state.recipient.id, "amount": state.amount}
    raise TypeError(f"not a ledger state: {state!r}")


def state_from_record(rec: Mapping[str, Any], accounts: Mapping[str, AccountRef]) -> State:
    kind = rec["type"]
    if kind == "invoice":
        tax = rec.get("tax_account")
        return InvoiceState(
            invoice_id=rec["invoice_id"],
            seller=accounts[rec["seller"]],
            buyer=accounts[rec["buyer"]],
            lines=tuple(ItemLine.from_record(r) for r in rec["lines"]),
            money_kind=MoneyKind(rec["money_kind"]),
            net_amount=rec["net"],
            vat_amount=rec["vat"],
            total_amount=rec["total"],
            status=InvoiceStatus(rec["status"]),
            participants=tuple(accounts[a] for a in rec["participants"]),
            tax_account=accounts[tax] if tax else None,
        )
    if kind == "warrant":
        return DataAccessRequestState(
            warrant_id=rec["warrant_id"],
            requester=accounts[rec["requester"]],
            subject=accounts[rec["subject"]],
            authorizer=accounts[rec["authorizer"]],
            status=WarrantStatus(rec["status"]),
            authorized_at=rec["authorized_at"],
            executed_at=rec["executed_at"],
        )
    if kind == "token":
        return TokenIssuanceState(rec["issuer"], accounts[rec["recipient"]], rec["amount"])
    raise ValueError(f"unknown state type {kind!r}")


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


@dataclass(frozen=True)
class SignedTransaction:
    initiator: AccountRef
    inputs: tuple[StateRef, ...]
    outputs: tuple[State, ...]
    command: Command
    required_signers: tuple[AccountRef, ...]
    movements: tuple[MoneyMove, ...] = ()
    signatures: Mapping[str, str] = field(default_factory=dict, compare=False)
    notary_signature: str | None = field(default=None, compare=False)
    timestamp: int | None = field(default=None, compare=False)

    def content(self) -> dict:
        return {
            "initiator": self.initiator.id,
            "inputs": [[r.tx_id, r.output_index] for r in self.inputs],
            "outputs": [state_to_record(s) for s in self.outputs],
            "command": self.command.value,
            "signers": [a.id for a in self.required_signers],
            "movements": [[m.account.id, m.kind.value, m.delta] for m in self.movements],
        }

    @cached_property
    def content_bytes(self) -> bytes:
        return canonical_json(self.content())

    @cached_property
    def tx_id(self) -> str:
        return hashlib.sha256(self.content_bytes).hexdigest()

    @property
    def wire_size(self) -> int:
        return len(self.content_bytes) + 96 * (len(self.signatures) + (self.notary_signature is not None))

    @property
    def missing_signers(self) -> tuple[AccountRef, ...]:
        return tuple(a for a in self.required_signers if a.id not in self.signatures)

    def with_signatures(self, sigs: Mapping[str, str]) -> SignedTransaction:
        return self._derive(signatures={**self.signatures, **sigs})

    def notarised(self, signature: str, timestamp: int) -> SignedTransaction:
        return self._derive(notary_signature=signature, timestamp=timestamp)

    def _derive(self, **changes) -> SignedTransaction:
        # Signature/notary fields are outside the content hash; keep the cache.
        new = dataclasses.replace(self, **changes)
        for key in ("content_bytes", "tx_id"):
            if key in self.__dict__:
                new.__dict__[key] = self.__dict__[key]
        return new

    def output_ref(self, index: int) -> StateRef:
        return StateRef(self.tx_id, index)
