"""Ledger core: accounts, balances, vaults, signing and the notary.

One :class:`Ledger` backs a whole simulated network. Nodes see it through
account-scoped vaults; the notary commit (input uniqueness, timestamp,
balance movements, event-log append) happens under a single lock so two
transactions racing for the same input serialize and exactly one wins.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Protocol, Sequence

from .errors import (
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
from .model import (
    HMRC_NODE,
    NOTARY_NODE,
    AccountKind,
    AccountRef,
    Balances,
    Command,
    DataAccessRequestState,
    InvoiceState,
    InvoiceStatus,
    MoneyKind,
    MoneyMove,
    SignedTransaction,
    State,
    StateRef,
    TokenIssuanceState,
    canonical_json,
    state_from_record,
    state_to_record,
)

STATE_KINDS = {"invoice": InvoiceState, "warrant": DataAccessRequestState, "token": TokenIssuanceState}
_GOV_KINDS = (AccountKind.GOV_PAYMENTS, AccountKind.GOV_INVESTIGATOR)


class Signer(Protocol):
    def sign(self, party: str, tx_id: str) -> str: ...

    def verify(self, party: str, tx_id: str, signature: str) -> bool: ...


class HashSigner:
    """Mock signatures: a keyed digest of party id and transaction id.

    Stands in for real asymmetric keys; anything implementing ``sign`` and
    ``verify`` with the same signature can replace it.
    """

    def __init__(self, secret: bytes = b"smart-money"):
        self._secret = secret

    def sign(self, party: str, tx_id: str) -> str:
        return hashlib.sha256(self._secret + b"|" + party.encode() + b"|" + tx_id.encode()).hexdigest()

    def verify(self, party: str, tx_id: str, signature: str) -> bool:
        return signature == self.sign(party, tx_id)


@dataclass(frozen=True)
class NotaryResult:
    tx_id: str
    timestamp: int
    wall_time: float
    tx: SignedTransaction


class Vault:
    """Current and historic states visible to one account."""

    def __init__(self, owner: AccountRef):
        self.owner = owner
        self.current: dict[StateRef, State] = {}
        self.historic: list[tuple[StateRef, State]] = []
        self._by_linear: dict[str, StateRef] = {}

    def record(self, ref: StateRef, state: State) -> None:
        if ref in self.current:
            return
        linear = state.linear_id
        if linear is not None:
            prev = self._by_linear.get(linear)
            if prev is not None:
                self.historic.append((prev, self.current.pop(prev)))
            self._by_linear[linear] = ref
        self.current[ref] = state

    def by_linear_id(self, linear_id: str) -> tuple[StateRef, State] | None:
        ref = self._by_linear.get(linear_id)
        return (ref, self.current[ref]) if ref is not None else None


def _matches(state: State, owner: AccountRef, kind, status, counterparty: AccountRef | None) -> bool:
    if kind is not None:
        cls = STATE_KINDS[kind] if isinstance(kind, str) else kind
        if not isinstance(state, cls):
            return False
    if status is not None and getattr(state, "status", None) != status:
        return False
    if counterparty is not None:
        if counterparty == owner or counterparty not in state.participants:
            return False
    return True


class Ledger:
    def __init__(
        self,
        nodes: Iterable[str] = ("HMRCCWP", "BuyerCWP", "SellerCWP", "LegalCWP", NOTARY_NODE),
        signer: Signer | None = None,
        clock: Callable[[], float] | None = None,
    ):
        self.nodes = tuple(nodes)
        self.signer = signer or HashSigner()
        self.clock = clock or (lambda: 0.0)
        self.accounts: dict[str, AccountRef] = {}
        self.balances: dict[str, Balances] = {}
        self.vaults: dict[str, Vault] = {}
        self.transactions: dict[str, SignedTransaction] = {}
        self.consumed: dict[StateRef, str] = {}
        self.log: list[dict] = []
        self._lock = threading.RLock()
        self._logical_time = 0
        self._ids = itertools.count(1)

    # -- accounts ---------------------------------------------------------

    def create_account(self, node: str, name: str, kind: AccountKind | str) -> AccountRef:
        kind = AccountKind(kind)
        if node not in self.nodes:
            raise UnknownNode(node)
        with self._lock:
            acct = AccountRef(id=f"{name}@{node}", display_name=name, host_node=node, kind=kind)
            if acct.id in self.accounts:
                raise DuplicateAccountName(f"{name!r} already exists on {node}")
            if kind in _GOV_KINDS:
                if node != HMRC_NODE:
                    raise AccountKindConflict(f"{kind.value} accounts live on {HMRC_NODE}")
                if any(a.kind is kind for a in self.accounts.values()):
                    raise AccountKindConflict(f"only one {kind.value} account may exist")
            self.accounts[acct.id] = acct
            self.balances[acct.id] = Balances()
            self.vaults[acct.id] = Vault(acct)
            self.log.append({"type": "account", "id": acct.id, "name": name, "node": node, "kind": kind.value})
            return acct

    def account(self, ref: AccountRef | str) -> AccountRef:
        key = ref.id if isinstance(ref, AccountRef) else ref
        try:
            return self.accounts[key]
        except KeyError:
            raise UnknownAccount(key) from None

    def find_account(self, name: str, node: str | None = None) -> AccountRef:
        for acct in self.accounts.values():
            if acct.display_name == name and (node is None or acct.host_node == node):
                return acct
        raise UnknownAccount(name if node is None else f"{name}@{node}")

    def account_of_kind(self, kind: AccountKind) -> AccountRef | None:
        return next((a for a in self.accounts.values() if a.kind is kind), None)

    def hosted_accounts(self, node: str) -> list[AccountRef]:
        return [a for a in self.accounts.values() if a.host_node == node]

    def new_linear_id(self, prefix: str) -> str:
        return f"{prefix}-{next(self._ids):06d}"

    # -- balances ---------------------------------------------------------

    def get_balance(self, account: AccountRef | str, kind: MoneyKind | str = MoneyKind.CURRENT) -> int:
        acct = self.account(account)
        with self._lock:
            return self.balances[acct.id].get(MoneyKind(kind))

    def fund(self, account: AccountRef | str, kind: MoneyKind | str, amount: int) -> None:
        """External issuance of money into an account (payments-network deposit)."""
        acct = self.account(account)
        kind = MoneyKind(kind)
        if amount <= 0:
            raise ValueError("funding amount must be positive")
        with self._lock:
            self.balances[acct.id].add(kind, amount)
            self.log.append({"type": "fund", "account": acct.id, "kind": kind.value, "amount": amount})

    # -- transactions -----------------------------------------------------

    def resolve(self, ref: StateRef) -> State:
        tx = self.transactions.get(ref.tx_id)
        if tx is None or not 0 <= ref.output_index < len(tx.outputs):
            raise UnknownInput(str(ref))
        return tx.outputs[ref.output_index]

    def build_and_sign(
        self,
        initiator: AccountRef,
        inputs: Sequence[StateRef],
        outputs: Sequence[State],
        command: Command,
        required_signers: Sequence[AccountRef],
        movements: Sequence[MoneyMove] = (),
    ) -> SignedTransaction:
        for ref in inputs:
            self.resolve(ref)
        if initiator not in required_signers:
            raise SignerNotParticipant(f"{initiator} is not a required signer of {command.value}")
        tx = SignedTransaction(
            initiator=initiator,
            inputs=tuple(inputs),
            outputs=tuple(outputs),
            command=command,
            required_signers=tuple(required_signers),
            movements=tuple(movements),
        )
        return self.sign(tx, [initiator])

    def sign(self, tx: SignedTransaction, parties: Iterable[AccountRef]) -> SignedTransaction:
        sigs = {}
        for party in parties:
            if party not in tx.required_signers:
                raise SignerNotParticipant(f"{party} is not a required signer")
            sigs[party.id] = self.signer.sign(party.id, tx.tx_id)
        return tx.with_signatures(sigs)

    def check_signatures(self, tx: SignedTransaction) -> None:
        for party in tx.required_signers:
            sig = tx.signatures.get(party.id)
            if sig is None:
                raise MissingSignature(f"{tx.command.value} {tx.tx_id[:12]} lacks a signature from {party}")
            if not self.signer.verify(party.id, tx.tx_id, sig):
                raise InvalidSignature(f"signature of {party} does not match {tx.tx_id[:12]}")

    def notarize(self, tx: SignedTransaction, wall_time: float | None = None) -> NotaryResult:
        """Atomically consume inputs, apply balance movements and timestamp ``tx``."""
        self.check_signatures(tx)
        with self._lock:
            if tx.tx_id in self.transactions:
                raise DoubleSpend(f"transaction {tx.tx_id[:12]} already notarised")
            for ref in tx.inputs:
                self.resolve(ref)
                spender = self.consumed.get(ref)
                if spender is not None:
                    raise DoubleSpend(f"input {ref} already consumed by {spender[:12]}")
            deltas: dict[tuple[str, MoneyKind], int] = {}
            for m in tx.movements:
                self.account(m.account)
                key = (m.account.id, m.kind)
                deltas[key] = deltas.get(key, 0) + m.delta
            for (acct, kind), delta in deltas.items():
                if self.balances[acct].get(kind) + delta < 0:
                    raise InsufficientFunds()
            for (acct, kind), delta in deltas.items():
                self.balances[acct].add(kind, delta)
            for ref in tx.inputs:
                self.consumed[ref] = tx.tx_id
            self._logical_time += 1
            stamp = self._logical_time
            done = tx.notarised(self.signer.sign(NOTARY_NODE, f"{tx.tx_id}:{stamp}"), stamp)
            self.transactions[tx.tx_id] = done
            self.log.append(tx_record(done))
            wall = self.clock() if wall_time is None else wall_time
            return NotaryResult(tx.tx_id, stamp, wall, done)

    def is_notarised(self, tx: SignedTransaction) -> bool:
        done = self.transactions.get(tx.tx_id)
        return (
            done is not None
            and tx.notary_signature is not None
            and self.signer.verify(NOTARY_NODE, f"{tx.tx_id}:{tx.timestamp}", tx.notary_signature)
        )

    # -- vaults -----------------------------------------------------------

    def record_state(self, account: AccountRef, state: State, origin_tx: str, output_index: int | None = None) -> None:
        acct = self.account(account)
        if acct not in state.participants:
            raise NotParticipant(f"{acct} is not a participant of the state")
        tx = self.transactions.get(origin_tx)
        if tx is None:
            raise UnknownInput(f"{origin_tx[:12]} is not notarised")
        if output_index is None:
            output_index = tx.outputs.index(state)
        with self._lock:
            self.vaults[acct.id].record(StateRef(origin_tx, output_index), state)

    def record_transaction(self, tx: SignedTransaction, accounts: Iterable[AccountRef]) -> None:
        """Record every output of a notarised ``tx`` for each given participant."""
        for idx, state in enumerate(tx.outputs):
            for acct in accounts:
                if acct in state.participants:
                    self.record_state(acct, state, tx.tx_id, idx)

    def vault_query(
        self,
        account: AccountRef | str,
        kind: str | type | None = None,
        status=None,
        counterparty: AccountRef | None = None,
    ) -> list[State]:
        return [s for _, s in self.vault_query_refs(account, kind, status, counterparty)]

    def vault_query_refs(self, account, kind=None, status=None, counterparty=None) -> list[tuple[StateRef, State]]:
        acct = self.account(account)
        with self._lock:
            items = list(self.vaults[acct.id].current.items())
        return [(r, s) for r, s in items if _matches(s, acct, kind, status, counterparty)]

    def vault_lookup(self, account: AccountRef, linear_id: str) -> tuple[StateRef, State] | None:
        acct = self.account(account)
        with self._lock:
            return self.vaults[acct.id].by_linear_id(linear_id)

    # -- inspection -------------------------------------------------------

    def snapshot(self) -> dict:
        """Balances and current vault contents keyed by account id."""
        with self._lock:
            return {
                acct_id: {
                    "current": self.balances[acct_id].current,
                    "token": self.balances[acct_id].token,
                    "states": sorted(
                        (str(ref.tx_id), ref.output_index, canonical_json(state_to_record(s)).decode())
                        for ref, s in self.vaults[acct_id].current.items()
                    ),
                }
                for acct_id in sorted(self.accounts)
            }

    def total_balance(self, kind: MoneyKind) -> int:
        with self._lock:
            return sum(b.get(kind) for b in self.balances.values())

    # -- event log --------------------------------------------------------

    def log_bytes(self) -> bytes:
        return b"".join(canonical_json(rec) + b"\n" for rec in self.log)

    def write_log(self, path: str | Path) -> None:
        Path(path).write_bytes(self.log_bytes())

    @classmethod
    def replay(cls, records: Iterable[Mapping], signer: Signer | None = None) -> Ledger:
        """Rebuild balances and vaults from an event log."""
        records = list(records)
        nodes = dict.fromkeys(r["node"] for r in records if r["type"] == "account")
        ledger = cls(nodes=tuple(nodes) + (NOTARY_NODE,), signer=signer)
        for rec in records:
            kind = rec["type"]
            if kind == "account":
                ledger.create_account(rec["node"], rec["name"], rec["kind"])
            elif kind == "fund":
                ledger.fund(rec["account"], rec["kind"], rec["amount"])
            elif kind == "tx":
                ledger._apply_tx_record(rec)
            else:
                raise ValueError(f"unknown event type {kind!r}")
        return ledger

    def _apply_tx_record(self, rec: Mapping) -> None:
        accts = self.accounts
        tx = SignedTransaction(
            initiator=accts[rec["initiator"]],
            inputs=tuple(StateRef(t, i) for t, i in rec["inputs"]),
            outputs=tuple(state_from_record(o, accts) for o in rec["outputs"]),
            command=Command(rec["command"]),
            required_signers=tuple(accts[a] for a in rec["signers"]),
            movements=tuple(MoneyMove(accts[a], MoneyKind(k), d) for a, k, d in rec["movements"]),
        )
        if tx.tx_id != rec["tx_id"]:
            raise ValueError(f"event log content does not hash to {rec['tx_id']}")
        with self._lock:
            for ref in tx.inputs:
                self.consumed[ref] = tx.tx_id
            for m in tx.movements:
                self.balances[m.account.id].add(m.kind, m.delta)
            self._logical_time = rec["timestamp"]
            done = tx.notarised(self.signer.sign(NOTARY_NODE, f"{tx.tx_id}:{rec['timestamp']}"), rec["timestamp"])
            self.transactions[tx.tx_id] = done
            self.log.append(tx_record(done))
        participants = {a for s in tx.outputs for a in s.participants}
        self.record_transaction(done, participants)


def tx_record(tx: SignedTransaction) -> dict:
    rec = {"type": "tx", "tx_id": tx.tx_id, "timestamp": tx.timestamp}
    rec.update(tx.content())
    return rec


def read_log(path: str | Path) -> Iterator[dict]:
    with open(path) as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


def invoices_of(states: Iterable[State]) -> list[InvoiceState]:
    return [s for s in states if isinstance(s, InvoiceState)]


def paid(invoice: State | None) -> bool:
    return isinstance(invoice, InvoiceState) and invoice.status is InvoiceStatus.PAID
