"""The feasibility suite: thirteen assertion tests over five scripted scenarios.

Scenarios run in order on one deterministic network:

1. Alice pays a Current-money invoice she can afford (AT1-AT3).
2. Alice cannot afford the same basket (AT4-AT5).
3. Alice pays an allowed-goods basket with tokens (AT6-AT7).
4. Alice tries to pay for alcohol with tokens (AT8-AT9).
5. VATInvestigator obtains and executes a warrant on MegaCompany (AT10-AT13).

Expected amounts come from the shopping list as written (its own
``vatRate`` values), so a misconfigured rate table shows up as a balance
mismatch instead of being silently absorbed.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

from . import contracts
from .contracts import ContractRules
from .errors import DISALLOWED_GOODS_MESSAGE
from .flows import FlowResult
from .listings import ShoppingListDocument, listing, parse_shopping_lists
from .model import (
    AccountKind,
    DataAccessRequestState,
    InvoiceState,
    InvoiceStatus,
    MoneyKind,
    Role,
    WarrantStatus,
    canonical_json,
    state_to_record,
)
from .netsim import Network, NetworkConfig, start_network

ALICE_FUNDS = 100_000
ALICE_TOKENS = 100_000

DESCRIPTIONS = {
    "AT1": "Unpaid invoice is stored in Alice's ledger",
    "AT2": "Invoice state in Alice's ledger is Paid",
    "AT3": "Alice's account balance is debited with Totalamount",
    "AT4": "Invoice state in Alice's ledger is not Paid",
    "AT5": "Alice's account balance remains unchanged",
    "AT6": "Invoice state in Alice's ledger is Paid",
    "AT7": "Alice's account balance is debited with Totalamount",
    "AT8": "Invoice state in Alice's ledger is not Paid",
    "AT9": "Alice's account balance remains unchanged",
    "AT10": "Signed DAR is created and unexecuted",
    "AT11": "Signed DAR is executed",
    "AT12": "Fetched data is MegaCompany's actual transactions",
    "AT13": "VATInvestigator can only query MegaCompany's transactions once",
}


@dataclass
class Check:
    code: str
    description: str
    rows: list[tuple[str, bool]] = field(default_factory=list)
    note: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.rows) and all(ok for _, ok in self.rows)


@dataclass
class FeasibilityReport:
    checks: list[Check]
    messages: dict[str, str]
    event_log: bytes

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def first_failure(self) -> Check | None:
        return next((c for c in self.checks if not c.passed), None)

    def __getitem__(self, code: str) -> Check:
        return next(c for c in self.checks if c.code == code)

    def render(self, verbose: bool = False) -> str:
        width = max(len(c.description) for c in self.checks)
        out = [f"{'Test':<5} {'Description':<{width}}  Result", "-" * (width + 15)]
        for c in self.checks:
            out.append(f"{c.code:<5} {c.description:<{width}}  {c.passed}")
            if verbose or not c.passed:
                for label, ok in c.rows:
                    out.append(f"{'':<7}{'ok  ' if ok else 'FAIL'} {label}")
                if c.note:
                    out.append(f"{'':<7}note: {c.note}")
        passed = sum(c.passed for c in self.checks)
        out.append(f"{passed}/{len(self.checks)} assertion tests passed")
        return "\n".join(out)


def _expected(doc: ShoppingListDocument) -> tuple[int, int, int]:
    # The list's own rates, not the network's table.
    declared = {ln.item: ln.vat_rate for ln in doc.lines}
    return contracts.amounts(doc.lines, declared)


class _Scenario:
    def __init__(self, net: Network, rules: ContractRules):
        self.net = net
        self.rules = rules
        ledger = net.ledger
        self.alice = ledger.create_account(Role.BUYER.value, "Alice", AccountKind.CONSUMER)
        self.mega = ledger.create_account(Role.SELLER.value, "MegaCompany", AccountKind.SELLER)
        self.vat = net.vat_payments
        self.investigator = net.vat_investigator
        self.legal = net.legal_authority
        ledger.fund(self.alice, MoneyKind.CURRENT, ALICE_FUNDS)
        self.messages: dict[str, str] = {}

    def balances(self, kind: MoneyKind) -> tuple[int, int, int]:
        get = self.net.get_balance
        return get(self.mega, kind), get(self.alice, kind), get(self.vat, kind)

    def state(self, account, invoice_id: str):
        found = self.net.ledger.vault_lookup(account, invoice_id)
        return None if found is None else found[1]

    def is_paid(self, account, invoice_id: str) -> bool:
        st = self.state(account, invoice_id)
        return isinstance(st, InvoiceState) and st.status is InvoiceStatus.PAID

    def invoice_ids(self, account) -> set[str]:
        return {s.invoice_id for s in self.net.vault_query(account, "invoice")}

    def submit(self, doc: ShoppingListDocument, money_kind: MoneyKind = MoneyKind.CURRENT) -> str:
        # Submission goes through ingest with the network's own table, as a
        # seller's client would; the raw ``doc`` keeps the declared rates.
        text = canonical_json([doc.to_record()]).decode()
        lines = parse_shopping_lists(text, self.rules.vat_rates, strict=False)[0].lines
        res = self.net.issue_invoice(self.mega, self.alice, lines, money_kind)
        if not res.ok:
            raise RuntimeError(f"invoice issue failed: {res.error!r}")
        return res["invoice_id"]

    def paid_rows(self, invoice_id: str, expect_paid: bool) -> list[tuple[str, bool]]:
        verb = "sees Paid" if expect_paid else "does not see Paid"
        return [
            (f"{who} {verb}", self.is_paid(acct, invoice_id) == expect_paid)
            for who, acct in (("MegaCompany", self.mega), ("Alice", self.alice), ("VATPayments", self.vat))
        ]

    @staticmethod
    def balance_rows(before, after, deltas, kind: MoneyKind) -> list[tuple[str, bool]]:
        rows = []
        for who, b, a, d in zip(("MegaCompany", "Alice", "VATPayments"), before, after, deltas):
            rows.append((f"{who} {kind.value} {b} -> {a} (expected {b + d})", a == b + d))
        return rows

    # -- the five scenarios -----------------------------------------------

    def pay_sufficient(self, doc: ShoppingListDocument) -> list[Check]:
        net_amt, vat_amt, total = _expected(doc)
        before = self.balances(MoneyKind.CURRENT)
        inv = self.submit(doc)
        at1 = Check("AT1", DESCRIPTIONS["AT1"], [
            ("invoice in MegaCompany's vault", inv in self.invoice_ids(self.mega)),
            ("invoice in Alice's vault", inv in self.invoice_ids(self.alice)),
            ("invoice not in VATPayments' vault", inv not in self.invoice_ids(self.vat)),
        ])
        res = self.net.pay_invoice(self.alice, inv)
        at2 = Check("AT2", DESCRIPTIONS["AT2"], self.paid_rows(inv, True), note=_outcome(res))
        after = self.balances(MoneyKind.CURRENT)
        at3 = Check("AT3", DESCRIPTIONS["AT3"], self.balance_rows(before, after, (net_amt, -total, vat_amt), MoneyKind.CURRENT))
        return [at1, at2, at3]

    def pay_insufficient(self, doc: ShoppingListDocument) -> list[Check]:
        before = self.balances(MoneyKind.CURRENT)
        inv = self.submit(doc)
        res = self.net.pay_invoice(self.alice, inv)
        self.messages["insufficient_funds"] = "" if res.ok else str(res.error)
        at4 = Check("AT4", DESCRIPTIONS["AT4"], self.paid_rows(inv, False), note=_outcome(res))
        after = self.balances(MoneyKind.CURRENT)
        at5 = Check("AT5", DESCRIPTIONS["AT5"], self.balance_rows(before, after, (0, 0, 0), MoneyKind.CURRENT))
        return [at4, at5]

    def pay_tokens_allowed(self, doc: ShoppingListDocument) -> list[Check]:
        net_amt, vat_amt, total = _expected(doc)
        issued = self.net.issue_tokens(Role.HMRC.value, self.alice, ALICE_TOKENS)
        if not issued.ok:
            raise RuntimeError(f"token issuance failed: {issued.error!r}")
        before = self.balances(MoneyKind.TOKEN)
        inv = self.submit(doc, MoneyKind.TOKEN)
        res = self.net.pay_invoice_with_tokens(self.alice, inv)
        at6 = Check("AT6", DESCRIPTIONS["AT6"], self.paid_rows(inv, True), note=_outcome(res))
        after = self.balances(MoneyKind.TOKEN)
        at7 = Check("AT7", DESCRIPTIONS["AT7"], self.balance_rows(before, after, (net_amt, -total, vat_amt), MoneyKind.TOKEN))
        return [at6, at7]

    def pay_tokens_disallowed(self, doc: ShoppingListDocument) -> list[Check]:
        before_tok = self.balances(MoneyKind.TOKEN)
        before_cur = self.balances(MoneyKind.CURRENT)
        inv = self.submit(doc, MoneyKind.TOKEN)
        res = self.net.pay_invoice_with_tokens(self.alice, inv)
        self.messages["disallowed_goods"] = "" if res.ok else str(res.error)
        rows = self.paid_rows(inv, False)
        rows.append((f"error is {DISALLOWED_GOODS_MESSAGE!r}", not res.ok and str(res.error) == DISALLOWED_GOODS_MESSAGE))
        at8 = Check("AT8", DESCRIPTIONS["AT8"], rows, note=_outcome(res))
        at9 = Check(
            "AT9",
            DESCRIPTIONS["AT9"],
            self.balance_rows(before_tok, self.balances(MoneyKind.TOKEN), (0, 0, 0), MoneyKind.TOKEN)
            + self.balance_rows(before_cur, self.balances(MoneyKind.CURRENT), (0, 0, 0), MoneyKind.CURRENT),
        )
        return [at8, at9]

    def smart_warrant(self) -> list[Check]:
        req = self.net.request_warrant(self.investigator, self.mega, self.legal)
        wid = req["warrant_id"] if req.ok else None
        dars = self.net.vault_query(self.investigator, "warrant")
        state = self.state(self.investigator, wid) if wid else None
        at10 = Check("AT10", DESCRIPTIONS["AT10"], [
            ("warrant request notarised", req.ok),
            ("DAR in VATInvestigator's vault", any(d.warrant_id == wid for d in dars)),
            ("signed by LegalAuthority", isinstance(state, DataAccessRequestState) and state.authorizer == self.legal),
            ("status is unexecuted", isinstance(state, DataAccessRequestState) and state.status is WarrantStatus.AUTHORIZED),
        ], note=_outcome(req))
        if wid is None:
            return [at10] + [Check(c, DESCRIPTIONS[c], [("warrant was never issued", False)]) for c in ("AT11", "AT12", "AT13")]

        first = self.net.execute_warrant(self.investigator, wid)
        state = self.state(self.investigator, wid)
        at11 = Check("AT11", DESCRIPTIONS["AT11"], [
            ("execution notarised", first.ok),
            ("status is no longer unexecuted", isinstance(state, DataAccessRequestState) and state.status is not WarrantStatus.AUTHORIZED),
        ], note=_outcome(first))

        actual = _fingerprint(self.net.vault_query(self.mega, "invoice"))
        fetched = _fingerprint(first["data"]) if first.ok else None
        at12 = Check("AT12", DESCRIPTIONS["AT12"], [
            (f"fetched {len(fetched or ())} invoices, vault holds {len(actual)}", fetched == actual),
            ("MegaCompany has invoices to fetch", bool(actual)),
        ])

        second = self.net.execute_warrant(self.investigator, wid)
        at13 = Check("AT13", DESCRIPTIONS["AT13"], [
            ("second execution is refused", not second.ok),
            ("second execution returns no data", not second.ok and second.value is None),
        ], note=_outcome(second))
        return [at10, at11, at12, at13]


def _fingerprint(states) -> list[bytes]:
    return sorted(canonical_json(state_to_record(s)) for s in states)


def _outcome(res: FlowResult) -> str:
    return "flow ok" if res.ok else f"flow failed: {res.error_name}: {res.error}"


def run_feasibility(
    rules: ContractRules | None = None,
    seed: int = 0,
    listing1: ShoppingListDocument | None = None,
    listing2: ShoppingListDocument | None = None,
    config: NetworkConfig | None = None,
) -> FeasibilityReport:
    """Run all five scenarios on a fresh deterministic network."""
    rules = rules or ContractRules()
    listing1 = listing1 or listing(1)
    listing2 = listing2 or listing(2)
    config = dataclasses.replace(config or NetworkConfig(), seed=seed, rules=rules, mode="deterministic", split_enabled=True)
    net = start_network(config)
    try:
        sc = _Scenario(net, rules)
        steps: list[Callable[[], list[Check]]] = [
            lambda: sc.pay_sufficient(listing1),
            lambda: sc.pay_insufficient(listing1),
            lambda: sc.pay_tokens_allowed(listing2),
            lambda: sc.pay_tokens_disallowed(listing1),
            sc.smart_warrant,
        ]
        checks: list[Check] = []
        for step in steps:
            checks.extend(step())
        return FeasibilityReport(checks, sc.messages, net.ledger.log_bytes())
    finally:
        net.close()
