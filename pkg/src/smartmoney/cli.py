"""Command-line entry point: ``feasibility``, ``bench``, ``demo`` and ``ingest``.

Exit codes: 0 success, 1 a check or run failed, 2 bad configuration or input.
``SMARTMONEY_CONFIG`` may name a JSON/TOML network config used as the base
for every command.
"""
from __future__ import annotations

import argparse
import dataclasses
import itertools
import logging
import os
import re
import sys
from pathlib import Path
from typing import Sequence

from . import contracts
from .contracts import ContractRules
from .errors import ConfigError, IoError, ParseError, SmartMoneyError
from .feasibility import run_feasibility
from .harness import BenchConfig, export_csv, export_json, run_scenario
from .listings import listing, parse_shopping_list_json
from .model import AccountKind, MoneyKind, Role
from .netsim import CostModel, NetworkConfig, start_network

CONFIG_ENV = "SMARTMONEY_CONFIG"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

_RANGE = re.compile(r"^(\d+)\s*\.\.\s*(\d+)(?:\s*(?:step|:)\s*(\d+))?$")


def parse_factor(text: str | Sequence[str]) -> list[int]:
    """``"10,50,100"``, ``"10..100 step 10"``, ``"10..100:10"`` or ``"10"``."""
    if not isinstance(text, str):
        text = " ".join(text)
    values: list[int] = []
    for part in text.split(","):
        part = part.strip()
        m = _RANGE.match(part)
        if m:
            lo, hi, step = int(m[1]), int(m[2]), int(m[3] or 1)
            if step < 1 or hi < lo:
                raise ConfigError(f"bad range {part!r}")
            values.extend(range(lo, hi + 1, step))
        elif part.isdigit():
            values.append(int(part))
        else:
            raise ConfigError(f"cannot parse factor value {part!r}")
    if not values:
        raise ConfigError("empty factor list")
    return values


def base_config(path: str | None = None) -> NetworkConfig:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return NetworkConfig()
    try:
        return NetworkConfig.load(path)
    except OSError as err:
        raise ConfigError(f"cannot read network config {path}: {err.strerror}") from None
    except (ValueError, TypeError) as err:
        raise ConfigError(f"invalid network config {path}: {err}") from None


def _rules(args, base: NetworkConfig) -> ContractRules:
    if args.vat_table is None and args.allowed_goods is None:
        return base.rules
    rules = ContractRules.from_files(args.vat_table, args.allowed_goods)
    if args.vat_table is None:
        rules = dataclasses.replace(rules, vat_rates=dict(base.rules.vat_rates))
    if args.allowed_goods is None:
        rules = dataclasses.replace(rules, allowed_goods=base.rules.allowed_goods)
    return rules


# -- commands -------------------------------------------------------------

def cmd_feasibility(args) -> int:
    base = base_config(args.config)
    report = run_feasibility(_rules(args, base), seed=args.seed if args.seed is not None else base.seed, config=base)
    print(report.render(verbose=args.verbose))
    if args.log:
        Path(args.log).write_bytes(report.event_log)
    failed = report.first_failure
    if failed is not None:
        print(f"FAILED: {failed.code} {failed.description}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_bench(args) -> int:
    base = base_config(args.config)
    vols = parse_factor(args.vol)
    clients = parse_factor(args.clients)
    splits = {"on": [True], "off": [False], "both": [True, False]}[args.split]
    if args.per_client is not None:
        txs = [None]
    else:
        txs = parse_factor(args.tx)
    cost = {"corda": CostModel.corda_like(), "zero": CostModel(), "config": base.cost}[args.cost]

    configs = []
    for split, tx, vol, cl in itertools.product(splits, txs, vols, clients):
        configs.append(
            BenchConfig(
                tx=args.per_client * cl if tx is None else tx,
                vol=vol,
                cl=cl,
                split_enabled=split,
                phase=args.phase,
                repetitions=args.reps,
                seed=args.seed,
                warmup=not args.no_warmup,
                mode=args.mode,
                cost=cost,
                latency_s=base.latency_s,
            )
        )
    reports = []
    for i, cfg in enumerate(configs):
        report = run_scenario(cfg)
        reports.append(report)
        print(report.summary(), flush=True)
        if args.out:
            export_csv(report, args.out, append=i > 0 or args.append)
    if args.json:
        export_json(reports, args.json)
    rejected = sum(r.rejected_count for r in reports)
    if rejected:
        print(f"FAILED: {rejected} rejected transactions", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_ingest(args) -> int:
    base = base_config(args.config)
    rates = contracts.load_vat_table(args.vat_table) if args.vat_table else base.rules.vat_rates
    docs = parse_shopping_list_json(args.path, rates, strict=args.strict)
    for i, doc in enumerate(docs):
        net, vat, total = contracts.amounts(doc.lines, rates)
        print(f"[{i}] {doc.seller} -> {doc.buyer}: {len(doc.lines)} lines, net {net}, vat {vat}, total {total}"
              + (f" (document amount {doc.amount} ignored)" if doc.amount is not None else ""))
        if args.verbose:
            for ln in doc.lines:
                print(f"      {ln.item:<20} {ln.price:>7} x{ln.quantity} @ {ln.vat_rate}%")
    return EXIT_OK


def cmd_demo(args) -> int:
    """Walk both bundled listings through issue and pay, narrating each step."""
    base = base_config(args.config)
    net = start_network(dataclasses.replace(base, mode="deterministic"))
    say = print
    try:
        ledger = net.ledger
        alice = ledger.create_account(Role.BUYER.value, "Alice", AccountKind.CONSUMER)
        mega = ledger.create_account(Role.SELLER.value, "MegaCompany", AccountKind.SELLER)
        ledger.fund(alice, MoneyKind.CURRENT, 100_000)
        say(f"funded {alice} with 100000 Current")
        res = net.issue_tokens(Role.HMRC.value, alice, 50_000)
        say(f"HMRC issued 50000 tokens to {alice}: tx {res.tx_id[:12]}")

        def balances():
            return ", ".join(
                f"{a.display_name} {net.get_balance(a)}/{net.get_balance(a, MoneyKind.TOKEN)}"
                for a in (alice, mega, net.vat_payments)
            )

        for n, kind in ((1, MoneyKind.CURRENT), (2, MoneyKind.TOKEN)):
            doc = listing(n)
            net_amt, vat_amt, total = contracts.amounts(doc.lines, net.rules.vat_rates)
            say(f"\nlisting {n}: {len(doc.lines)} lines, net {net_amt} + vat {vat_amt} = {total}, paid in {kind.value}")
            issued = net.issue_invoice(mega, alice, doc.lines, kind)
            inv = issued["invoice_id"]
            say(f"  {mega.display_name} issued {inv} (tx {issued.tx_id[:12]} at t={issued.notarized_at:.4f}s)")
            say(f"  visible to: {sorted(a.display_name for a in ledger.accounts.values() if ledger.vault_lookup(a, inv))}")
            paid = net.pay_invoice_with_tokens(alice, inv) if kind is MoneyKind.TOKEN else net.pay_invoice(alice, inv)
            if paid.ok:
                say(f"  {alice.display_name} paid {inv} (tx {paid.tx_id[:12]}, latency {paid.latency:.4f}s)")
            else:
                say(f"  payment failed: {paid.error}")
            say(f"  visible to: {sorted(a.display_name for a in ledger.accounts.values() if ledger.vault_lookup(a, inv))}")
            say(f"  balances (Current/Token): {balances()}")
        if args.log:
            ledger.write_log(args.log)
            say(f"\nevent log written to {args.log}")
    finally:
        net.close()
    return EXIT_OK


# -- wiring ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smartmoney", description=__doc__.splitlines()[0])
    p.add_argument("--config", help=f"network config file (JSON/TOML); default ${CONFIG_ENV}")
    p.add_argument("-q", "--quiet", action="store_true", help="suppress warnings")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("feasibility", help="run the thirteen assertion tests")
    f.add_argument("--vat-table", help="JSON object of goods class -> VAT percent")
    f.add_argument("--allowed-goods", help="JSON array of goods payable with tokens")
    f.add_argument("--seed", type=int)
    f.add_argument("--log", help="write the ledger event log here")
    f.add_argument("-v", "--verbose", action="store_true")
    f.set_defaults(func=cmd_feasibility)

    b = sub.add_parser("bench", help="run a benchmark sweep")
    b.add_argument("--tx", nargs="+", default=["1000"], help="invoices per run; list or range")
    b.add_argument("--per-client", type=int, help="invoices per client (sets tx = n * clients)")
    b.add_argument("--vol", nargs="+", default=["10"], help="items per invoice; list or range")
    b.add_argument("--clients", nargs="+", default=["10"], help="client count; list or range like 10..100 step 10")
    b.add_argument("--split", choices=("on", "off", "both"), default="on")
    b.add_argument("--phase", choices=("issue", "pay", "both"), default="both")
    b.add_argument("--reps", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--mode", choices=("deterministic", "concurrent"), default="deterministic")
    b.add_argument("--cost", choices=("corda", "zero", "config"), default="corda",
                   help="node cost model: Corda-like, zero, or from the network config")
    b.add_argument("--no-warmup", action="store_true", help="keep the first repetition")
    b.add_argument("--out", help="CSV output path")
    b.add_argument("--append", action="store_true", help="append to an existing CSV")
    b.add_argument("--json", help="JSON report path")
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("demo", help="narrated walk-through of the bundled shopping lists")
    d.add_argument("--log", help="write the ledger event log here")
    d.set_defaults(func=cmd_demo)

    i = sub.add_parser("ingest", help="parse and price shopping-list JSON")
    i.add_argument("path")
    i.add_argument("--strict", action="store_true", help="reject vatRate values that disagree with the table")
    i.add_argument("--vat-table")
    i.add_argument("-v", "--verbose", action="store_true")
    i.set_defaults(func=cmd_ingest)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParseError, IoError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except SmartMoneyError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
