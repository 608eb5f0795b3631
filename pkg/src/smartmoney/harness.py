"""Load generation and metrics for the scalability experiments.

A run creates ``cl`` seller/buyer account pairs. Each client is closed-loop:
it keeps exactly one flow outstanding and submits the next when the
previous one resolves. The issue phase raises ``tx / cl`` invoices per
client; the pay phase then pays each of them. Latency of a flow is notary
commit time minus submission time, throughput is successes over the span
from first submission to last commit.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from . import contracts
from .errors import ConfigViolation, CorruptRecords, EmptyRecords, IncompleteRun, IoError
from .flows import FlowRequest, FlowResult
from .model import AccountKind, ItemLine, MoneyKind, Role
from .netsim import CostModel, Network, NetworkConfig, start_network

CSV_HEADER = (
    "phase", "split", "tx", "vol", "cl", "run",
    "throughput_tps", "latency_mean_s", "latency_p95_s", "rejected",
)
PHASES = ("Issue", "Pay", "Both")
MIN_CLIENTS, MAX_CLIENTS = 10, 100
MIN_VOL, MAX_VOL = 10, 100
MAX_TX = 10_000


class InvalidVol(ConfigViolation):
    pass


@dataclass(frozen=True)
class BenchConfig:
    tx: int = 1000
    vol: int = 10
    cl: int = 10
    split_enabled: bool = True
    phase: str = "Both"
    repetitions: int = 10
    seed: int = 0
    warmup: bool = True
    mode: str = "deterministic"
    cost: CostModel = field(default_factory=CostModel.corda_like)
    latency_s: float = 0.0
    price_range: tuple[int, int] = (100, 10_000)
    max_quantity: int = 3

    def __post_init__(self):
        phase = self.phase.capitalize()
        object.__setattr__(self, "phase", phase)
        self.validate()

    def validate(self) -> None:
        if not MIN_CLIENTS <= self.cl <= MAX_CLIENTS:
            raise ConfigViolation(f"cl={self.cl} outside [{MIN_CLIENTS}, {MAX_CLIENTS}]")
        if not MIN_VOL <= self.vol <= MAX_VOL:
            raise ConfigViolation(f"vol={self.vol} outside [{MIN_VOL}, {MAX_VOL}]")
        if not 1 <= self.tx <= MAX_TX:
            raise ConfigViolation(f"tx={self.tx} outside [1, {MAX_TX}]")
        if self.tx % self.cl:
            raise ConfigViolation(f"tx={self.tx} is not divisible by cl={self.cl}")
        if self.phase not in PHASES:
            raise ConfigViolation(f"phase must be one of {PHASES}, got {self.phase!r}")
        if self.repetitions < 1:
            raise ConfigViolation("repetitions must be >= 1")

    @property
    def per_client(self) -> int:
        return self.tx // self.cl

    @property
    def measured_phases(self) -> tuple[str, ...]:
        return ("Issue", "Pay") if self.phase == "Both" else (self.phase,)


@dataclass(frozen=True)
class TxRecord:
    phase: str
    client: int
    submitted_at: float
    notarized_at: float | None
    finished_at: float | None
    ok: bool
    error: str | None = None

    @classmethod
    def of(cls, phase: str, client: int, res: FlowResult) -> TxRecord:
        return cls(phase, client, res.submitted_at, res.notarized_at, res.finished_at, res.ok, res.error_name)


@dataclass(frozen=True)
class Metrics:
    throughput_tps: float
    latency_mean_s: float
    latency_median_s: float
    latency_p95_s: float
    rejected: int
    successes: int


@dataclass
class RunResult:
    run: int
    phases: dict[str, Metrics]
    records: list[TxRecord]
    warmup: bool = False


@dataclass
class MetricsReport:
    config: BenchConfig
    runs: list[RunResult]

    @property
    def measured(self) -> list[RunResult]:
        return [r for r in self.runs if not r.warmup]

    @property
    def rejected_count(self) -> int:
        return sum(m.rejected for r in self.runs for m in r.phases.values())

    def aggregate(self, phase: str) -> Metrics:
        rows = [r.phases[phase] for r in self.measured]
        mean = lambda attr: float(np.mean([getattr(m, attr) for m in rows]))  # noqa: E731
        return Metrics(
            throughput_tps=mean("throughput_tps"),
            latency_mean_s=mean("latency_mean_s"),
            latency_median_s=mean("latency_median_s"),
            latency_p95_s=mean("latency_p95_s"),
            rejected=sum(m.rejected for m in rows),
            successes=sum(m.successes for m in rows),
        )

    def throughput(self, phase: str) -> float:
        return self.aggregate(phase).throughput_tps

    def latency(self, phase: str) -> float:
        return self.aggregate(phase).latency_mean_s

    def rows(self) -> Iterator[dict]:
        cfg = self.config
        base = {"split": "on" if cfg.split_enabled else "off", "tx": cfg.tx, "vol": cfg.vol, "cl": cfg.cl}
        for phase in cfg.measured_phases:
            for r in self.measured:
                yield {"phase": phase, **base, "run": r.run, **_metric_cols(r.phases[phase])}
            yield {"phase": phase, **base, "run": "mean", **_metric_cols(self.aggregate(phase))}

    def to_json(self) -> dict:
        return {
            "config": {k: v for k, v in dataclasses.asdict(self.config).items() if k != "cost"},
            "rejected_count": self.rejected_count,
            "rows": list(self.rows()),
            "aggregate": {p: dataclasses.asdict(self.aggregate(p)) for p in self.config.measured_phases},
        }

    def summary(self) -> str:
        cfg = self.config
        out = []
        for p in cfg.measured_phases:
            m = self.aggregate(p)
            out.append(
                f"{p:<5} split={'on ' if cfg.split_enabled else 'off'} tx={cfg.tx} vol={cfg.vol} cl={cfg.cl}: "
                f"{m.throughput_tps:9.2f} tps  latency mean {m.latency_mean_s:.4f}s p95 {m.latency_p95_s:.4f}s  "
                f"rejected {m.rejected}"
            )
        return "\n".join(out)


def _metric_cols(m: Metrics) -> dict:
    return {
        "throughput_tps": round(m.throughput_tps, 6),
        "latency_mean_s": round(m.latency_mean_s, 6),
        "latency_p95_s": round(m.latency_p95_s, 6),
        "rejected": m.rejected,
    }


# -- workload -------------------------------------------------------------

def gen_shopping_list(
    vol: int,
    rng: random.Random,
    vat_rates=contracts.VAT_RATES,
    price_range: tuple[int, int] = (100, 10_000),
    max_quantity: int = 3,
    goods: Sequence[str] | None = None,
) -> list[ItemLine]:
    """``vol`` random lines with table-correct VAT rates."""
    if vol < 1:
        raise InvalidVol(f"vol must be >= 1, got {vol}")
    classes = sorted(goods if goods is not None else vat_rates)
    lo, hi = price_range
    lines = []
    for _ in range(vol):
        item = rng.choice(classes)
        lines.append(ItemLine(item, rng.randint(lo, hi), rng.randint(1, max_quantity), vat_rates[item]))
    return lines


def compute_metrics(records: Iterable) -> Metrics:
    """Throughput and latency over records with ``submitted_at``, ``notarized_at`` and ``ok``."""
    records = list(records)
    if not records:
        raise EmptyRecords("no records to aggregate")
    good = [r for r in records if r.ok]
    for r in good:
        if r.notarized_at is None or r.notarized_at < r.submitted_at:
            raise CorruptRecords(f"record notarised before submission: {r!r}")
    rejected = len(records) - len(good)
    if not good:
        return Metrics(0.0, float("nan"), float("nan"), float("nan"), rejected, 0)
    lat = np.array([r.notarized_at - r.submitted_at for r in good])
    span = max(r.notarized_at for r in good) - min(r.submitted_at for r in good)
    # A single instantaneous commit has no span; report its rate as 1/latency.
    tps = len(good) / span if span > 0 else float("inf")
    return Metrics(
        throughput_tps=float(tps),
        latency_mean_s=float(lat.mean()),
        latency_median_s=float(np.median(lat)),
        latency_p95_s=float(np.percentile(lat, 95)),
        rejected=rejected,
        successes=len(good),
    )


# -- driver ---------------------------------------------------------------

class _ClosedLoop:
    """Run one request stream per client, each with one flow in flight."""

    def __init__(self, net: Network, phase: str, streams: list[list[FlowRequest]], on_result=None):
        self.net = net
        self.phase = phase
        self.streams = [iter(s) for s in streams]
        self.buffers: list[list[TxRecord]] = [[] for _ in streams]
        self.results: list[list[FlowResult]] = [[] for _ in streams]
        self.on_result = on_result
        self.clients = []

    def _next(self, i: int) -> None:
        req = next(self.streams[i], None)
        if req is None:
            return
        fut = self.net.submit_flow(self.clients[i], req)
        fut.add_done_callback(lambda f, i=i: self._done(i, f.result()))

    def _done(self, i: int, res: FlowResult) -> None:
        self.buffers[i].append(TxRecord.of(self.phase, i, res))
        self.results[i].append(res)
        self._next(i)

    def run(self, expected: int, host: str) -> list[TxRecord]:
        self.clients = [self.net.client(host, f"{self.phase}-client-{i}") for i in range(len(self.streams))]
        for i in range(len(self.streams)):
            self._next(i)
        self.net.run_until_idle(timeout=600)
        records = [r for buf in self.buffers for r in buf]
        if len(records) != expected:
            raise IncompleteRun(f"{self.phase}: {len(records)} of {expected} flows resolved")
        return records


def network_for(config: BenchConfig, seed: int) -> Network:
    return start_network(
        NetworkConfig(
            seed=seed,
            mode=config.mode,
            cost=config.cost,
            latency_s=config.latency_s,
            split_enabled=config.split_enabled,
        )
    )


def run_once(config: BenchConfig, run: int, net: Network | None = None) -> RunResult:
    """One repetition: set up accounts, then drive the configured phases."""
    seed = config.seed * 1_000_003 + run
    own = net is None
    net = net or network_for(config, seed)
    try:
        rng = random.Random(seed)
        ledger = net.ledger
        sellers, buyers, lists = [], [], []
        for c in range(config.cl):
            sellers.append(ledger.create_account(Role.SELLER.value, f"seller-{run}-{c}", AccountKind.SELLER))
            buyer = ledger.create_account(Role.BUYER.value, f"buyer-{run}-{c}", AccountKind.CONSUMER)
            buyers.append(buyer)
            mine = [
                gen_shopping_list(config.vol, rng, net.rules.vat_rates, config.price_range, config.max_quantity)
                for _ in range(config.per_client)
            ]
            lists.append(mine)
            # Pre-fund exactly what this buyer will owe.
            ledger.fund(buyer, MoneyKind.CURRENT, sum(contracts.total_amount(ls, net.rules.vat_rates) for ls in mine))

        issue = _ClosedLoop(net, "Issue", [
            [FlowRequest.issue_invoice(sellers[c], buyers[c], ls) for ls in lists[c]] for c in range(config.cl)
        ])
        issue_records = issue.run(config.tx, Role.SELLER.value)
        phases = {}
        records = []
        if "Issue" in config.measured_phases:
            phases["Issue"] = compute_metrics(issue_records)
            records += issue_records
        if "Pay" in config.measured_phases:
            pay_streams = [
                [FlowRequest.pay_invoice(buyers[c], res["invoice_id"]) for res in issue.results[c] if res.ok]
                for c in range(config.cl)
            ]
            pay = _ClosedLoop(net, "Pay", pay_streams)
            pay_records = pay.run(sum(map(len, pay_streams)), Role.BUYER.value)
            # Invoices that failed to issue count as rejected payments too.
            missing = config.tx - len(pay_records)
            pay_records += [TxRecord("Pay", -1, 0.0, None, None, False, "NotIssued")] * missing
            phases["Pay"] = compute_metrics(pay_records)
            records += pay_records
        return RunResult(run, phases, records)
    finally:
        if own:
            net.close()


def run_scenario(
    config: BenchConfig,
    network: Network | Callable[[BenchConfig, int], Network] | None = None,
    progress: Callable[[RunResult], None] | None = None,
) -> MetricsReport:
    """Run ``repetitions`` measured runs (plus a discarded warm-up run if enabled).

    ``network`` may be a running network shared by every run, a factory
    ``(config, seed) -> Network`` or None for a fresh network per run.
    """
    runs = []
    total = config.repetitions + (1 if config.warmup else 0)
    for i in range(total):
        warm = config.warmup and i == 0
        run_no = 0 if warm else i + (0 if config.warmup else 1)
        if isinstance(network, Network):
            res = run_once(config, run_no, network)
        elif network is not None:
            seed = config.seed * 1_000_003 + run_no
            net = network(config, seed)
            try:
                res = run_once(config, run_no, net)
            finally:
                net.close()
        else:
            res = run_once(config, run_no)
        res.warmup = warm
        runs.append(res)
        if progress:
            progress(res)
    return MetricsReport(config, runs)


# -- export ---------------------------------------------------------------

def export_csv(report: MetricsReport | Iterable[MetricsReport], path: str | Path, append: bool = False) -> None:
    reports = [report] if isinstance(report, MetricsReport) else list(report)
    path = Path(path)
    try:
        write_header = not (append and path.exists() and path.stat().st_size > 0)
        with path.open("a" if append else "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_HEADER, lineterminator="\n")
            if write_header:
                writer.writeheader()
            for rep in reports:
                writer.writerows(rep.rows())
    except OSError as err:
        raise IoError(f"cannot write {path}: {err.strerror or err}") from err


def export_json(report: MetricsReport | Iterable[MetricsReport], path: str | Path) -> None:
    reports = [report] if isinstance(report, MetricsReport) else list(report)
    try:
        Path(path).write_text(json.dumps([r.to_json() for r in reports], indent=2) + "\n")
    except OSError as err:
        raise IoError(f"cannot write {path}: {err.strerror or err}") from err


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
