import json
import math
import random
from types import SimpleNamespace as Rec

import pytest
from hypothesis import given
from hypothesis import strategies as st

from smartmoney import contracts
from smartmoney.errors import ConfigViolation, CorruptRecords, EmptyRecords, IoError
from smartmoney.harness import (
    CSV_HEADER,
    BenchConfig,
    InvalidVol,
    compute_metrics,
    export_csv,
    export_json,
    gen_shopping_list,
    read_csv,
    run_scenario,
)
from smartmoney.netsim import CostModel


@pytest.mark.parametrize("kw", [dict(cl=7), dict(cl=200), dict(vol=5), dict(vol=101), dict(tx=0),
                                dict(tx=10_010, cl=10), dict(tx=1005, cl=10), dict(phase="Audit"),
                                dict(repetitions=0)])
def test_config_bounds(kw):
    with pytest.raises(ConfigViolation):
        BenchConfig(**kw)


def test_config_derived():
    cfg = BenchConfig(tx=500, cl=50, phase="pay")
    assert cfg.per_client == 10 and cfg.phase == "Pay" and cfg.measured_phases == ("Pay",)
    assert BenchConfig().measured_phases == ("Issue", "Pay")


@given(st.integers(1, 100), st.integers(0, 2**32))
def test_shopping_list_shape(vol, seed):
    lines = gen_shopping_list(vol, random.Random(seed))
    assert len(lines) == vol
    assert all(ln.vat_rate == contracts.VAT_RATES[ln.item] for ln in lines)
    assert all(100 <= ln.price <= 10_000 and 1 <= ln.quantity <= 3 for ln in lines)
    assert gen_shopping_list(vol, random.Random(seed)) == lines


def test_shopping_list_goods_and_errors():
    lines = gen_shopping_list(30, random.Random(1), goods=["Books", "Energy"])
    assert {ln.item for ln in lines} <= {"Books", "Energy"}
    with pytest.raises(InvalidVol):
        gen_shopping_list(0, random.Random(1))


def test_metrics_ten_per_second():
    recs = [Rec(submitted_at=i * 0.1, notarized_at=i * 0.1 + 0.1, ok=True) for i in range(10)]
    m = compute_metrics(recs)
    assert m.throughput_tps == pytest.approx(10.0)
    assert m.latency_mean_s == pytest.approx(0.1)
    assert m.latency_p95_s == pytest.approx(0.1)
    assert m.rejected == 0 and m.successes == 10


def test_metrics_rejections_and_errors():
    recs = [Rec(submitted_at=0.0, notarized_at=1.0, ok=True), Rec(submitted_at=0.0, notarized_at=None, ok=False)]
    assert compute_metrics(recs).rejected == 1
    only_bad = compute_metrics([Rec(submitted_at=0.0, notarized_at=None, ok=False)])
    assert only_bad.throughput_tps == 0.0 and math.isnan(only_bad.latency_mean_s)
    with pytest.raises(EmptyRecords):
        compute_metrics([])
    with pytest.raises(CorruptRecords):
        compute_metrics([Rec(submitted_at=2.0, notarized_at=1.0, ok=True)])


@pytest.fixture(scope="module")
def small_report():
    cfg = BenchConfig(tx=40, vol=10, cl=10, repetitions=10, cost=CostModel.corda_like(), seed=5)
    return run_scenario(cfg)


def test_scenario_runs(small_report):
    assert len(small_report.runs) == 11 and small_report.runs[0].warmup
    assert [r.run for r in small_report.measured] == list(range(1, 11))
    assert small_report.rejected_count == 0
    for r in small_report.measured:
        assert {p: m.successes for p, m in r.phases.items()} == {"Issue": 40, "Pay": 40}
    assert small_report.throughput("Issue") > 0 and small_report.latency("Pay") > 0


def test_csv_export(small_report, tmp_path):
    path = tmp_path / "out.csv"
    export_csv(small_report, path)
    rows = read_csv(path)
    assert tuple(rows[0]) == CSV_HEADER
    issue = [r for r in rows if r["phase"] == "Issue"]
    assert len(issue) == 11 and issue[-1]["run"] == "mean"
    export_csv(small_report, path, append=True)
    text = path.read_text().splitlines()
    assert sum(line.startswith("phase,") for line in text) == 1
    assert len(read_csv(path)) == 2 * len(rows)


def test_export_to_unwritable_path(small_report, tmp_path):
    with pytest.raises(IoError):
        export_csv(small_report, tmp_path / "missing" / "out.csv")
    with pytest.raises(IoError):
        export_json(small_report, tmp_path / "missing" / "out.json")


def test_json_export(small_report, tmp_path):
    export_json(small_report, tmp_path / "r.json")
    (doc,) = json.loads((tmp_path / "r.json").read_text())
    assert doc["config"]["cl"] == 10
    assert json.loads(json.dumps(small_report.to_json())) == doc


def test_same_seed_same_numbers():
    cfg = BenchConfig(tx=20, cl=10, repetitions=2, warmup=False, cost=CostModel.corda_like())
    a, b = run_scenario(cfg), run_scenario(cfg)
    assert list(a.rows()) == list(b.rows())
