"""Throughput and latency versus items per invoice, split on and off."""
import argparse

from smartmoney.harness import BenchConfig, export_csv, run_scenario

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--tx", type=int, default=1000)
ap.add_argument("--cl", type=int, default=10)
ap.add_argument("--reps", type=int, default=10)
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--out", default="sweep_vol.csv")
args = ap.parse_args()

reports = []
for split in (True, False):
    for vol in (10, 50, 100):
        rep = run_scenario(BenchConfig(tx=args.tx, vol=vol, cl=args.cl, split_enabled=split,
                                       repetitions=args.reps, seed=args.seed))
        print(rep.summary(), flush=True)
        reports.append(rep)
export_csv(reports, args.out)

for phase in ("Issue", "Pay"):
    for split in (True, False):
        tps = [r.throughput(phase) for r in reports if r.config.split_enabled is split]
        spread = (max(tps) - min(tps)) / max(tps)
        print(f"{phase:<5} split={'on ' if split else 'off'} spread across vol: {spread:.1%}")
    on = sum(r.throughput(phase) for r in reports if not r.config.split_enabled)
    off = sum(r.throughput(phase) for r in reports if r.config.split_enabled)
    print(f"{phase:<5} non-split / split throughput ratio: {on / off:.2f}")
