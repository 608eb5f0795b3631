"""Fixed clients, growing transaction count: throughput should stay flat."""
import argparse

from smartmoney.harness import BenchConfig, export_csv, run_scenario

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--cl", type=int, default=10)
ap.add_argument("--reps", type=int, default=3)
ap.add_argument("--mode", choices=("deterministic", "concurrent"), default="deterministic")
ap.add_argument("--out", default="sweep_load.csv")
args = ap.parse_args()

reports = []
for tx in (100, 500, 1000, 2000, 5000):
    rep = run_scenario(BenchConfig(tx=tx, cl=args.cl, repetitions=args.reps, mode=args.mode))
    print(rep.summary(), flush=True)
    reports.append(rep)
export_csv(reports, args.out)
