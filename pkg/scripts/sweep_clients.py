"""Latency versus concurrent clients (tx = per_client * cl), with a linear fit."""
import argparse

import numpy as np

from smartmoney.harness import BenchConfig, export_csv, run_scenario

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--per-client", type=int, default=100)
ap.add_argument("--reps", type=int, default=3)
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--out", default="sweep_clients.csv")
args = ap.parse_args()

cls = list(range(10, 101, 10))
reports = []
for cl in cls:
    rep = run_scenario(BenchConfig(tx=args.per_client * cl, cl=cl, repetitions=args.reps, seed=args.seed))
    print(rep.summary(), flush=True)
    reports.append(rep)
export_csv(reports, args.out)

for phase in ("Issue", "Pay"):
    lat = np.array([r.latency(phase) for r in reports])
    slope, icept = np.polyfit(cls, lat, 1)
    r2 = np.corrcoef(cls, lat)[0, 1] ** 2
    print(f"{phase:<5} latency = {slope * 1000:.2f} ms/client * cl + {icept * 1000:.1f} ms  (R^2 {r2:.4f})")
