"""Run the thirteen assertion tests and print the table."""
import argparse
import sys

from smartmoney.contracts import ContractRules
from smartmoney.feasibility import run_feasibility

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--vat-table")
ap.add_argument("--allowed-goods")
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()

rules = ContractRules.from_files(args.vat_table, args.allowed_goods) if (args.vat_table or args.allowed_goods) else None
report = run_feasibility(rules, seed=args.seed)
print(report.render(verbose=True))
sys.exit(0 if report.ok else 1)
