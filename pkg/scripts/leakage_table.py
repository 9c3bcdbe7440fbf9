#!/usr/bin/env python3
"""Print the exfiltration-capacity table for a page with n external links.

Usage: python scripts/leakage_table.py [n] [budget_bits]

Shows, for each request count r, how many distinct messages an attacker can
encode by choosing which r of the n links to fetch, and that count in whole
bits. With a budget, the cut-off row is marked.
"""
from __future__ import annotations

import sys

from linkfence.leakage import capacity_table, max_requests_within


def main(argv: list[str]) -> int:
    n = int(argv[1]) if len(argv) > 1 else 8
    budget = int(argv[2]) if len(argv) > 2 else None

    print(f"capacity of a page with n={n} static external links")
    print(f"{'r':>4}  {'distinct values':>18}  {'bits':>5}")
    for r, values, bits in capacity_table(n):
        marker = ""
        if budget is not None and bits > budget:
            marker = f"   <- over {budget}-bit budget"
        print(f"{r:>4}  {values:>18}  {bits:>5}{marker}")
    if budget is not None:
        print(f"\nbudget {budget} bits permits at most "
              f"{max_requests_within(n, budget)} distinct external requests")
    return 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv))
