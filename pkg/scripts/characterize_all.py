"""Characterize every cell in both families and print the side-by-side table.

    python3 scripts/characterize_all.py --out out/report.json
"""
import argparse
import os
import time

from memos.measure import characterize, format_table, reports_to_json
from memos.stdcells import FAMILIES, TABLE_CELLS


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", default=",".join(TABLE_CELLS))
    ap.add_argument("--out", default="out/report.json")
    args = ap.parse_args()

    reports = []
    for name in args.cells.split(","):
        for family in FAMILIES:
            t0 = time.perf_counter()
            reports.append(characterize(name, family))
            print(f"{name:>14} {family:<6} {time.perf_counter() - t0:6.1f} s")
    print()
    print(format_table(reports), end="")

    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(args.out, "w") as fh:
        fh.write(reports_to_json(reports))
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
