"""Verify the hybrid ripple-carry adder on seeded random operands.

    python3 scripts/ripple_check.py --bits 8 --vectors 16 --seeds 0,1,2
"""
import argparse
import time

from memos.measure import cell_settle, check_rows, ripple_vectors, truth_table
from memos.stdcells import CellKind, build_cell, reference_function


def operands(vec, bits):
    a = sum(vec[f"A{k}"] << k for k in range(bits))
    b = sum(vec[f"B{k}"] << k for k in range(bits))
    return a, b, vec["Cin"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bits", type=int, default=8)
    ap.add_argument("--vectors", type=int, default=16)
    ap.add_argument("--seeds", default="0")
    ap.add_argument("--family", default="memos", choices=("memos", "cmos"))
    args = ap.parse_args()

    c = build_cell(f"RIPPLE_ADDER({args.bits})", args.family, output_buffers=True)
    ref = reference_function(CellKind.RIPPLE_ADDER, args.bits)
    settle = cell_settle(CellKind.RIPPLE_ADDER, args.bits)
    total_bad = 0
    for seed in (int(s) for s in args.seeds.split(",")):
        t0 = time.perf_counter()
        rows = truth_table(c, settle=settle, vectors=ripple_vectors(args.bits, args.vectors, seed))
        bad = check_rows(rows, ref)
        total_bad += len(bad)
        print(f"seed {seed}: {len(rows) - len(bad)}/{len(rows)} sums correct "
              f"({time.perf_counter() - t0:.1f} s, settle {settle * 1e9:.2f} ns)")
        for row in bad:
            a, b, cin = operands(row.inputs, args.bits)
            print(f"   {a} + {b} + {cin}: got {row.outputs}")
    raise SystemExit(1 if total_bad else 0)


if __name__ == "__main__":
    main()
