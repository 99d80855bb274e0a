"""Sweep one TEAM memristor with a sine at several frequencies and report the loop areas.

The loop stays pinched at the origin and shrinks as the drive gets faster.
Writes one v,i CSV per frequency.
"""
import argparse
import os

import numpy as np

from memos.devices import FIG3_TEAM, Polarity
from memos.measure import loop_area
from memos.netlist import GROUND, Memristor, SourceSpec
from memos.solver import SolverConfig, iv_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--amp", type=float, default=1.0)
    ap.add_argument("--freq", type=float, default=1e6)
    ap.add_argument("--mult", default="1,5,10")
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--outdir", default="out/iv")
    args = ap.parse_args()

    os.makedirs(args.outdir, exist_ok=True)
    dev = Memristor("MR1", "p", GROUND, FIG3_TEAM, Polarity.FORWARD, FIG3_TEAM.x_off)
    base = None
    for m in (float(s) for s in args.mult.split(",")):
        f = args.freq * m
        cfg = SolverConfig(dt=1 / (f * args.samples), t_stop=1 / f)
        v, i = iv_sweep(dev, SourceSpec.sine(args.amp, f), cfg)
        area = loop_area(v, i)
        base = base or area
        path = os.path.join(args.outdir, f"team_x{m:g}.csv")
        np.savetxt(path, np.column_stack([v, i]), delimiter=",", header="v,i", comments="")
        print(f"x{m:<4g} f={f:9.3g} Hz  area={area:.4e} V*A  ({area / base:.3f} of x1)")


if __name__ == "__main__":
    main()
