"""Acceptance criteria, one test each; the terminal summary prints a pass/fail line per criterion."""
import json
import math
import time

import numpy as np
import pytest

from memos.cli import main
from memos.devices import FIG3_TEAM, LinearDriftParams, Polarity, fit_team_from_lid, lid_to_team_state
from memos.measure import (
    LogicThresholds,
    cell_settle,
    check_rows,
    fall_time,
    loop_area,
    prop_delay,
    rise_time,
    ripple_vectors,
    truth_table,
)
from memos.netlist import GROUND, Circuit, Memristor, Resistor, SourceSpec, VSource, drive
from memos.solver import SolverConfig, Waveform, iv_sweep, transient
from memos.stdcells import CellKind, area_ratio, build_cell, count_devices, parse_cell, reference_function

from oracles import FIG3, rc_charge, series_memristor_ode

VCC = 1.8


def _rel_rms(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.sqrt(np.mean(((a - b) / b) ** 2)))


# 1 ---------------------------------------------------------------------------

def test_truth_tables(criterion):
    cells = ["AND", "OR", "NAND", "NOR", "XOR", "XNOR", "NOT", "BUF", "HALF_ADDER", "FULL_ADDER",
             "RIPPLE_ADDER"]
    th = LogicThresholds.for_vcc(VCC)
    start = time.perf_counter()
    failed = []
    for name in cells:
        kind, _ = parse_cell(name)
        c = build_cell(kind, output_buffers=True)
        vectors = ripple_vectors(8) if kind is CellKind.RIPPLE_ADDER else None
        rows = truth_table(c, th=th, settle=cell_settle(kind, 8), vectors=vectors)
        if check_rows(rows, reference_function(kind, 8)):
            failed.append(name)
    elapsed = time.perf_counter() - start
    ok = not failed and elapsed < 60.0
    criterion(1, ok, f"{len(cells) - len(failed)}/{len(cells)} cells correct in {elapsed:.1f} s"
              + (f"; failing {failed}" if failed else ""))
    assert ok


# 2 ---------------------------------------------------------------------------

def test_divider_levels(criterion):
    cfg = SolverConfig(dt=10e-12, t_stop=20e-9)
    y_and = transient(drive(build_cell("AND"), {"A": VCC, "B": 0.0}), cfg).waveform("Y").values[-1]
    y_or = transient(drive(build_cell("OR"), {"A": VCC, "B": 0.0}), cfg).waveform("Y").values[-1]
    ok = abs(y_and) <= 2.0e-3 and y_or >= 0.99 * VCC
    criterion(2, ok, f"AND Y = {y_and * 1e3:.3f} mV, OR Y = {y_or:.4f} V after 20 ns")
    assert ok


# 3 ---------------------------------------------------------------------------

TABLE_COUNTS = {
    "NOT": (2, 0), "AND": (0, 2), "OR": (0, 2), "NAND": (2, 2), "NOR": (2, 2), "XOR": (4, 6),
    "XNOR": (4, 6), "BUF": (4, 0),
}
ADDER_COUNTS = {"HALF_ADDER": (8, 8, 5), "FULL_ADDER": (16, 18, 10), "RIPPLE_ADDER": (128, 144, 80)}
CMOS_COUNTS = {"NOT": 2, "AND": 6, "OR": 6, "NAND": 4, "NOR": 4, "XOR": 12, "XNOR": 12, "BUF": 4,
               "HALF_ADDER": 14, "FULL_ADDER": 34, "RIPPLE_ADDER": 272}


def test_device_counts(criterion):
    wrong = []
    for name, want in TABLE_COUNTS.items():
        n = count_devices(build_cell(name))
        if (n.mosfets, n.memristors) != want:
            wrong.append(f"{name} {n.mosfets}/{n.memristors}")
    for name, want in ADDER_COUNTS.items():
        n = count_devices(build_cell(name))
        if (n.mosfets, n.memristors, n.vias) != want:
            wrong.append(f"{name} {n.mosfets}/{n.memristors}/{n.vias}")
    for name, want in CMOS_COUNTS.items():
        if count_devices(build_cell(name, "cmos")).mosfets != want:
            wrong.append(f"{name} cmos")
    total = len(TABLE_COUNTS) + len(ADDER_COUNTS) + len(CMOS_COUNTS)
    criterion(3, not wrong, f"{total - len(wrong)}/{total} count rows match" +
              (f"; mismatches {wrong}" if wrong else ""))
    assert not wrong


# 4 ---------------------------------------------------------------------------

def test_area_ratios(criterion):
    fa = area_ratio(count_devices(build_cell("FULL_ADDER")), count_devices(build_cell("FULL_ADDER", "cmos")))
    ha = area_ratio(count_devices(build_cell("HALF_ADDER")), count_devices(build_cell("HALF_ADDER", "cmos")))
    ok = abs(fa - 47.0) <= 0.5 and abs(ha - 57.2) <= 0.5
    criterion(4, ok, f"full adder {fa:.2f} % (vs 47 %), half adder {ha:.2f} % (vs 57.2 %)")
    assert ok


# 5 ---------------------------------------------------------------------------

def _zero_crossing_currents(v, i):
    """Current interpolated at every sign change of v, including exact zeros."""
    out = [abs(i[k]) for k in np.nonzero(v == 0.0)[0]]
    s = np.sign(v)
    for k in np.nonzero(s[:-1] * s[1:] < 0)[0]:
        f = v[k] / (v[k] - v[k + 1])
        out.append(abs(i[k] + f * (i[k + 1] - i[k])))
    return out


def test_pinched_hysteresis(criterion):
    dev = Memristor("MR1", "p", GROUND, FIG3_TEAM, Polarity.FORWARD, FIG3_TEAM.x_off)
    f0, samples = 1e6, 2000
    areas, worst = [], 0.0
    for m in (1, 10):
        f = f0 * m
        v, i = iv_sweep(dev, SourceSpec.sine(1.0, f), SolverConfig(dt=1 / (f * samples), t_stop=1 / f))
        full = float(np.max(np.abs(i)))
        worst = max(worst, max(_zero_crossing_currents(v, i)) / full)
        areas.append(loop_area(v, i))
    ratio = areas[1] / areas[0]
    ok = worst <= 0.01 and ratio < 0.5 and areas[0] > 0
    criterion(5, ok, f"max |i| at v=0 is {worst:.2e} of full scale; area(10w0)/area(w0) = {ratio:.3f}")
    assert ok


# 6 ---------------------------------------------------------------------------

def _single_device_run(params, x0, drive_spec, t_stop, dt):
    c = Circuit((VSource("V1", "p", GROUND, drive_spec),
                 Memristor("MR1", "p", GROUND, params, Polarity.FORWARD, x0)))
    r = transient(c, SolverConfig(dt=dt, t_stop=t_stop))
    return r.times, r.resistance("MR1").values


def test_oracle_equivalence(criterion):
    pulse = SourceSpec.pulse(0.0, 1.0, 0.1e-9, 1e-12, 1e-12, 1e-9, 10e-9)
    fit_errors, moved = [], []
    # default mobility barely moves in a nanosecond; the fast one sweeps most of the range
    for mu in (LinearDriftParams().mu_v, 5e-6):
        lid = LinearDriftParams(mu_v=mu)
        w0 = lid.d / 2
        _, r_lid = _single_device_run(lid, w0, pulse, 1.5e-9, 1e-12)
        _, r_fit = _single_device_run(fit_team_from_lid(lid), lid_to_team_state(lid, w0), pulse, 1.5e-9, 1e-12)
        fit_errors.append(_rel_rms(r_fit, r_lid))
        moved.append(abs(r_lid[-1] - r_lid[0]) / r_lid[0])

    # closed form for the linear drift device under a constant 1 V
    lid = LinearDriftParams(mu_v=5e-6)
    t, r_lid = _single_device_run(lid, lid.d / 2, SourceSpec.dc(1.0), 1e-9, 1e-12)
    k = lid.mu_v * lid.r_on / lid.d ** 2
    closed = np.sqrt(r_lid[0] ** 2 + 2 * (lid.r_off - lid.r_on) * k * 1.0 * t)
    closed_err = _rel_rms(r_lid, closed)

    ode_errors = []
    for v_src, t_stop in ((-1.8, 10e-9), (-1.0, 500e-9)):
        n = 100
        c = Circuit((VSource("V1", "s", GROUND, SourceSpec.dc(v_src)), Resistor("R1", "s", "m", 1e3),
                     Memristor("MR1", "m", GROUND, FIG3_TEAM, Polarity.FORWARD, FIG3_TEAM.x_off)))
        r = transient(c, SolverConfig(dt=t_stop / n, t_stop=t_stop, state_integration="trapezoidal"))
        _, ref = series_memristor_ode(v_src, 1e3, FIG3["x_off"], t_stop, 100 * n, FIG3)
        ode_errors.append(_rel_rms(r.resistance("MR1").values, np.asarray(ref[::100])))

    ok = max(fit_errors) <= 0.05 and max(ode_errors) <= 0.005 and closed_err <= 0.005 and moved[1] > 0.5
    criterion(6, ok, f"fit vs LID {max(fit_errors):.1e} RMS (fast case moves R by {moved[1]:.0%}); "
              f"LID vs closed form {closed_err:.1e}; transient vs dt/100 ODE {max(ode_errors):.1e} RMS")
    assert ok


# 7 ---------------------------------------------------------------------------

def test_measurement_calibration(criterion):
    errs = []
    for tau in (1e-12, 1e-9, 1e-6):
        t = np.linspace(0.0, 12 * tau, 20001)
        rise = Waveform(t, rc_charge(t, tau))
        fall = Waveform(t, rc_charge(t, tau, 1.0, 0.0))
        want = tau * math.log(9.0)
        errs += [abs(rise_time(rise) - want) / want, abs(fall_time(fall) - want) / want]
    t = np.linspace(0.0, 20e-9, 4001)
    dt = t[1] - t[0]
    v = np.where(t < 2e-9, 0.0, 1 - np.exp(-(t - 2e-9) / 1e-9))
    shift_errs = []
    for k in (0, 1, 7, 123, 400):
        shifted = np.concatenate([np.zeros(k), v[: len(v) - k]])
        shift_errs.append(abs(prop_delay(Waveform(t, v), Waveform(t, shifted)) - k * dt) / dt)
    ok = max(errs) <= 0.01 and max(shift_errs) <= 1.0
    criterion(7, ok, f"worst rise/fall error {max(errs):.1e}; worst delay error {max(shift_errs):.2f} dt")
    assert ok


# 8, 9 ------------------------------------------------------------------------

@pytest.fixture(scope="module")
def characterize_twice(tmp_path_factory):
    d = tmp_path_factory.mktemp("char")
    codes, blobs = [], []
    for run in ("a", "b"):
        out = d / run / "report.json"
        codes.append(main(["characterize", "--cells", "all", "--family", "both", "--out", str(out)]))
        blobs.append(out.read_bytes())
    return codes, blobs


def test_timing_ordering(criterion, characterize_twice):
    _, blobs = characterize_twice
    rows = {(r["cell"], r["family"]): r for r in json.loads(blobs[0])}
    faster = {g: rows[(g, "memos")]["delay"] < rows[(g, "cmos")]["delay"] for g in ("AND", "OR")}
    keys = ("rise_time", "fall_time", "delay", "avg_power")
    same_not = all(rows[("NOT", "memos")][k] == rows[("NOT", "cmos")][k] for k in keys)
    ok = all(faster.values()) and same_not
    detail = ", ".join(f"{g} {rows[(g, 'memos')]['delay'] * 1e12:.3g} ps vs {rows[(g, 'cmos')]['delay'] * 1e12:.3g} ps"
                       for g in ("AND", "OR"))
    criterion(8, ok, f"{detail}; NOT rows identical: {same_not}")
    assert ok


def test_characterize_is_deterministic(criterion, characterize_twice):
    codes, blobs = characterize_twice
    ok = blobs[0] == blobs[1] and codes == [0, 0]
    n = len(json.loads(blobs[0]))
    criterion(9, ok, f"{n} reports, {len(blobs[0])} bytes, identical: {blobs[0] == blobs[1]}, exit codes {codes}")
    assert ok
