"""Digital metrics from simulated waveforms, plus the cell characterization harness."""
from __future__ import annotations

import itertools
import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .netlist import Circuit, SourceSpec, drive
from .solver import SolverConfig, Waveform, transient
from .stdcells import (CellKind, CellParams, DeviceCount, build_cell, cell_ports, count_devices,
                       parse_cell, reference_function)

X = "X"  # undefined logic level

TRUTH_DT = 10e-12
TIMING_DT = 1e-12
DEFAULT_SETTLE = 1e-9
RIPPLE_SETTLE_PER_BIT = 0.25e-9  # carry chain needs longer than one gate
RIPPLE_RANDOM_VECTORS = 16


class NoEdgeError(ValueError):
    """The waveform has no transition of the requested kind."""


@dataclass(frozen=True)
class LogicThresholds:
    v_high_min: float = 0.9 * 1.8
    v_low_max: float = 0.1 * 1.8

    def __post_init__(self):
        if not self.v_low_max < self.v_high_min:
            raise ValueError("v_low_max must be below v_high_min")

    @classmethod
    def for_vcc(cls, vcc: float, low_frac: float = 0.1, high_frac: float = 0.9) -> "LogicThresholds":
        return cls(high_frac * vcc, low_frac * vcc)


# -- edges -------------------------------------------------------------------

def _levels(w: Waveform, lo_frac: float, hi_frac: float):
    v = w.values
    if v.size < 2:
        raise NoEdgeError("waveform has fewer than two samples")
    vmin, vmax = float(v.min()), float(v.max())
    swing = vmax - vmin
    if not swing > 1e-12 * max(1.0, abs(vmax)):
        raise NoEdgeError("waveform is constant")
    return vmin + lo_frac * swing, vmin + hi_frac * swing


def _crossings(t, v, level, rising: bool):
    """Interpolated times where ``v`` crosses ``level`` in one direction."""
    above = v >= level
    if rising:
        idx = np.nonzero(~above[:-1] & above[1:])[0]
    else:
        idx = np.nonzero(above[:-1] & ~above[1:])[0]
    v0, v1 = v[idx], v[idx + 1]
    frac = (level - v0) / (v1 - v0)
    return t[idx] + frac * (t[idx + 1] - t[idx])


def _transition_time(w: Waveform, start_frac, end_frac, rising):
    lo, hi = _levels(w, min(start_frac, end_frac), max(start_frac, end_frac))
    first, second = (lo, hi) if rising else (hi, lo)
    ends = _crossings(w.times, w.values, second, rising)
    if not ends.size:
        raise NoEdgeError("no rising edge" if rising else "no falling edge")
    t_end = ends[0]
    starts = _crossings(w.times, w.values, first, rising)
    starts = starts[starts <= t_end]
    # a waveform that starts past the first level has no crossing to measure from
    t_start = starts[-1] if starts.size else w.times[0]
    return float(t_end - t_start)


def rise_time(w: Waveform, lo_frac: float = 0.1, hi_frac: float = 0.9) -> float:
    """10-90 % rise time of the first rising edge, levels relative to the waveform's own swing."""
    return _transition_time(w, lo_frac, hi_frac, rising=True)


def fall_time(w: Waveform, hi_frac: float = 0.9, lo_frac: float = 0.1) -> float:
    return _transition_time(w, hi_frac, lo_frac, rising=False)


def _first_crossing(w: Waveform, frac: float, after: float = -np.inf):
    level = _levels(w, frac, frac)[0]
    hits = []
    for rising in (True, False):
        t = _crossings(w.times, w.values, level, rising)
        t = t[t >= after]
        if t.size:
            hits.append((t[0], rising))
    if not hits:
        raise NoEdgeError(f"{w.label or 'waveform'} never crosses its {frac:.0%} level")
    return min(hits)


def prop_delay(inp: Waveform, out: Waveform, frac: float = 0.5) -> float:
    """Output's first mid-swing crossing minus the input's, for the input's first edge."""
    t_in, _ = _first_crossing(inp, frac)
    # tolerate interpolation noise when the output tracks the input exactly
    t_out, _ = _first_crossing(out, frac, after=t_in - 1e-6 * max(inp.dt, 1e-30))
    return float(max(t_out - t_in, 0.0))


def avg_power(supply_v: Waveform, supply_i: Waveform, window=None) -> float:
    """Mean of v*i over ``window`` (t0, t1), or over the whole record."""
    if supply_v.times.shape != supply_i.times.shape or not np.allclose(supply_v.times, supply_i.times):
        raise ValueError("voltage and current are on different time grids")
    t = supply_v.times
    p = supply_v.values * supply_i.values
    if window is not None:
        t0, t1 = window
        keep = (t >= t0) & (t <= t1)
        t, p = t[keep], p[keep]
    if t.size == 0:
        raise ValueError("empty power window")
    if t.size == 1:
        return float(p[0])
    return float(np.trapezoid(p, t) / (t[-1] - t[0]))


def read_logic(w: Waveform, t: float, th: LogicThresholds | None = None):
    th = th or LogicThresholds()
    if not w.times[0] - 1e-18 <= t <= w.times[-1] + 1e-18:
        raise ValueError(f"t={t:g}s is outside the waveform")
    v = w.values[int(np.argmin(np.abs(w.times - t)))]
    if v >= th.v_high_min:
        return 1
    if v <= th.v_low_max:
        return 0
    return X


def loop_area(v, i) -> float:
    """Absolute shoelace area of the closed I-V trajectory."""
    v = np.asarray(v, dtype=float)
    i = np.asarray(i, dtype=float)
    if v.shape != i.shape:
        raise ValueError("v and i differ in length")
    if v.size < 3:
        return 0.0
    return float(abs(np.dot(v, np.roll(i, -1)) - np.dot(i, np.roll(v, -1))) / 2.0)


def rms(a, b=None) -> float:
    a = np.asarray(a, dtype=float)
    d = a if b is None else a - np.asarray(b, dtype=float)
    return float(np.sqrt(np.mean(d * d)))


# -- truth tables ------------------------------------------------------------

@dataclass
class TruthRow:
    inputs: dict
    outputs: dict  # port -> 0 | 1 | X
    volts: dict

    @property
    def flagged(self) -> bool:
        return any(v == X for v in self.outputs.values())


def exhaustive_vectors(inputs) -> list:
    if len(inputs) > 12:
        raise ValueError(f"{len(inputs)} inputs is too many to enumerate; pass vectors")
    return [dict(zip(inputs, bits)) for bits in itertools.product((0, 1), repeat=len(inputs))]


def ripple_vectors(bits: int, n_random: int = RIPPLE_RANDOM_VECTORS, seed: int = 0) -> list:
    """All-zeros, all-ones, then random operand pairs with a random carry in."""
    rng = random.Random(seed)
    top = (1 << bits) - 1
    ops = [(0, 0, 0), (top, top, 1)]
    ops += [(rng.randrange(top + 1), rng.randrange(top + 1), rng.randrange(2)) for _ in range(n_random)]
    vecs = []
    for a, b, cin in ops:
        v = {f"A{k}": (a >> k) & 1 for k in range(bits)}
        v.update({f"B{k}": (b >> k) & 1 for k in range(bits)})
        v["Cin"] = cin
        vecs.append(v)
    return vecs


def _run_vector(args):
    c, vec, outputs, th, settle, dt, states = args
    cfg = SolverConfig(dt=dt, t_stop=settle)
    r = transient(drive(c, {k: c.vcc[1] * b for k, b in vec.items()}), cfg, states=states)
    volts = {o: float(r.waveform(o).values[-1]) for o in outputs}
    logic = {o: read_logic(r.waveform(o), r.times[-1], th) for o in outputs}
    return TruthRow(dict(vec), logic, volts), r.final_states


def truth_table(c: Circuit, inputs=None, outputs=None, th: LogicThresholds | None = None,
                settle: float = DEFAULT_SETTLE, vectors=None, mode: str = "reset",
                dt: float = TRUTH_DT, jobs: int = 1) -> list:
    """Drive each input vector at DC levels, simulate ``settle`` seconds, classify the outputs.

    In "reset" mode every vector starts from the netlist's initial memristor
    states, so rows do not depend on order and may run in parallel. "carry"
    mode hands each vector the final states of the previous one.
    """
    if mode not in ("reset", "carry"):
        raise ValueError(f"unknown mode {mode!r}")
    ins, outs = cell_ports(c)
    inputs = list(inputs or ins)
    outputs = list(outputs or outs)
    for name in inputs + outputs:
        c.port(name)
    th = th or LogicThresholds.for_vcc(c.vcc[1])
    vectors = vectors if vectors is not None else exhaustive_vectors(inputs)

    if mode == "carry":
        rows, states = [], None
        for vec in vectors:
            row, states = _run_vector((c, vec, outputs, th, settle, dt, states))
            rows.append(row)
        return rows
    work = [(c, vec, outputs, th, settle, dt, None) for vec in vectors]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return [row for row, _ in pool.map(_run_vector, work)]
    return [_run_vector(w)[0] for w in work]


def check_rows(rows, reference) -> list:
    """Rows whose outputs disagree with ``reference`` (input dict -> output dict)."""
    bad = []
    for row in rows:
        want = reference(row.inputs)
        if any(row.outputs[k] != v for k, v in want.items() if k in row.outputs):
            bad.append(row)
    return bad


# -- characterization --------------------------------------------------------

@dataclass
class GateReport:
    cell: str
    family: str
    rise_time: float
    fall_time: float
    delay: float
    avg_power: float
    counts: DeviceCount
    truth_table_pass: bool
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["counts"] = asdict(self.counts)
        return d


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"


def format_table(reports) -> str:
    """Aligned plain-text table, one row per report."""
    head = ("Cell", "Family", "Rise (ps)", "Fall (ps)", "Delay (ps)", "Avg power (uW)",
            "MOSFETs", "Memristors", "Vias", "Truth")
    rows = [head]
    for r in reports:
        rows.append((r.cell, r.family, f"{r.rise_time * 1e12:.2f}", f"{r.fall_time * 1e12:.2f}",
                     f"{r.delay * 1e12:.2f}", f"{r.avg_power * 1e6:.2f}", str(r.counts.mosfets),
                     str(r.counts.memristors), str(r.counts.vias),
                     "pass" if r.truth_table_pass else "FAIL"))
    widths = [max(len(row[k]) for row in rows) for k in range(len(head))]
    lines = ["  ".join(cell.ljust(w) if k < 2 else cell.rjust(w)
                       for k, (cell, w) in enumerate(zip(row, widths))) for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class CharacterizeConfig:
    thresholds: LogicThresholds | None = None
    settle: float = DEFAULT_SETTLE
    truth_dt: float = TRUTH_DT
    timing_dt: float = TIMING_DT
    edge_time: float = 10e-12  # stimulus rise and fall
    edge_delay: float = 100e-12  # input stays low this long before the first edge
    pulse_width: float = 500e-12
    ripple_vectors: int = RIPPLE_RANDOM_VECTORS
    seed: int = 0


def cell_settle(kind: CellKind, bits: int, base: float = DEFAULT_SETTLE) -> float:
    if kind is CellKind.RIPPLE_ADDER:
        return base + bits * RIPPLE_SETTLE_PER_BIT
    return base


def _edge_experiments(kind: CellKind, inputs, bits):
    """(toggled input, held levels) pairs whose toggling moves some output.

    The ripple adder uses its longest path only: Cin toggled with A all ones
    and B all zeros, so the carry ripples through every bit.
    """
    if kind is CellKind.RIPPLE_ADDER:
        held = {f"A{k}": 1 for k in range(bits)} | {f"B{k}": 0 for k in range(bits)}
        return [("Cin", held)]
    ref = reference_function(kind, bits)
    out = []
    for name in inputs:
        others = [n for n in inputs if n != name]
        for bits_ in itertools.product((0, 1), repeat=len(others)):
            held = dict(zip(others, bits_))
            if ref(held | {name: 0}) != ref(held | {name: 1}):
                out.append((name, held))
    return out


def _measure_edges(c: Circuit, name, held, cfg: CharacterizeConfig, t_stop, outputs):
    vcc = c.vcc[1]
    pulse = SourceSpec.pulse(0.0, vcc, cfg.edge_delay, cfg.edge_time, cfg.edge_time,
                             cfg.pulse_width, 2 * (cfg.pulse_width + cfg.edge_time) + t_stop)
    levels = {k: vcc * b for k, b in held.items()} | {name: pulse}
    sim_cfg = SolverConfig(dt=cfg.timing_dt, t_stop=t_stop)
    r = transient(drive(c, levels), sim_cfg)
    t_fall_in = cfg.edge_delay + cfg.edge_time + cfg.pulse_width
    split = t_fall_in - 0.5 * cfg.edge_time  # first half holds the rising input edge
    inp = r.waveform(name)
    rises, falls, delays = [], [], []
    for o in outputs:
        w = r.waveform(o)
        for lo, hi in ((0.0, split), (split, t_stop)):
            keep = (w.times >= lo) & (w.times <= hi)
            wo = Waveform(w.times[keep], w.values[keep], o)
            wi = Waveform(inp.times[keep], inp.values[keep], name)
            if np.ptp(wo.values) < 0.5 * vcc:
                continue  # this output does not switch on this edge
            rising = wo.values[-1] > wo.values[0]
            try:
                (rises if rising else falls).append(rise_time(wo) if rising else fall_time(wo))
                delays.append(prop_delay(wi, wo))
            except NoEdgeError:
                continue
    power = float(np.mean(r.total_source_power()))
    return rises, falls, delays, power


def characterize(kind, family: str = "memos", params: CellParams | None = None,
                 cfg: CharacterizeConfig | None = None) -> GateReport:
    """Truth table, device counts, and worst-case timing and power for one cell.

    Timing comes from pulsing one input at a time with the others held where
    that input controls an output; the report keeps the slowest edge and the
    highest average power among those runs. Power is everything delivered by
    the supply rail and the input sources.
    """
    cfg = cfg or CharacterizeConfig()
    p = params or CellParams()
    if isinstance(kind, str):
        kind, bits = parse_cell(kind)
        if bits is not None:
            p = replace(p, bits=bits)
    bits = p.bits
    label = kind.value + (f"({bits})" if kind is CellKind.RIPPLE_ADDER else "")

    counts = count_devices(build_cell(kind, family, p))
    c = build_cell(kind, family, p, output_buffers=True)
    th = cfg.thresholds or LogicThresholds.for_vcc(p.vcc)
    inputs, outputs = cell_ports(c)
    settle = cell_settle(kind, bits, cfg.settle)
    vectors = (ripple_vectors(bits, cfg.ripple_vectors, cfg.seed)
               if kind is CellKind.RIPPLE_ADDER else None)
    rows = truth_table(c, th=th, settle=settle, vectors=vectors, dt=cfg.truth_dt)
    bad = check_rows(rows, reference_function(kind, bits))

    edge_stop = 2 * (cfg.edge_delay + cfg.edge_time + cfg.pulse_width)
    if kind is CellKind.RIPPLE_ADDER:
        edge_stop = max(edge_stop, cfg.edge_delay + 2 * (cfg.edge_time + settle))
        cfg = replace(cfg, pulse_width=settle)
    rises, falls, delays, powers = [], [], [], []
    for name, held in _edge_experiments(kind, inputs, bits):
        r, f, d, pw = _measure_edges(c, name, held, cfg, edge_stop, outputs)
        rises += r
        falls += f
        delays += d
        powers.append(pw)
    return GateReport(
        cell=label, family=family,
        rise_time=max(rises, default=0.0), fall_time=max(falls, default=0.0),
        delay=max(delays, default=0.0), avg_power=max(powers, default=0.0),
        counts=counts, truth_table_pass=not bad,
        failures=[{"inputs": row.inputs, "outputs": row.outputs} for row in bad],
    )
