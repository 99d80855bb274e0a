"""DC and transient analysis by modified nodal analysis.

Memristors are stamped as linear conductances at their current state, MOSFETs
are linearized per Newton iteration and their intrinsic capacitances use a
backward-Euler companion model. Memristor states advance after the node
voltages have converged (loose coupling) and are clamped to the model's state
interval. A time step is split into shorter internal steps while any
memristor would otherwise move by more than ``max_state_step`` of its range,
so fast switching events resolve in the right order; waveforms are still
recorded on the uniform ``dt`` grid.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .devices import memristor_rate, memristor_resistance
from .netlist import (
    GROUND,
    Circuit,
    Memristor,
    Mosfet,
    Resistor,
    SourceSpec,
    VSource,
)

VCC_SOURCE = "Vvcc"
_V_STEP_LIMIT = 0.5  # max per-iteration change of any node voltage in Newton


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 0.1e-12
    t_stop: float = 1e-9
    newton_tol: float = 1e-6
    newton_max_iter: int = 50
    state_integration: str = "backward-euler"
    gmin: float = 1e-12
    # largest memristor state change per internal step, as a fraction of the
    # state range; None disables sub-stepping
    max_state_step: float | None = 0.02

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_stop < self.dt:
            raise ValueError("t_stop must be >= dt")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be >= 1")
        if self.state_integration not in ("backward-euler", "trapezoidal"):
            raise ValueError(f"unknown state integration {self.state_integration!r}")
        if self.max_state_step is not None and not 0 < self.max_state_step <= 1:
            raise ValueError("max_state_step must be in (0, 1]")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_stop / self.dt))


class SolverDivergence(RuntimeError):
    """Newton failed to converge; ``partial`` holds the result up to the last good step."""

    def __init__(self, message, time=0.0, worst_node=None, partial=None):
        super().__init__(message)
        self.time = time
        self.worst_node = worst_node
        self.partial = partial


@dataclass
class Waveform:
    times: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values differ in length")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    def at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))


@dataclass
class SimResult:
    times: np.ndarray
    node_names: tuple
    voltages: np.ndarray  # (steps, nodes), ground included as column 0
    source_names: tuple
    source_currents: np.ndarray  # (steps, sources): current out of the + terminal
    memristor_names: tuple
    states: np.ndarray  # (steps, memristors)
    resistances: np.ndarray  # (steps, memristors), resistance of the recorded state
    ports: dict = field(default_factory=dict)
    _source_v: np.ndarray = field(default=None, repr=False)
    # resistance each device had while that step's voltages were solved
    solve_resistances: np.ndarray = field(default=None, repr=False)

    @property
    def final_states(self) -> dict:
        if not len(self.times):
            return {}
        return dict(zip(self.memristor_names, self.states[-1].tolist()))

    def _node_col(self, name: str) -> int:
        node = self.ports.get(name, name)
        try:
            return self.node_names.index(node)
        except ValueError:
            raise KeyError(name) from None

    def waveform(self, name: str) -> Waveform:
        """Voltage of a port or node, or ``I(<source>)`` for a source current."""
        if name.startswith("I(") and name.endswith(")"):
            src = name[2:-1]
            col = self.source_names.index(src)
            return Waveform(self.times, self.source_currents[:, col], name)
        return Waveform(self.times, self.voltages[:, self._node_col(name)], name)

    def state(self, memristor: str) -> Waveform:
        col = self.memristor_names.index(memristor)
        return Waveform(self.times, self.states[:, col], memristor)

    def resistance(self, memristor: str) -> Waveform:
        col = self.memristor_names.index(memristor)
        return Waveform(self.times, self.resistances[:, col], memristor)

    @property
    def node_waveforms(self) -> dict:
        return {n: self.waveform(n) for n in self.node_names}

    def source_voltages(self) -> np.ndarray:
        """Voltage across each source (+ minus -), one column per source."""
        return self._source_v

    def total_source_power(self) -> np.ndarray:
        """Instantaneous power delivered by all sources, rail included."""
        if not self.source_names:
            return np.zeros(len(self.times))
        return np.sum(self._source_v * self.source_currents, axis=1)

    def truncated(self, n: int) -> "SimResult":
        return SimResult(self.times[:n], self.node_names, self.voltages[:n],
                         self.source_names, self.source_currents[:n], self.memristor_names,
                         self.states[:n], self.resistances[:n], dict(self.ports),
                         self._source_v[:n], self.solve_resistances[:n])


class _System:
    """Index arrays and stamp patterns for one circuit."""

    def __init__(self, c: Circuit, gmin: float):
        self.circuit = c
        self.node_names = c.nodes
        nidx = c.node_index
        self.n_nodes = len(c.nodes) - 1  # ground eliminated

        sources = list(c.of_type(VSource))
        if c.vcc is not None:
            sources.append(VSource(VCC_SOURCE, c.vcc[0], GROUND, SourceSpec.dc(c.vcc[1])))
        self.sources = sources
        self.size = self.n_nodes + len(sources)
        g = self.size  # index of the discarded ground row/column
        self.ground = g

        def u(node):  # unknown index of a node (ground -> sink)
            i = nidx[node]
            return g if i == 0 else i - 1

        self.u = u
        m = self.size + 1
        self.m = m
        static = np.zeros((m, m))

        for i in range(self.n_nodes):
            static[i, i] += gmin
        for r in c.of_type(Resistor):
            _stamp_g(static, u(r.a), u(r.b), 1.0 / r.ohms)
        for k, s in enumerate(sources):
            j = self.n_nodes + k
            static[u(s.a), j] += 1.0
            static[u(s.b), j] -= 1.0
            static[j, u(s.a)] += 1.0
            static[j, u(s.b)] -= 1.0
        self.static = static
        self.src_rows = np.arange(self.n_nodes, self.n_nodes + len(sources))
        self.src_a = np.array([u(s.a) for s in sources], dtype=int)
        self.src_b = np.array([u(s.b) for s in sources], dtype=int)

        mems = list(c.of_type(Memristor))
        self.memristors = mems
        self.mem_a = np.array([u(e.a) for e in mems], dtype=int)
        self.mem_b = np.array([u(e.b) for e in mems], dtype=int)
        self.mem_flat = _pair_pattern(self.mem_a, self.mem_b, m)
        # terminal current (into a) -> model current
        self.mem_dir = np.array([e.polarity.sign * e.params.resistance_sign for e in mems],
                                dtype=float)
        groups = {}
        for k, e in enumerate(mems):
            groups.setdefault(e.params, []).append(k)
        self.mem_groups = [(p, np.array(ix, dtype=int)) for p, ix in groups.items()]
        self.x_lo = np.array([e.params.x_min for e in mems])
        self.x_hi = np.array([e.params.x_max for e in mems])
        self.x0 = np.array([e.x0 for e in mems], dtype=float)

        mos = list(c.of_type(Mosfet))
        self.mosfets = mos
        self.mos_d = np.array([u(e.d) for e in mos], dtype=int)
        self.mos_g = np.array([u(e.g) for e in mos], dtype=int)
        self.mos_s = np.array([u(e.s) for e in mos], dtype=int)
        self.mos_sign = np.array([e.params.sign for e in mos], dtype=float)
        self.mos_vth = np.array([e.params.v_th for e in mos])
        self.mos_kp = np.array([e.params.k_prime for e in mos])
        self.mos_lam = np.array([e.params.lambda_ for e in mos])
        rows = np.stack([self.mos_d, self.mos_s], axis=1) if mos else np.zeros((0, 2), int)
        cols = np.stack([self.mos_d, self.mos_g, self.mos_s], axis=1) if mos else np.zeros((0, 3), int)
        self.mos_flat = (rows[:, :, None] * m + cols[:, None, :]).reshape(-1)
        self.mos_rhs_idx = rows.reshape(-1)

        cap_a, cap_b, cap_c = [], [], []
        for e in mos:
            p = e.params
            for a, b, cval in ((e.g, e.s, p.c_gs), (e.g, e.d, p.c_gd), (e.d, e.s, p.c_db)):
                if cval > 0 and a != b:
                    cap_a.append(u(a))
                    cap_b.append(u(b))
                    cap_c.append(cval)
        self.cap_a = np.array(cap_a, dtype=int)
        self.cap_b = np.array(cap_b, dtype=int)
        self.cap_c = np.array(cap_c, dtype=float)
        self.cap_flat = _pair_pattern(self.cap_a, self.cap_b, m)

    # --- evaluation helpers

    def full(self, x: np.ndarray) -> np.ndarray:
        """Unknown vector with a trailing zero for ground."""
        return np.append(x, 0.0)

    def node_voltages(self, x: np.ndarray) -> np.ndarray:
        return np.concatenate([[0.0], x[: self.n_nodes]])

    def mem_conductance(self, states: np.ndarray) -> np.ndarray:
        g = np.empty(len(self.memristors))
        for p, ix in self.mem_groups:
            g[ix] = 1.0 / memristor_resistance(p, states[ix])
        return g

    def mem_rates(self, states, i_dev):
        out = np.empty(len(self.memristors))
        for p, ix in self.mem_groups:
            out[ix] = memristor_rate(p, states[ix], i_dev[ix])
        return out

    def source_values(self, t: float, scale: float = 1.0) -> np.ndarray:
        return np.array([s.spec.value(t) for s in self.sources], dtype=float) * scale

    def linear_matrix(self, g_mem, cap_geq=None):
        m = self.m
        A = self.static.copy()
        if len(g_mem):
            A += _bincount_matrix(self.mem_flat, _pair_weights(g_mem), m)
        if cap_geq is not None and len(self.cap_c):
            A += _bincount_matrix(self.cap_flat, _pair_weights(cap_geq), m)
        return A

    def mos_stamp(self, xf):
        vd, vg, vs = xf[self.mos_d], xf[self.mos_g], xf[self.mos_s]
        from .devices import mosfet_eval

        ids, gd, gg, gs = mosfet_eval(self.mos_sign, self.mos_vth, self.mos_kp, self.mos_lam,
                                      vd, vg, vs)
        ieq = ids - gd * vd - gg * vg - gs * vs
        block = np.stack([gd, gg, gs], axis=1)
        vals = np.stack([block, -block], axis=1).reshape(-1)
        rhs = np.stack([-ieq, ieq], axis=1).reshape(-1)
        return vals, rhs

    def newton(self, A_lin, rhs_lin, x0, tol, max_iter):
        """Solve the (possibly nonlinear) system; returns (x, converged, worst)."""
        n = self.size
        m = self.m
        x = x0.copy()
        nonlinear = len(self.mosfets) > 0
        worst = None
        for _ in range(max_iter):
            A = A_lin
            rhs = rhs_lin
            if nonlinear:
                vals, r = self.mos_stamp(self.full(x))
                A = A_lin + np.bincount(self.mos_flat, vals, minlength=m * m).reshape(m, m)
                rhs = rhs_lin + np.bincount(self.mos_rhs_idx, r, minlength=m)
            try:
                x_new = np.linalg.solve(A[:n, :n], rhs[:n])
            except np.linalg.LinAlgError:
                return x, False, "singular matrix"
            if not np.all(np.isfinite(x_new)):
                return x, False, "non-finite solution"
            if not nonlinear:
                return x_new, True, None
            dv = x_new[: self.n_nodes] - x[: self.n_nodes]
            worst_i = int(np.argmax(np.abs(dv))) if dv.size else 0
            err = float(abs(dv[worst_i])) if dv.size else 0.0
            worst = self.node_names[worst_i + 1] if dv.size else None
            if err > _V_STEP_LIMIT:
                step = np.clip(dv, -_V_STEP_LIMIT, _V_STEP_LIMIT)
                x = x_new.copy()
                x[: self.n_nodes] = x[: self.n_nodes] - dv + step
            else:
                x = x_new
            if err < tol:
                return x, True, None
        return x, False, worst


def _stamp_g(A, a, b, g):
    A[a, a] += g
    A[b, b] += g
    A[a, b] -= g
    A[b, a] -= g


def _pair_pattern(a, b, m):
    if len(a) == 0:
        return np.zeros(0, dtype=int)
    return np.stack([a * m + a, b * m + b, a * m + b, b * m + a], axis=1).reshape(-1)


def _pair_weights(g):
    return np.stack([g, g, -g, -g], axis=1).reshape(-1)


def _bincount_matrix(flat, weights, m):
    return np.bincount(flat, weights, minlength=m * m).reshape(m, m)


def _rhs_sources(sys: _System, values: np.ndarray) -> np.ndarray:
    rhs = np.zeros(sys.m)
    rhs[sys.src_rows] = values
    return rhs


def _solve_dc(sys: _System, states, t, cfg: SolverConfig, x_guess=None):
    """Newton from ``x_guess``; on failure gmin stepping, then pseudo-transient ramping."""
    g_mem = sys.mem_conductance(states)
    A_lin = sys.linear_matrix(g_mem)
    rhs = _rhs_sources(sys, sys.source_values(t))
    x0 = np.zeros(sys.size) if x_guess is None else x_guess
    x, ok, worst = sys.newton(A_lin, rhs, x0, cfg.newton_tol, cfg.newton_max_iter)
    if ok or worst in ("singular matrix", "non-finite solution"):
        return x, ok, worst

    diag = np.zeros(sys.m)
    diag[: sys.n_nodes] = 1.0
    # gmin stepping: shunt every node to ground and relax the shunt a decade at a time
    x = np.zeros(sys.size)
    for g in 10.0 ** np.arange(-2.0, -13.0, -1.0):
        x, ok, _ = sys.newton(A_lin + np.diag(diag * g), rhs, x, cfg.newton_tol, cfg.newton_max_iter)
        if not ok:
            break
    else:
        x, ok, worst = sys.newton(A_lin, rhs, x, cfg.newton_tol, cfg.newton_max_iter)
        if ok:
            return x, ok, worst

    # pseudo-transient: a capacitor from every node to ground, time step growing
    # until the capacitors no longer matter
    c_node = 1e-15
    x = np.zeros(sys.size)
    h = 1e-13
    while h < 1e-3:
        geq = np.diag(diag * c_node / h)
        x_new, ok, worst = sys.newton(A_lin + geq, rhs + geq @ sys.full(x), x,
                                      cfg.newton_tol, cfg.newton_max_iter)
        if not ok:
            h *= 0.25
            if h < 1e-18:
                return x, False, worst
            continue
        x = x_new
        h *= 4.0
    return sys.newton(A_lin, rhs, x, cfg.newton_tol, cfg.newton_max_iter)


@dataclass
class OperatingPoint:
    voltages: dict
    source_currents: dict
    ports: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.voltages[self.ports.get(name, name)]


def dc_operating_point(c: Circuit, states: dict | None = None,
                       cfg: SolverConfig | None = None, t: float = 0.0) -> OperatingPoint:
    """Node voltages with memristor states frozen and capacitors open.

    ``states`` overrides the memristors' initial states by name.
    """
    cfg = cfg or SolverConfig()
    sys = _System(c, cfg.gmin)
    x_states = _initial_states(sys, states)
    x, ok, worst = _solve_dc(sys, x_states, t, cfg)
    if not ok:
        raise SolverDivergence(f"DC operating point did not converge ({worst})", t, worst)
    v = sys.node_voltages(x)
    i_src = -x[sys.n_nodes:]
    return OperatingPoint(dict(zip(sys.node_names, v.tolist())),
                          {s.name: float(i) for s, i in zip(sys.sources, i_src)},
                          {p.name: p.node for p in c.ports})


def _initial_states(sys: _System, states: dict | None) -> np.ndarray:
    x = sys.x0.copy()
    if states:
        for k, e in enumerate(sys.memristors):
            if e.name in states:
                x[k] = states[e.name]
    return np.clip(x, sys.x_lo, sys.x_hi)


def transient(c: Circuit, cfg: SolverConfig | None = None, states: dict | None = None,
              probes=None) -> SimResult:
    """Transient on a uniform ``dt`` grid from the DC operating point at t = 0.

    All nodes are recorded, so ``probes`` only checks that the requested
    names exist. On Newton failure at step k a SolverDivergence carries the
    result up to step k - 1.
    """
    cfg = cfg or SolverConfig()
    sys = _System(c, cfg.gmin)
    ports = {p.name: p.node for p in c.ports}
    for name in probes or ():
        if ports.get(name, name) not in c.nodes:
            raise KeyError(f"unknown probe {name!r}")

    n_steps = cfg.n_steps
    dt = cfg.dt
    times = np.arange(n_steps + 1) * dt
    nm = len(sys.memristors)
    volt = np.zeros((n_steps + 1, sys.n_nodes + 1))
    i_src = np.zeros((n_steps + 1, len(sys.sources)))
    st = np.zeros((n_steps + 1, nm))
    res = np.zeros((n_steps + 1, nm))
    res_solve = np.zeros((n_steps + 1, nm))

    def partial(k):
        a = [sys.node_names.index(s.a) for s in sys.sources]
        b = [sys.node_names.index(s.b) for s in sys.sources]
        vsrc = volt[:k][:, a] - volt[:k][:, b]
        return SimResult(times[:k], sys.node_names, volt[:k], tuple(s.name for s in sys.sources),
                         i_src[:k], tuple(e.name for e in sys.memristors), st[:k], res[:k], ports,
                         vsrc, res_solve[:k])

    x_state = _initial_states(sys, states)
    x, ok, worst = _solve_dc(sys, x_state, 0.0, cfg)
    if not ok:
        raise SolverDivergence(f"DC operating point did not converge ({worst})", 0.0, worst,
                               partial(0))

    trap = cfg.state_integration == "trapezoidal"
    span = sys.x_hi - sys.x_lo
    lim = cfg.max_state_step

    def record(k, x, g_solve, x_state):
        volt[k] = sys.node_voltages(x)
        i_src[k] = -x[sys.n_nodes:]
        st[k] = x_state
        if nm:
            res[k] = 1.0 / sys.mem_conductance(x_state)
            res_solve[k] = 1.0 / g_solve

    def solve_at(t, h, x, g_mem):
        A_lin = sys.linear_matrix(g_mem, sys.cap_c / h)
        rhs = _rhs_sources(sys, sys.source_values(t))
        if len(sys.cap_c):
            xf = sys.full(x)
            hist = sys.cap_c / h * (xf[sys.cap_a] - xf[sys.cap_b])
            rhs += np.bincount(sys.cap_a, hist, minlength=sys.m)
            rhs -= np.bincount(sys.cap_b, hist, minlength=sys.m)
        return sys.newton(A_lin, rhs, x, cfg.newton_tol, cfg.newton_max_iter)

    def rates(x, g_mem, x_state):
        xf = sys.full(x)
        i_dev = g_mem * (xf[sys.mem_a] - xf[sys.mem_b]) * sys.mem_dir
        r = sys.mem_rates(x_state, i_dev)
        # a device pinned at a bound and pushed outward does not move
        pinned = ((x_state <= sys.x_lo) & (r < 0)) | ((x_state >= sys.x_hi) & (r > 0))
        return np.where(pinned, 0.0, r)

    g_mem = sys.mem_conductance(x_state)
    record(0, x, g_mem, x_state)

    t_now = 0.0
    h_ok = dt  # last accepted internal step; the next try grows from it
    for k in range(1, n_steps + 1):
        target = times[k]
        while True:
            remaining = target - t_now
            h = min(remaining, 2.0 * h_ok)
            if remaining - h < 1e-3 * h:
                h = remaining
            shrunk = False
            for _ in range(20):
                x_new, ok, worst = solve_at(t_now + h, h, x, g_mem)
                if not ok:
                    raise SolverDivergence(f"Newton failed at t={t_now + h:.6g}s "
                                           f"(worst node {worst})", t_now + h, worst, partial(k))
                if not nm:
                    break
                rate = rates(x_new, g_mem, x_state)
                if trap:
                    # Heun: average with the rate at the predicted end state
                    x_pred = np.clip(x_state + h * rate, sys.x_lo, sys.x_hi)
                    g_pred = sys.mem_conductance(x_pred)
                    x_corr, ok, worst = solve_at(t_now + h, h, x, g_pred)
                    if not ok:
                        raise SolverDivergence(f"Newton failed at t={t_now + h:.6g}s "
                                               f"(worst node {worst})", t_now + h, worst,
                                               partial(k))
                    rate = 0.5 * (rate + rates(x_corr, g_pred, x_pred))
                if lim is None:
                    break
                frac = float(np.max(np.abs(h * rate) / span))
                if frac <= lim:
                    break
                h *= 0.9 * lim / frac
                shrunk = True
            last = h >= remaining
            if shrunk or not last:
                h_ok = h
            g_used = g_mem
            x = x_new
            if nm:
                x_state = np.clip(x_state + h * rate, sys.x_lo, sys.x_hi)
                g_mem = sys.mem_conductance(x_state)
            if last:
                # voltages were solved with the conductances in force during
                # the step; the state is the one reached at its end
                record(k, x, g_used, x_state)
                t_now = target
                break
            t_now += h
    return partial(n_steps + 1)


def iv_sweep(device, drive: SourceSpec, cfg: SolverConfig | None = None, periods: int = 1):
    """Drive a lone two-terminal device with a sine; returns (v, i) arrays.

    The run covers exactly ``periods`` periods of the drive, so the
    trajectory is closed when the device returns to its starting state.
    """
    if drive.kind != "sine":
        raise ValueError("iv_sweep needs a sine drive")
    if not isinstance(device, (Memristor, Resistor)):
        raise TypeError("iv_sweep drives a memristor or resistor")
    cfg = cfg or SolverConfig()
    t_stop = periods / drive.args[1]
    n = max(int(round(t_stop / cfg.dt)), 1)
    cfg = replace(cfg, dt=t_stop / n, t_stop=t_stop)

    dut = replace(device, a="p", b=GROUND)
    c = Circuit((VSource("Vdrive", "p", GROUND, drive), dut))
    r = transient(c, cfg)
    v = r.waveform("p").values
    i = r.waveform("I(Vdrive)").values
    return v, i


def write_csv(result: SimResult, signals, path) -> None:
    """Write waveforms as ``time_s,<signal>...`` with 9 significant digits."""
    cols = [result.waveform(s).values for s in signals]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", *signals])
        for k, t in enumerate(result.times):
            w.writerow([f"{t:.8e}"] + [f"{c[k]:.8e}" for c in cols])


def kcl_residual(c: Circuit, result: SimResult, k: int, cfg: SolverConfig) -> np.ndarray:
    """Current imbalance (A) at every non-ground node for recorded step ``k``.

    Recomputed from element laws, independently of the stamped matrix.
    """
    from .devices import mosfet_eval

    names = result.node_names
    col = {n: i for i, n in enumerate(names)}
    v = result.voltages[k]
    vprev = result.voltages[k - 1] if k > 0 else v
    imb = np.zeros(len(names))

    def flow(a, b, i):  # current i leaves node a, enters node b
        imb[col[a]] -= i
        imb[col[b]] += i

    mem_states = dict(zip(result.memristor_names, result.solve_resistances[k]))
    for e in c.elements:
        if isinstance(e, Resistor):
            flow(e.a, e.b, (v[col[e.a]] - v[col[e.b]]) / e.ohms)
        elif isinstance(e, Memristor):
            flow(e.a, e.b, (v[col[e.a]] - v[col[e.b]]) / mem_states[e.name])
        elif isinstance(e, Mosfet):
            p = e.params
            vd, vg, vs = v[col[e.d]], v[col[e.g]], v[col[e.s]]
            ids = float(mosfet_eval(p.sign, p.v_th, p.k_prime, p.lambda_, vd, vg, vs)[0])
            flow(e.d, e.s, ids)
            if k > 0:
                for a, b, cval in ((e.g, e.s, p.c_gs), (e.g, e.d, p.c_gd), (e.d, e.s, p.c_db)):
                    dv = (v[col[a]] - v[col[b]]) - (vprev[col[a]] - vprev[col[b]])
                    flow(a, b, cval * dv / cfg.dt)
    for name, cur in zip(result.source_names, result.source_currents[k]):
        if name == VCC_SOURCE:
            a, b = c.vcc[0], GROUND
        else:
            s = c.element(name)
            a, b = s.a, s.b
        # source pushes `cur` out of its + terminal into node a
        flow(b, a, cur)
    for n in names[1:]:
        imb[col[n]] -= cfg.gmin * v[col[n]]
    return imb[1:]
