"""Memristor and MOSFET device models.

Two memristor models are provided: the threshold adaptive (TEAM) model and the
HP linear ion drift model, plus a square-law MOSFET used for the CMOS parts of
the hybrid gates. Rate and current functions accept scalars or numpy arrays so
the solver can evaluate whole device groups at once.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

# The drift fit sends the thresholds to zero; a tiny finite value keeps i/i_th finite.
FIT_THRESHOLD_EPS = 1e-12
# Cap on |dx/dt| so huge overdrive does not turn into inf * 0 = nan.
_RATE_CAP = 1e30


class ModelValidityWarning(UserWarning):
    """A model was evaluated outside the range where it is physically meaningful."""


class Polarity(str, Enum):
    FORWARD = "fwd"
    REVERSE = "rev"

    def flipped(self) -> "Polarity":
        return Polarity.REVERSE if self is Polarity.FORWARD else Polarity.FORWARD

    @property
    def sign(self) -> int:
        return 1 if self is Polarity.FORWARD else -1


@dataclass(frozen=True)
class TeamParams:
    """Parameters of the TEAM memristor.

    ``window`` selects the window function: ``"exp"`` is the double
    exponential ``exp(-exp(|x - x_ref| / w_c))``; ``"none"`` is a unit window,
    used by the linear-drift fit which has no window of its own.
    ``a_on``/``a_off`` are carried for completeness and do not enter the model.
    """

    r_on: float = 100.0
    r_off: float = 100e3
    k_on: float = -1e-3
    k_off: float = 1e-3
    alpha_on: float = 5.0
    alpha_off: float = 5.0
    i_on: float = -5e-6
    i_off: float = 5e-6
    x_on: float = 3e-9
    x_off: float = 0.0
    w_c: float = 3e-9
    a_on: float | None = 2.3e-9
    a_off: float | None = 1.2e-9
    window: str = "exp"

    def __post_init__(self):
        if not (0 < self.r_on < self.r_off):
            raise ValueError(f"need 0 < r_on < r_off, got {self.r_on}, {self.r_off}")
        if not (self.i_on < 0 < self.i_off):
            raise ValueError(f"need i_on < 0 < i_off, got {self.i_on}, {self.i_off}")
        if not (self.k_on < 0 < self.k_off):
            raise ValueError(f"need k_on < 0 < k_off, got {self.k_on}, {self.k_off}")
        if self.alpha_on < 1 or self.alpha_off < 1:
            raise ValueError("alpha_on and alpha_off must be >= 1")
        if self.x_on == self.x_off:
            raise ValueError("x_on and x_off must differ")
        if not self.w_c > 0:
            raise ValueError("w_c must be positive")
        if self.window not in ("exp", "none"):
            raise ValueError(f"unknown window {self.window!r}")

    @property
    def x_min(self) -> float:
        return min(self.x_on, self.x_off)

    @property
    def x_max(self) -> float:
        return max(self.x_on, self.x_off)

    @property
    def resistance_sign(self) -> int:
        """+1 if positive device current moves the state toward R_OFF."""
        return 1 if self.x_off > self.x_on else -1


@dataclass(frozen=True)
class TeamState:
    x: float


@dataclass(frozen=True)
class LinearDriftParams:
    """HP linear ion drift memristor: width ``d``, dopant mobility ``mu_v``."""

    d: float = 10e-9
    mu_v: float = 1e-14
    r_on: float = 100.0
    r_off: float = 16e3

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("d must be positive")
        if not self.mu_v > 0:
            raise ValueError("mu_v must be positive")
        if not (0 < self.r_on < self.r_off):
            raise ValueError(f"need 0 < r_on < r_off, got {self.r_on}, {self.r_off}")

    @property
    def x_min(self) -> float:
        return 0.0

    @property
    def x_max(self) -> float:
        return self.d

    @property
    def resistance_sign(self) -> int:
        # positive current widens the doped region, lowering resistance
        return -1


@dataclass(frozen=True)
class LinearDriftState:
    w: float


@dataclass(frozen=True)
class MosfetParams:
    """Level-1 square-law MOSFET.

    ``v_th`` is signed (negative for p-channel). ``k_prime`` already includes
    W/L. The three capacitances are constant intrinsic terminal capacitances;
    the drain-body one goes to the source since the body is tied there.
    """

    kind: str = "n"
    v_th: float = 0.45
    k_prime: float = 300e-6
    lambda_: float = 0.05
    c_gs: float = 0.5e-15
    c_gd: float = 0.2e-15
    c_db: float = 0.5e-15

    def __post_init__(self):
        if self.kind not in ("n", "p"):
            raise ValueError(f"kind must be 'n' or 'p', got {self.kind!r}")
        if not self.k_prime > 0:
            raise ValueError("k_prime must be positive")
        if self.lambda_ < 0:
            raise ValueError("lambda must be >= 0")
        if min(self.c_gs, self.c_gd, self.c_db) < 0:
            raise ValueError("capacitances must be >= 0")

    @property
    def sign(self) -> int:
        return 1 if self.kind == "n" else -1


NMOS_180 = MosfetParams("n", 0.45, 300e-6, 0.05)
PMOS_180 = MosfetParams("p", -0.45, 100e-6, 0.05)
FIG3_TEAM = TeamParams()


# --- TEAM ------------------------------------------------------------------


def team_window(p: TeamParams, x, direction: str):
    """Window factor for motion in ``direction`` ("on" or "off")."""
    if direction not in ("on", "off"):
        raise ValueError(f"direction must be 'on' or 'off', got {direction!r}")
    if p.window == "none":
        return np.ones_like(np.asarray(x, dtype=float))[()]
    x_ref = p.x_off if direction == "off" else p.x_on
    with np.errstate(over="ignore"):
        return np.exp(-np.exp(np.abs(np.asarray(x, dtype=float) - x_ref) / p.w_c))[()]


def team_dxdt(p: TeamParams, s, i):
    """State velocity for device current ``i`` (piecewise, with dead zone).

    ``s`` may be a TeamState or a raw state value/array. Currents exactly on a
    threshold fall in the dead zone.
    """
    x = s.x if isinstance(s, TeamState) else s
    i = np.asarray(i, dtype=float)
    if not np.all(np.isfinite(i)):
        raise ValueError("non-finite device current")
    x = np.asarray(x, dtype=float)
    out = np.zeros(np.broadcast(x, i).shape)
    i_b = np.broadcast_to(i, out.shape)
    x_b = np.broadcast_to(x, out.shape)

    off = i_b > p.i_off
    if np.any(off):
        base = i_b[off] / p.i_off - 1.0
        with np.errstate(over="ignore"):
            drive = np.minimum(base**p.alpha_off, _RATE_CAP)
        out[off] = p.k_off * drive * team_window(p, x_b[off], "off")
    on = i_b < p.i_on
    if np.any(on):
        base = i_b[on] / p.i_on - 1.0
        with np.errstate(over="ignore"):
            drive = np.minimum(base**p.alpha_on, _RATE_CAP)
        out[on] = p.k_on * drive * team_window(p, x_b[on], "on")
    return np.clip(out, -_RATE_CAP, _RATE_CAP)[()]


def team_resistance(p: TeamParams, s):
    """Resistance, linear in the state between R_ON at x_on and R_OFF at x_off."""
    x = s.x if isinstance(s, TeamState) else s
    x = np.clip(np.asarray(x, dtype=float), p.x_min, p.x_max)
    return (p.r_on + (p.r_off - p.r_on) * (x - p.x_on) / (p.x_off - p.x_on))[()]


def team_clamp(p: TeamParams, x):
    return np.clip(x, p.x_min, p.x_max)


# --- linear ion drift ------------------------------------------------------


def lid_memristance(p: LinearDriftParams, q: float) -> float:
    """Charge-controlled memristance for a device starting fully undoped.

    Values outside [0, r_off] are clamped with a ModelValidityWarning.
    """
    m = p.r_off * (1.0 - p.mu_v * p.r_on * q / p.d**2)
    if m < 0.0 or m > p.r_off:
        warnings.warn(
            f"memristance {m:.4g} ohm outside [0, r_off] for q={q:.4g} C",
            ModelValidityWarning,
            stacklevel=2,
        )
        m = min(max(m, 0.0), p.r_off)
    return m


def lid_dwdt(p: LinearDriftParams, i):
    return (p.mu_v * (p.r_on / p.d) * np.asarray(i, dtype=float))[()]


def lid_resistance(p: LinearDriftParams, s):
    """Series combination of doped (width w) and undoped regions."""
    w = s.w if isinstance(s, LinearDriftState) else s
    frac = np.clip(np.asarray(w, dtype=float), 0.0, p.d) / p.d
    return (p.r_on * frac + p.r_off * (1.0 - frac))[()]


def fit_team_from_lid(p: LinearDriftParams, eps: float = FIT_THRESHOLD_EPS) -> TeamParams:
    """TEAM parameters that reproduce a linear ion drift device.

    Unit exponents, vanishing thresholds and |k| = mu_v R_ON |i_th| / D make
    both TEAM branches collapse to mu_v R_ON i / D. With x_on = D and
    x_off = 0 the TEAM state equals the doped width w, so the resistance lines
    coincide too; see :func:`lid_to_team_state`.
    """
    k = p.mu_v * (p.r_on / p.d) * eps
    return TeamParams(
        r_on=p.r_on,
        r_off=p.r_off,
        k_on=-k,
        k_off=k,
        alpha_on=1.0,
        alpha_off=1.0,
        i_on=-eps,
        i_off=eps,
        x_on=p.d,
        x_off=0.0,
        w_c=p.d,
        a_on=None,
        a_off=None,
        window="none",
    )


def lid_to_team_state(p: LinearDriftParams, w: float) -> float:
    return float(min(max(w, 0.0), p.d))


# --- generic memristor helpers used by the solver --------------------------


def memristor_resistance(params, state):
    if isinstance(params, TeamParams):
        return team_resistance(params, state)
    return lid_resistance(params, state)


def memristor_rate(params, state, i_dev):
    """d(state)/dt for device current ``i_dev`` (model sign convention)."""
    if isinstance(params, TeamParams):
        return team_dxdt(params, state, i_dev)
    return lid_dwdt(params, i_dev) * np.ones_like(np.asarray(state, dtype=float))


def default_state(params, low_resistance: bool = False) -> float:
    """Fresh-device state: x_off (high resistance) unless asked for R_ON."""
    if isinstance(params, TeamParams):
        return params.x_on if low_resistance else params.x_off
    return params.d if low_resistance else 0.0


# --- MOSFET ----------------------------------------------------------------


def _nmos_core(vth, kp, lam, vgs, vds):
    """Square law for vds >= 0; returns (ids, d/dvgs, d/dvds)."""
    vov = vgs - vth
    clm = 1.0 + lam * vds
    on = vov > 0
    sat = on & (vds >= vov)
    tri = on & ~sat
    ids = np.zeros_like(vov)
    gm = np.zeros_like(vov)
    gds = np.zeros_like(vov)

    core_t = vov * vds - 0.5 * vds * vds
    ids = np.where(tri, kp * core_t * clm, ids)
    gm = np.where(tri, kp * vds * clm, gm)
    gds = np.where(tri, kp * (vov - vds) * clm + kp * core_t * lam, gds)

    core_s = 0.5 * vov * vov
    ids = np.where(sat, kp * core_s * clm, ids)
    gm = np.where(sat, kp * vov * clm, gm)
    gds = np.where(sat, kp * core_s * lam, gds)
    return ids, gm, gds


def mosfet_eval(sign, vth, kp, lam, vd, vg, vs):
    """Drain current and its partials w.r.t. (vd, vg, vs).

    Arrays broadcast; ``sign`` is +1 for n-channel, -1 for p-channel and
    ``vth`` is the signed threshold. Drain and source swap roles when the
    channel is reverse biased.
    """
    sign = np.asarray(sign, dtype=float)
    # map p-channel onto n-channel by negating voltages
    vd_n, vg_n, vs_n = sign * vd, sign * vg, sign * vs
    vth_n = sign * vth
    fwd = vd_n >= vs_n
    hi = np.where(fwd, vd_n, vs_n)
    lo = np.where(fwd, vs_n, vd_n)
    ids, gm, gds = _nmos_core(vth_n, kp, lam, vg_n - lo, hi - lo)
    # current into the (original) drain, n-equivalent
    i_n = np.where(fwd, ids, -ids)
    gd_n = np.where(fwd, gds, gm + gds)
    gg_n = np.where(fwd, gm, -gm)
    gs_n = np.where(fwd, -(gm + gds), -gds)
    # I_p(v) = -I_n(-v) so partials are unchanged
    return sign * i_n, gd_n, gg_n, gs_n


def mosfet_ids(p: MosfetParams, v_gs: float, v_ds: float) -> float:
    """Drain current for the given gate-source and drain-source voltages."""
    i, _, _, _ = mosfet_eval(p.sign, p.v_th, p.k_prime, p.lambda_,
                             np.float64(v_ds), np.float64(v_gs), np.float64(0.0))
    return float(i)


def with_params(p, **changes):
    """dataclasses.replace that tolerates the ``lambda`` keyword."""
    if "lambda" in changes:
        changes["lambda_"] = changes.pop("lambda")
    return replace(p, **changes)

