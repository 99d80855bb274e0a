import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from memos.devices import (
    FIG3_TEAM,
    LinearDriftParams,
    ModelValidityWarning,
    MosfetParams,
    Polarity,
    TeamParams,
    TeamState,
    fit_team_from_lid,
    lid_dwdt,
    lid_memristance,
    lid_to_team_state,
    mosfet_ids,
    team_dxdt,
    team_resistance,
    team_window,
)

from oracles import E_INV, FIG3, WINDOW_AT_WC, square_law, team_r, team_rate

x_in_range = st.floats(min_value=0.0, max_value=3e-9, allow_nan=False)


# -- TEAM ----------------------------------------------------------------------

def test_fig3_defaults():
    p = FIG3_TEAM
    assert (p.r_on, p.r_off) == (100.0, 100e3)
    assert (p.i_on, p.i_off) == (-5e-6, 5e-6)
    assert (p.k_on, p.k_off) == (-1e-3, 1e-3)
    assert (p.alpha_on, p.alpha_off) == (5.0, 5.0)
    assert (p.x_on, p.x_off) == (3e-9, 0.0)


@pytest.mark.parametrize("bad", [
    dict(r_on=100e3, r_off=100.0),
    dict(r_on=0.0),
    dict(i_on=5e-6),
    dict(k_on=1e-3),
    dict(alpha_off=0.5),
    dict(x_on=0.0),
    dict(w_c=0.0),
])
def test_team_params_reject_invalid(bad):
    with pytest.raises(ValueError):
        TeamParams(**bad)


def test_dxdt_zero_current():
    assert team_dxdt(FIG3_TEAM, 1e-9, 0.0) == 0.0


def test_dxdt_threshold_is_dead_zone():
    assert team_dxdt(FIG3_TEAM, 1e-9, FIG3_TEAM.i_off) == 0.0
    assert team_dxdt(FIG3_TEAM, 1e-9, FIG3_TEAM.i_on) == 0.0


def test_dxdt_hand_value_with_unit_window():
    p = TeamParams(alpha_off=1.0, k_off=1e-3, i_off=5e-6, window="none")
    assert team_dxdt(p, TeamState(1e-9), 10e-6) == pytest.approx(1.0e-3, rel=1e-12)


def test_dxdt_rejects_non_finite_current():
    with pytest.raises(ValueError):
        team_dxdt(FIG3_TEAM, 0.0, float("nan"))


@given(i=st.floats(min_value=-5e-6, max_value=5e-6), x=x_in_range)
def test_dxdt_dead_zone(i, x):
    assert team_dxdt(FIG3_TEAM, x, i) == 0.0


@given(i=st.floats(min_value=-1e-3, max_value=1e-3).filter(lambda v: abs(v) > 5e-6), x=x_in_range)
def test_dxdt_matches_reference(i, x):
    got = team_dxdt(FIG3_TEAM, x, i)
    want = team_rate(i, x, **{k: FIG3[k] for k in ("i_on", "i_off", "k_on", "k_off", "alpha_on",
                                                    "alpha_off", "x_on", "x_off", "w_c")})
    assert got == pytest.approx(want, rel=1e-9)
    assert math.copysign(1.0, got) == (1.0 if i > 0 else -1.0)


def test_window_at_reference_points():
    assert team_window(FIG3_TEAM, FIG3_TEAM.x_on, "on") == pytest.approx(E_INV, rel=1e-12)
    assert team_window(FIG3_TEAM, FIG3_TEAM.x_off, "off") == pytest.approx(E_INV, rel=1e-12)
    assert team_window(FIG3_TEAM, FIG3_TEAM.x_off + FIG3_TEAM.w_c, "off") == pytest.approx(
        WINDOW_AT_WC, rel=1e-12)
    assert WINDOW_AT_WC == pytest.approx(0.065988, abs=1e-6)


@given(a=x_in_range, b=x_in_range, direction=st.sampled_from(["on", "off"]))
def test_window_bounded_and_decreasing(a, b, direction):
    p = FIG3_TEAM
    ref = p.x_on if direction == "on" else p.x_off
    wa, wb = team_window(p, a, direction), team_window(p, b, direction)
    assert 0.0 < wa <= E_INV + 1e-15
    if abs(a - ref) < abs(b - ref):
        assert wa > wb


def test_window_rejects_unknown_direction():
    with pytest.raises(ValueError):
        team_window(FIG3_TEAM, 0.0, "up")


def test_resistance_endpoints_and_midpoint():
    p = FIG3_TEAM
    assert team_resistance(p, p.x_on) == pytest.approx(100.0)
    assert team_resistance(p, p.x_off) == pytest.approx(100e3)
    assert team_resistance(p, (p.x_on + p.x_off) / 2) == pytest.approx(50050.0)


@given(a=x_in_range, b=x_in_range)
def test_resistance_monotone_toward_off_and_bounded(a, b):
    p = FIG3_TEAM
    ra, rb = team_resistance(p, a), team_resistance(p, b)
    assert p.r_on - 1e-9 <= ra <= p.r_off + 1e-9
    # x_off < x_on here, so resistance rises as x falls
    if a <= b:
        assert ra >= rb - 1e-9
    assert ra == pytest.approx(team_r(a, r_on=p.r_on, r_off=p.r_off, x_on=p.x_on, x_off=p.x_off))


def test_polarity_double_flip_is_identity():
    for pol in Polarity:
        assert pol.flipped().flipped() is pol
        assert pol.flipped() is not pol


# -- linear ion drift -----------------------------------------------------------

LID = LinearDriftParams(d=10e-9, mu_v=1e-14, r_on=100.0, r_off=16e3)


def test_lid_memristance_points():
    q_zero = LID.d ** 2 / (LID.mu_v * LID.r_on)
    assert lid_memristance(LID, 0.0) == pytest.approx(LID.r_off)
    assert lid_memristance(LID, q_zero) == pytest.approx(0.0, abs=1e-9)
    assert lid_memristance(LID, q_zero / 2) == pytest.approx(LID.r_off / 2)


def test_lid_memristance_clamps_and_warns():
    q_zero = LID.d ** 2 / (LID.mu_v * LID.r_on)
    with pytest.warns(ModelValidityWarning):
        assert lid_memristance(LID, 2 * q_zero) == 0.0
    with pytest.warns(ModelValidityWarning):
        assert lid_memristance(LID, -q_zero) == LID.r_off


def test_lid_rate():
    assert lid_dwdt(LID, 0.0) == 0.0
    assert lid_dwdt(LID, 1e-6) == pytest.approx(1e-10, rel=1e-12)
    assert lid_dwdt(LID, 2e-6) == pytest.approx(2 * lid_dwdt(LID, 1e-6))


def test_fit_structure():
    fit = fit_team_from_lid(LID)
    assert fit.alpha_on == fit.alpha_off == 1.0
    assert fit.x_on == LID.d and fit.x_off == 0.0
    assert fit.r_on == LID.r_on and fit.r_off == LID.r_off
    assert fit.i_on < 0 < fit.i_off and fit.i_off < 1e-9
    assert lid_to_team_state(LID, LID.d) == LID.d
    assert team_resistance(fit, lid_to_team_state(LID, LID.d)) == pytest.approx(LID.r_on)


@given(i=st.floats(min_value=1e-9, max_value=1e-3), w=st.floats(min_value=0.0, max_value=10e-9))
def test_fit_reproduces_drift_speed(i, w):
    fit = fit_team_from_lid(LID)
    x = lid_to_team_state(LID, w)
    # same speed, and resistance lines coincide
    assert abs(team_dxdt(fit, x, i)) == pytest.approx(abs(lid_dwdt(LID, i)), rel=1e-5)
    assert team_resistance(fit, x) == pytest.approx(
        LID.r_on * w / LID.d + LID.r_off * (1 - w / LID.d), rel=1e-9)


# -- MOSFET ---------------------------------------------------------------------

N = MosfetParams("n", 0.45, 200e-6, 0.0)


def test_mosfet_cutoff():
    assert mosfet_ids(N, 0.0, 1.0) == 0.0


def test_mosfet_saturation_hand_value():
    assert mosfet_ids(N, 1.45, 1.5) == pytest.approx(100e-6, rel=1e-12)


def test_mosfet_p_channel_mirrors_n():
    p = MosfetParams("p", -0.45, 200e-6, 0.0)
    assert mosfet_ids(p, -1.45, -1.5) == pytest.approx(-100e-6, rel=1e-12)


@given(vgs=st.floats(min_value=-1.0, max_value=2.0), vds=st.floats(min_value=0.0, max_value=2.0))
def test_mosfet_matches_square_law(vgs, vds):
    assert mosfet_ids(N, vgs, vds) == pytest.approx(square_law(vgs, vds, 0.45, 200e-6), abs=1e-15)


@given(vov=st.floats(min_value=0.01, max_value=2.0), kp=st.floats(min_value=1e-6, max_value=1e-3),
       lam=st.floats(min_value=0.0, max_value=0.3))
def test_mosfet_continuous_at_saturation_edge(vov, kp, lam):
    p = MosfetParams("n", 0.45, kp, lam)
    vgs = 0.45 + vov
    below = mosfet_ids(p, vgs, vov * (1 - 1e-9))
    above = mosfet_ids(p, vgs, vov * (1 + 1e-9))
    assert below == pytest.approx(above, rel=1e-6)


def test_mosfet_vectorized_eval_agrees_with_scalar():
    from memos.devices import mosfet_eval
    vd = np.array([0.2, 1.0, 1.8])
    ids, *_ = mosfet_eval(1.0, 0.45, 200e-6, 0.0, vd, 1.45, 0.0)
    assert np.allclose(ids, [mosfet_ids(N, 1.45, v) for v in vd])
