import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from inls.params import (
    INF, Infeasible, InvalidParams, ProblemParams, Regime, UndefinedExponent, check_lwp_h1,
    check_lwp_hs, classify_regime, critical_sobolev_exponent, exponent_report, find_source_pairs,
    gamma_c, in_s0, is_admissible, potential_window, sigma_c,
)


def P(d, b=0, sigma=2, c=0, a=1, lam=-1):
    return ProblemParams(d, c=c, a=a, b=b, sigma=sigma, lam=lam)


def test_critical_exponents_examples():
    p = P(3, b=0, sigma=2)
    assert critical_sobolev_exponent(p) == F(1, 2)
    assert gamma_c(p) == 1
    assert classify_regime(P(3, b=1, sigma=2)) is Regime.EnergyCritical
    assert classify_regime(P(1, b=0, sigma=4)) is Regime.MassCritical
    assert classify_regime(P(1, b=0, sigma=6)) is Regime.Intercritical
    assert classify_regime(P(2, b=F(1, 2), sigma=1)) is Regime.MassSubcritical
    assert classify_regime(P(3, b=0, sigma=5)) is Regime.EnergySupercritical


def test_sigma_c_is_infinite_beyond_half_dimension():
    p = P(2, b=F(1, 2))
    assert sigma_c(1, p) == INF
    assert sigma_c(F(1, 2), p) == F(3, 1)
    assert sigma_c(0, P(1)) == 4


def test_gamma_c_undefined_at_mass_critical():
    with pytest.raises(UndefinedExponent):
        gamma_c(P(1, b=0, sigma=4))


def test_exact_regime_boundary_for_thirds():
    p = P(3, b=1, sigma=F(2, 3))
    assert classify_regime(p) is Regime.MassCritical
    assert classify_regime(p.replace(sigma="2/3")) is Regime.MassCritical
    # a float just off the boundary is outside the 1e-12 tolerance
    assert classify_regime(p.replace(sigma=2 / 3 + 1e-9)) is Regime.Intercritical


@pytest.mark.parametrize("field,value", [("sigma", -1), ("a", 0), ("b", -F(1, 2)), ("lam", 2)])
def test_invalid_params_name_the_invariant(field, value):
    kw = dict(d=3, c=0, a=1, b=0, sigma=2, lam=-1)
    kw[field] = value
    with pytest.raises(InvalidParams) as exc:
        ProblemParams(**kw)
    assert exc.value.invariant


def test_lwp_h1_report_lists_failing_clause():
    rep = check_lwp_h1(P(3, b=1, sigma=2, c=1))
    assert not rep.passed
    assert [c.name for c in rep.failures] == ["sigma < sigma_c(1,b)"]
    assert check_lwp_h1(P(3, b=1, sigma=1, c=1)).passed


def test_lwp_hs_regularity_clause():
    # s = 3/2 needs σ even or σ > 1
    p = P(5, b=F(1, 2), sigma=F(1, 2), c=1)
    rep = check_lwp_hs(p, F(3, 2))
    assert not rep.clause("regularity: sigma even or sigma > ceil(s)-1").passed
    assert check_lwp_hs(p.replace(sigma=2), F(3, 2)).clause("regularity: sigma even or sigma > ceil(s)-1").passed


def test_admissible_pairs():
    assert is_admissible(INF, 2, 3)
    assert is_admissible(2, 6, 3)
    assert not is_admissible(2, 6, 4)
    assert in_s0(4, 3, 3)
    assert not in_s0(2, 6, 3)
    assert not in_s0(INF, 2, 1)


def test_potential_window_example():
    w = potential_window(P(3, c=1, a=1), 1)
    assert (w.lower, w.upper) == (F(2, 3), F(5, 6))


def test_theta_vanishes_at_criticality():
    p = P(3, b=F(1, 2), sigma=3, c=1, a=1)
    assert find_source_pairs(p, 1).theta == 0


def test_infeasible_carries_witness():
    with pytest.raises(Infeasible) as exc:
        find_source_pairs(P(3, c=1, a=F(3, 2) + F(3, 2)), 0)
    assert "raw" in exc.value.witness


def test_exponent_report_is_flat_json():
    rep = exponent_report(P(3, b=0, sigma=2))
    assert rep["s_c"] == 0.5 and rep["gamma_c"] == 1.0
    assert rep["regime"] == "Intercritical"


rationals = st.fractions(min_value=0, max_value=F(23, 12), max_denominator=12)


@settings(max_examples=300, deadline=None)
@given(d=st.integers(1, 6), b=rationals, sigma=st.fractions(F(1, 12), 4, max_denominator=12),
       s=st.fractions(0, 3, max_denominator=6))
def test_subcriticality_equivalence(d, b, sigma, s):
    p = P(d, b=b, sigma=sigma)
    if s < F(d, 2):
        assert (s > critical_sobolev_exponent(p)) == (sigma < sigma_c(s, p))
    else:
        assert sigma_c(s, p) == INF


@settings(max_examples=300, deadline=None)
@given(d=st.integers(1, 6), b=rationals, sigma=st.fractions(F(1, 12), 4, max_denominator=12))
def test_gamma_c_forms_agree(d, b, sigma):
    p = P(d, b=b, sigma=sigma)
    if critical_sobolev_exponent(p) == 0:
        return
    g = gamma_c(p)
    assert g == F(4 - 2 * b - (d - 2) * sigma, d * sigma - 4 + 2 * b)


@settings(max_examples=300, deadline=None)
@given(d=st.integers(1, 6), s=st.fractions(0, 3, max_denominator=6), a=st.fractions(F(1, 12), F(23, 12), max_denominator=12),
       b=rationals, sigma=st.fractions(F(1, 12), 4, max_denominator=12))
def test_lwp_pass_gives_feasible_selection(d, s, a, b, sigma):
    p = P(d, b=b, sigma=sigma, c=1, a=a)
    if not check_lwp_hs(p, s).passed:
        return
    sel = find_source_pairs(p, s)
    critical = sigma == F(4 - 2 * b, d - 2 * s)
    assert sel.theta >= 0
    assert (sel.theta == 0) == critical
    for pp, qq in ((sel.p_tilde, sel.q_tilde), (sel.alpha_tilde, sel.beta_tilde),
                   (sel.p_bar, sel.q_bar), (sel.alpha_bar, sel.beta_bar)):
        assert in_s0(pp, qq, d)
    # the source relation fixes 1/q̃
    lhs = 1 - 1 / sel.beta_tilde
    assert lhs == sigma * (1 / sel.q_tilde - F(s) / d) + 1 / sel.q_tilde + F(b) / d
    assert math.isclose(float(1 / sel.q_bar), float(1 - 1 / sel.beta_bar - F(a) / d))
