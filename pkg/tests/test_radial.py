import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gamma as G

from inls.params import ProblemParams
from inls.radial import (
    RadialField, RadialGrid, SingularityError, VirialWeight, energy_parts, evaluate, functional_G,
    functional_G_energy_form, inhomogeneous_term, kinetic, load_snapshot, mass, potential_term,
    resample, save_snapshot, scaled, sphere_area, virial_first_derivative,
    virial_second_derivative_identity, virial_value,
)


def gaussian_closed_forms(d, A, a, b, sigma):
    w = sphere_area(d)
    M = A ** 2 * math.pi ** (d / 2)
    K = A ** 2 * d / 2 * math.pi ** (d / 2)
    Pa = A ** 2 * w * G((d - a) / 2) / 2
    N = A ** (sigma + 2) * w * G((d - b) / 2) / 2 * ((sigma + 2) / 2) ** (-(d - b) / 2)
    return M, K, Pa, N


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("d,a,b,sigma", [(1, 0.5, 0.5, 2), (2, 1.0, 0.5, 1), (3, 1.0, 1.0, 1)])
def test_gaussian_functionals(d, a, b, sigma):
    g = RadialGrid(d, 4096, 16)
    u = RadialField.gaussian(g, 1.3)
    M, K, Pa, N = gaussian_closed_forms(d, 1.3, a, b, sigma)
    # node weights are midpoint sampled: spectral in odd d, second order in even d
    tol = 1e-10 if d % 2 else 1e-5
    assert mass(u) == pytest.approx(M, rel=tol)
    assert kinetic(u) == pytest.approx(K, rel=max(tol, 1e-8))
    assert potential_term(u, a) == pytest.approx(Pa, rel=1e-5)
    assert inhomogeneous_term(u, b, sigma) == pytest.approx(N, rel=1e-5)


def test_singular_weights_rejected():
    g = RadialGrid(2, 64, 4)
    u = RadialField.gaussian(g)
    with pytest.raises(SingularityError):
        potential_term(u, 2)
    with pytest.raises(SingularityError):
        inhomogeneous_term(u, 2.5, 1)


def test_potential_ignored_when_absent():
    g = RadialGrid(1, 64, 4)
    p = ProblemParams(1, c=0, a=1, b=0, sigma=4)
    assert energy_parts(RadialField.gaussian(g), p).potential == 0.0


def test_stiffness_is_symmetric_and_gives_kinetic():
    g = RadialGrid(3, 256, 8)
    L = g.stiffness_matrix
    assert abs(L - L.T).max() < 1e-14 * abs(L).max()
    rng = np.random.default_rng(0)
    v = rng.standard_normal(g.n) + 1j * rng.standard_normal(g.n)
    u = RadialField(g, v)
    assert np.real(np.vdot(v, L @ v)) == pytest.approx(-kinetic(u), rel=1e-12)


def test_laplacian_of_gaussian():
    g = RadialGrid(3, 2048, 12)
    u = RadialField.gaussian(g).values.real
    exact = (g.r ** 2 - 3) * np.exp(-g.r ** 2 / 2)
    err = np.abs(g.laplacian(u) - exact)[: g.n // 2]
    assert err[0] < 1e-4 and np.max(err[8:]) < 1e-6


def test_G_forms_agree():
    g = RadialGrid(3, 2048, 16)
    u = RadialField.gaussian(g, 2.0)
    for c in (0, 1, -0.5):
        p = ProblemParams(3, c=c, a=1, b=1, sigma=1, lam=-1)
        assert functional_G(u, p) == pytest.approx(functional_G_energy_form(u, p), rel=1e-12)


@pytest.mark.parametrize("kind", ["quadratic", "mass_critical"])
@pytest.mark.parametrize("d", [1, 2, 3])
def test_weight_inequalities_hold_at_every_node(kind, d):
    g = RadialGrid(d, 2048, 16)
    w = getattr(VirialWeight, kind)(g, 3.0)
    margins = w.inequality_margins()
    assert min(margins.values()) >= -1e-12


def test_weights_are_quadratic_near_origin():
    g = RadialGrid(3, 512, 16)
    for w in (VirialWeight.quadratic(g, 4.0), VirialWeight.mass_critical(g, 4.0)):
        inner = g.r < 4.0
        assert np.allclose(w.omega[inner], g.r[inner] ** 2, rtol=1e-12)
    q = VirialWeight.quadratic(g, 4.0)
    assert np.allclose(q.omega[g.r > 8.0], 2 * 16.0)


def test_weight_smoothness_across_breaks():
    g = RadialGrid(3, 64, 8)
    for w in (VirialWeight.quadratic(g, 1.0), VirialWeight.mass_critical(g, 1.0)):
        for x in w.profile.breaks:
            for order in (0, 1, 2):
                lo = w.derivative(np.array([x - 1e-9]), order)[0]
                hi = w.derivative(np.array([x + 1e-9]), order)[0]
                assert lo == pytest.approx(hi, abs=1e-6)


def test_virial_rate_vanishes_for_real_data():
    g = RadialGrid(2, 512, 16)
    u = RadialField.gaussian(g, 1.5)
    assert virial_first_derivative(u, VirialWeight.quadratic(g, 3.0)) == 0.0


def test_virial_rate_of_a_chirp():
    # u = e^{i β r²} e^{-r²/2}: dV/dt = 4 ∫ ω' β r |u|² for ω = r², i.e. 8 β ∫ r² |u|²
    g = RadialGrid(3, 4096, 16)
    beta = 0.3
    u = RadialField.from_function(g, lambda r: np.exp(1j * beta * r ** 2 - r ** 2 / 2))
    w = VirialWeight.quadratic(g, 1e6)
    assert virial_first_derivative(u, w) == pytest.approx(8 * beta * virial_value(u, w), rel=1e-8)


def test_second_derivative_reduces_to_global_virial():
    g = RadialGrid(3, 4096, 16)
    p = ProblemParams(3, c=0.5, a=1, b=1, sigma=1, lam=-1)
    u = RadialField.gaussian(g, 1.2)
    t = virial_second_derivative_identity(u, VirialWeight.quadratic(g, 1e6), p)
    parts = energy_parts(u, p)
    assert abs(t.bilaplacian) < 1e-8
    assert t.gradient_radial + t.gradient_angular == pytest.approx(8 * parts.kinetic, rel=1e-10)
    assert t.total == pytest.approx(functional_G(u, p) + t.potential_correction, rel=1e-10)


def test_snapshot_round_trip(tmp_path):
    g = RadialGrid(2, 64, 5.0)
    u = RadialField.gaussian(g, 1.1).with_phase(0.7)
    path = tmp_path / "snap.txt"
    save_snapshot(path, u)
    v = load_snapshot(path)
    assert v.grid == g
    assert np.array_equal(v.values, u.values)


def test_resample_and_evaluate():
    g = RadialGrid(3, 1024, 10)
    u = RadialField.gaussian(g)
    fine = resample(u, RadialGrid(3, 2048, 10))
    assert np.max(np.abs(fine.values - np.exp(-fine.r ** 2 / 2))) < 1e-8
    assert evaluate(u, np.array([0.0]))[0] == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(mu=st.floats(0.5, 2.0), b=st.sampled_from([0.0, 0.5, 1.0]), sigma=st.sampled_from([1.0, 2.0, 4.0 / 3]))
def test_scaling_law_for_mass(mu, b, sigma):
    d = 3
    g = RadialGrid(d, 2048, 24)
    u = RadialField.gaussian(g)
    v = scaled(u, mu, (2 - b) / sigma)
    sc = d / 2 - (2 - b) / sigma
    assert mass(v) == pytest.approx(mu ** (-2 * sc) * mass(u), rel=1e-6)


def test_field_is_immutable():
    g = RadialGrid(1, 16, 1)
    u = RadialField.zeros(g)
    with pytest.raises(ValueError):
        u.values[0] = 1.0
    with pytest.raises(ValueError):
        RadialField(g, np.full(16, np.nan))


@pytest.mark.parametrize("d", [1, 2, 3])
def test_quadrature_is_second_order(d):
    from scipy.integrate import quad
    # ramp from 1 to 0 on [1.5, 2.5]; its kinks sit on cell faces for n divisible by 8
    ramp = lambda r: np.clip((2.5 - r), 0, 1)
    exact = sphere_area(d) * sum(quad(lambda r: r ** (d - 1) * ramp(r) ** 2, lo, hi, epsabs=1e-14)[0]
                                 for lo, hi in ((0, 1.5), (1.5, 2.5)))
    errs = [abs(mass(RadialField.from_function(RadialGrid(d, n, 4.0), ramp)) - exact) for n in (128, 256, 512)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 1.9


def test_functionals_are_gauge_invariant():
    g = RadialGrid(3, 512, 16)
    p = ProblemParams(3, c=0.7, a=1, b=1, sigma=1, lam=-1)
    u = RadialField.from_function(g, lambda r: (1 + 0.3j * r) * np.exp(-r ** 2 / 2))
    v = u.with_phase(1.234)
    for f in (mass, kinetic, lambda w: potential_term(w, 1), lambda w: inhomogeneous_term(w, 1, 1),
              lambda w: functional_G(w, p), lambda w: energy_parts(w, p).energy):
        assert f(v) == pytest.approx(f(u), rel=1e-13)


def test_zero_field_gives_zero_everywhere():
    g = RadialGrid(3, 64, 8)
    p = ProblemParams(3, c=1, a=1, b=1, sigma=1, lam=-1)
    u = RadialField.zeros(g)
    t = virial_second_derivative_identity(u, VirialWeight.quadratic(g, 2.0), p)
    assert t.total == 0.0 and functional_G(u, p) == 0.0 and mass(u) == 0.0
