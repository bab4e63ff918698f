import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inls.evolution import (
    BLOWUP, COMPLETED, SimulationConfig, make_stepper, read_trace_csv, simulate, step,
)
from inls.params import ProblemParams
from inls.radial import RadialField, RadialGrid, energy, mass


def P(d=3, c=0.5, a=1, b=1, sigma=1, lam=1):
    return ProblemParams(d, c=c, a=a, b=b, sigma=sigma, lam=lam)


@pytest.mark.parametrize("scheme", ["midpoint", "strang"])
def test_step_is_time_reversible(scheme):
    g = RadialGrid(3, 512, 16)
    p = P(lam=-1)
    u = RadialField.gaussian(g, 1.0).with_phase(0.3)
    back = step(step(u, p, 1e-3, scheme), p, -1e-3, scheme)
    assert np.max(np.abs(back.values - u.values)) < 1e-10


@pytest.mark.parametrize("scheme", ["midpoint", "strang"])
def test_phase_only_flow_preserves_modulus(scheme):
    g = RadialGrid(2, 256, 8)
    u = RadialField.gaussian(g, 1.5).values.astype(complex)
    s = make_stepper(g, P(d=2, lam=-1), 1e-2, scheme, linear=False)
    v = u
    for _ in range(20):
        v = s(v)
    # exact for the splitting, fixed-point tolerance for the midpoint iteration
    tol = 1e-14 if scheme == "strang" else 1e-10
    assert np.max(np.abs(np.abs(v) - np.abs(u))) < tol


def test_gauge_invariance():
    g = RadialGrid(1, 512, 16)
    p = P(d=1, a=0.5, b=0.5, sigma=2, lam=-1)
    u = RadialField.gaussian(g, 1.0)
    theta = 1.1
    a = step(u.with_phase(theta), p, 1e-3)
    b = step(u, p, 1e-3).with_phase(theta)
    assert np.max(np.abs(a.values - b.values)) < 1e-12


def test_config_validation():
    with pytest.raises(ValueError):
        SimulationConfig(dt=0)
    with pytest.raises(ValueError):
        SimulationConfig(t_end=-1)
    with pytest.raises(ValueError):
        SimulationConfig(monitor_stride=0)
    with pytest.raises(ValueError):
        SimulationConfig(scheme="euler")


def test_trace_csv_round_trip(tmp_path):
    g = RadialGrid(3, 256, 16)
    tr = simulate(RadialField.gaussian(g), P(), SimulationConfig(dt=1e-2, t_end=0.1, monitor_stride=2))
    assert tr.termination == COMPLETED
    path = tmp_path / "trace.csv"
    tr.write_csv(path)
    back = read_trace_csv(path)
    assert back["t"] == tr.times
    assert back["mass"] == tr.mass_series
    assert back["energy"] == tr.energy_series
    assert back["virial"] == [None] * len(tr.times)


def test_inverse_square_run_is_flagged():
    g = RadialGrid(3, 256, 16)
    tr = simulate(RadialField.gaussian(g), P(a=2), SimulationConfig(dt=1e-2, t_end=0.02))
    assert any("a=2" in w for w in tr.warnings)


def test_focusing_collapse_trips_detector():
    g = RadialGrid(1, 2048, 8)
    p = ProblemParams(1, c=0, a=1, b=0, sigma=4, lam=-1)
    tr = simulate(RadialField.gaussian(g, 1.6), p, SimulationConfig(dt=1e-3, t_end=2))
    assert tr.termination == BLOWUP
    assert tr.flags[-1] == BLOWUP
    assert tr.kinetic_series[-1] >= 1e4 * tr.kinetic_series[0]
    assert tr.t_star < 1.0


@settings(max_examples=10, deadline=None)
@given(amp=st.floats(0.3, 1.5), c=st.sampled_from([0.0, 1.0, -0.5]), lam=st.sampled_from([1, -1]),
       phase=st.floats(-1, 1))
def test_mass_and_energy_are_conserved(amp, c, lam, phase):
    g = RadialGrid(3, 256, 16)
    p = P(c=c, lam=lam)
    u = RadialField.from_function(g, lambda r: amp * np.exp(-r ** 2 / 2 + 1j * phase * r ** 2))
    tr = simulate(u, p, SimulationConfig(dt=5e-3, t_end=0.1, monitor_stride=5))
    assert tr.mass_drift() < 1e-12
    assert tr.energy_drift() < 1e-9
    assert mass(tr.final) == pytest.approx(mass(u), rel=1e-12)
    assert energy(tr.final, p) == pytest.approx(energy(u, p), rel=1e-8, abs=1e-10)


def test_second_derivative_matches_trajectory():
    from inls.evolution import virial_consistency_audit
    from inls.radial import VirialWeight
    g = RadialGrid(3, 1024, 16)
    p = P(c=1, lam=-1)
    w = VirialWeight.quadratic(g, 4.0)
    tr = simulate(RadialField.gaussian(g, 0.8), p, SimulationConfig(dt=1e-3, t_end=0.5, monitor_stride=1),
                  weight=w, second_derivative=True)
    audit = virial_consistency_audit(tr)
    assert audit.second_max_rel < 1e-3
    assert audit.rate_at_zero == 0.0 and abs(audit.fd_rate_at_zero) < 1e-6
