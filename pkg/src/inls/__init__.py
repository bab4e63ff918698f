"""Numerical laboratory for the inhomogeneous NLS with an inverse-power potential."""
from .params import (
    ProblemParams, Regime, check_lwp_h1, check_lwp_hs, classify_regime, critical_sobolev_exponent,
    find_source_pairs, gamma_c, sigma_c,
)
from .radial import RadialField, RadialGrid, VirialWeight, energy, energy_parts, mass
from .variational import ConstantsLedger, gn_constant, hs_constant, solve_ground_state
from .evolution import SimulationConfig, simulate, virial_consistency_audit
from .dichotomy import (
    Outcome, Verdict, cross_check, energy_threshold_amplitude, evaluate, mass_threshold_amplitude,
)

__all__ = [
    "ProblemParams", "Regime", "check_lwp_h1", "check_lwp_hs", "classify_regime",
    "critical_sobolev_exponent", "find_source_pairs", "gamma_c", "sigma_c",
    "RadialField", "RadialGrid", "VirialWeight", "energy", "energy_parts", "mass",
    "ConstantsLedger", "gn_constant", "hs_constant", "solve_ground_state",
    "SimulationConfig", "simulate", "virial_consistency_audit",
    "Outcome", "Verdict", "cross_check", "energy_threshold_amplitude", "evaluate",
    "mass_threshold_amplitude",
]
