"""Which result covers A·exp(-r²/2), as the amplitude A grows.

For the d=1 quintic (mass-critical) the answer changes once, at the amplitude
where the mass reaches M(Q); data become provably collapsing only later, when
the energy turns negative.  In the intercritical d=3 cubic with a repulsive
potential there is an uncovered band between the two thresholds.  A few points
are then run through the time stepper to see that the simulation agrees.
"""
import math

import numpy as np

from inls import (
    ConstantsLedger, ProblemParams, RadialField, RadialGrid, SimulationConfig, cross_check,
    energy_threshold_amplitude, evaluate, gn_constant, mass_threshold_amplitude, solve_ground_state,
)


def ledger_for(d, b, sigma, grid):
    led = ConstantsLedger()
    gs = solve_ground_state(d, b, sigma, grid=grid)
    led.add_ground_state(gs, gn_constant(gs))
    return led


def scan(p, grid, ledger, amps):
    u = RadialField.gaussian(grid)
    for A in amps:
        v = evaluate(u * A, p, ledger)
        tag = f"{v.theorem} item {v.item}" if v.theorem else "-"
        why = ", ".join(c.name for c in v.margins) if v.theorem else v.note
        print(f"  A={A:5.2f}  {v.outcome.value:<24} {tag:<12} {why}")


g1 = RadialGrid(1, 2048, 8)
p1 = ProblemParams(1, c=0, a=1, b=0, sigma=4, lam=-1)
led1 = ledger_for(1, 0, 4, g1)
u1 = RadialField.gaussian(g1)
A_mass = mass_threshold_amplitude(u1, p1, led1)
A_energy = energy_threshold_amplitude(u1, p1)
print(f"d=1 quintic: mass threshold A*={A_mass:.12f} (closed form {(3 * math.pi / 4) ** 0.25:.12f}),"
      f" energy zero at A0={A_energy:.6f}")
scan(p1, g1, led1, np.linspace(0.5, 1.8, 8))

g3 = RadialGrid(3, 2048, 24)
p3 = ProblemParams(3, c=0.5, a=1, b=0, sigma=2, lam=-1)
print("\nd=3 cubic, c=1/2, a=1:")
scan(p3, g3, ledger_for(3, 0, 2, g3), np.linspace(0.5, 4.0, 8))

print("\nsimulation cross-check, d=1 quintic, t_end=1:")
cfg = SimulationConfig(dt=1e-3, t_end=1.0)
for lam in (-1, 1):
    for A in (0.8 * A_mass, 1.2 * A_energy):
        rep = cross_check(u1 * A, p1.replace(lam=lam), cfg, led1)
        print(f"  lambda={lam:+d} A={A:.3f}: {rep.pair[0]:<16} vs {rep.pair[1]:<16} consistent={rep.consistent}"
              f"  ({rep.detail})")
