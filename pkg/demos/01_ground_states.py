"""Ground states, Pohozaev residuals and sharp constants.

Shoots the radial profile equation for a few (d, b, sigma), compares the cubic
d=1 case with the sech soliton, and assembles the Gagliardo-Nirenberg and
Hardy-Sobolev constants into a ledger file.
"""
import math
import sys

import numpy as np

from inls import ConstantsLedger, RadialGrid, gn_constant, hs_constant, solve_ground_state

out = sys.argv[1] if len(sys.argv) > 1 else "ledger.json"
ledger = ConstantsLedger()

gs = solve_ground_state(1, 0, 2)
err = np.max(np.abs(gs.profile.values.real - math.sqrt(2) / np.cosh(gs.profile.r)))
print(f"cubic d=1: Q(0)={gs.q0:.15f} (sqrt 2 = {math.sqrt(2):.15f}), max |Q - sqrt2 sech| = {err:.1e}")

print("\n  d   b      sigma  Q(0)           |Q|^2          Pohozaev residuals    C_GN")
for d, b, sigma in [(1, 0, 2), (1, 0, 4), (2, 0.5, 2), (3, 0, 2), (3, 1, 1)]:
    gs = solve_ground_state(d, b, sigma)
    c = gn_constant(gs)
    ledger.add_ground_state(gs, c)
    r1, r2 = gs.pohozaev_residuals
    print(f"  {d}   {b:<5}  {sigma:<5}  {gs.q0:.10f}  {gs.mass_Q:.10f}  {r1:.1e} {r2:.1e}       {c.c_gn:.10f}")
print(f"\nmass-critical d=1: C_GN = {gn_constant(solve_ground_state(1, 0, 4)).c_gn:.12f}, 4/pi^2 = {4 / math.pi ** 2:.12f}")

# the energy-critical extremal is explicit; its norms come from quadrature plus analytic tails
for b in (0.0, 1.0):
    rep = hs_constant(3, b, RadialGrid(3, 4096, 64))
    ledger.add_aubin_talenti(rep, 4 - 2 * b)
    print(f"W_b d=3 b={b:g}: |grad W|^2={rep.kinetic_W:.10f}  E/|grad W|^2={rep.energy_W / rep.kinetic_W:.12f}"
          f" (expected {(2 - b) / (2 * (3 - b)):.12f})  C_HS={rep.c_hs:.10f}")

ledger.save(out)
print(f"\nledger written to {out}")
