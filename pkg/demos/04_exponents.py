"""Exponent bookkeeping in exact arithmetic.

Prints the critical regularity, regime and H1 well-posedness clauses for a few
parameter sets, then, for each regularity s whose H^s clauses all hold, the
Strichartz exponents chosen for the source and potential terms.  Everything is
a Fraction until it is printed.
"""
from fractions import Fraction as F

from inls import (
    ProblemParams, check_lwp_h1, check_lwp_hs, classify_regime, critical_sobolev_exponent, find_source_pairs,
)

cases = [
    ProblemParams(3, c=1, a=1, b=F(1, 2), sigma=1, lam=-1),
    ProblemParams(3, c=1, a=1, b=F(1, 2), sigma=2, lam=-1),
    ProblemParams(3, c=1, a=1, b=F(1, 2), sigma=3, lam=-1),
    ProblemParams(2, c=-1, a=F(3, 2), b=F(1, 3), sigma=F(5, 2), lam=-1),
]
for p in cases:
    rep = check_lwp_h1(p)
    print(f"d={p.d} b={p.b} sigma={p.sigma} a={p.a}: s_c={critical_sobolev_exponent(p)}, {classify_regime(p).value}")
    for c in rep.clauses:
        print(f"    [{'x' if c.passed else ' '}] {c.name}")
    for s in (F(1, 2), F(1)):
        hs = check_lwp_hs(p, s)
        if not hs.passed:
            print(f"    s={s}: fails {', '.join(c.name for c in hs.failures)}")
            continue
        sel = find_source_pairs(p, s)
        print(f"    s={s}: theta={sel.theta}  (p~,q~)=({sel.p_tilde},{sel.q_tilde})  (a~,b~)=({sel.alpha_tilde},{sel.beta_tilde})"
              f"  (p-,q-)=({sel.p_bar},{sel.q_bar})  (a-,b-)=({sel.alpha_bar},{sel.beta_bar})")
