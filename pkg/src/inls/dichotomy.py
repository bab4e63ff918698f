"""Global existence versus blow-up for concrete initial data.

``evaluate`` walks the clauses of the three results in a fixed order:

    global existence  item 1  λ = 1
                      item 2  λ = -1, σ < (4-2b)/d
                      item 3  λ = -1, σ = (4-2b)/d, M(u0) < M(Q)
                      item 4  λ = -1, intercritical, c ≥ 0,
                              E(u0) M(u0)^γc < E_b(Q) M(Q)^γc and
                              ‖∇u0‖ ‖u0‖^γc < ‖∇Q‖ ‖Q‖^γc
    blow-up           item 1  mass-critical, E(u0) < 0                 finite time
                      item 2  intercritical, E(u0) < 0 or the pair above
                              with the gradient inequality reversed     finite or infinite
                              (finite time when also σ < 4/d)
                      item 3  energy-critical, E(u0) < 0 or
                              E(u0) < E_b(W_b), ‖∇u0‖ > ‖∇W_b‖          finite or infinite
                              (finite time when also b > 4/d)
    inverse square            a = 2, mass-critical, c > -((d-2)/2)², E(u0) < 0

The first clause that fires wins.  Every clause is evaluated anyway, and a
global clause firing together with a blow-up clause raises ``Contradiction``:
the hypotheses are mutually exclusive, so this can only mean a functional was
computed inconsistently.  Strict inequalities use zero tolerance; margins are
reported so near-boundary data can be judged by the caller.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .evolution import BLOWUP, COMPLETED, SimulationConfig, SimulationTrace, simulate
from .params import (
    Clause, ProblemParams, Regime, _check, classify_regime, gamma_c,
    is_exact, mass_critical_power, sigma_c,
)
from .radial import RadialField, energy_parts
from .variational import ConstantsLedger, MissingLedgerEntry


class Outcome(enum.Enum):
    GlobalExistence = "GlobalExistence"
    BlowupFinite = "BlowupFinite"
    BlowupFiniteOrInfinite = "BlowupFiniteOrInfinite"
    NotCovered = "NotCovered"


GLOBAL_THEOREM = "1.6"
BLOWUP_THEOREM = "1.7"
INVERSE_SQUARE_THEOREM = "1.9"


class HypothesisRangeViolated(ValueError):
    """(d, a, b, σ, c) lie outside the ranges of every result."""

    def __init__(self, failures: dict[str, list[Clause]]):
        self.failures = failures
        parts = []
        for theorem, clauses in failures.items():
            parts.append(f"{theorem}: " + ", ".join(c.name for c in clauses))
        super().__init__("hypothesis range violated (" + "; ".join(parts) + ")")


class Contradiction(AssertionError):
    """A global-existence clause and a blow-up clause fired together."""


class Inconsistent(AssertionError):
    """A simulation contradicts the verdict."""


@dataclass(frozen=True)
class Verdict:
    outcome: Outcome
    theorem: str | None
    item: int | None
    margins: tuple[Clause, ...] = ()
    note: str = ""

    def __post_init__(self):
        if (self.outcome is Outcome.NotCovered) != (self.theorem is None):
            raise ValueError("a verdict names a clause exactly when it is not NotCovered")

    @property
    def fired_clause(self) -> str | None:
        if self.theorem is None:
            return None
        return f"{self.theorem} item {self.item}" if self.item is not None else self.theorem

    def as_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "theorem": self.theorem,
            "item": self.item,
            "margins": [c.as_dict() for c in self.margins],
            "note": self.note,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


# --------------------------------------------------------------------------
# hypothesis ranges

def _potential_clauses(p: ProblemParams, ex: bool) -> list[Clause]:
    if p.c == 0:
        return []
    top = min(2, p.d)
    return [_check("a > 0", p.a, ">", 0, ex), _check("a < min{2,d}", p.a, "<", top, ex)]


def global_range(p: ProblemParams) -> list[Clause]:
    """Ranges of the global-existence result.  b = 0 is admitted (classical NLS)."""
    ex = is_exact(p.a, p.b, p.sigma)
    return _potential_clauses(p, ex) + [
        _check("b >= 0", p.b, ">=", 0, ex),
        _check("b < min{2,d}", p.b, "<", min(2, p.d), ex),
        _check("sigma < sigma_c(1,b)", p.sigma, "<", sigma_c(1, p), ex),
    ]


def blowup_range(p: ProblemParams) -> list[Clause]:
    ex = is_exact(p.a, p.b, p.sigma)
    mc = mass_critical_power(p)
    return _potential_clauses(p, ex) + [
        _check("lambda = -1", p.lam, "==", -1, True),
        _check("c >= 0", p.c, ">=", 0, is_exact(p.c)),
        _check("b >= 0", p.b, ">=", 0, ex),
        _check("b < min{2,d}", p.b, "<", min(2, p.d), ex),
        _check("sigma >= (4-2b)/d", p.sigma, ">=", mc, ex),
        _check("sigma <= sigma_c(1,b)", p.sigma, "<=", sigma_c(1, p), ex),
        _check("sigma < inf", p.sigma, "<", math.inf, ex),
    ]


def inverse_square_range(p: ProblemParams) -> list[Clause]:
    ex = is_exact(p.a, p.b, p.sigma)
    floor = -Fraction(p.d - 2, 2) ** 2
    return [
        _check("d >= 3", p.d, ">=", 3, True),
        _check("a = 2", p.a, "==", 2, ex),
        _check("b > 0", p.b, ">", 0, ex),
        _check("b < 2", p.b, "<", 2, ex),
        _check("lambda = -1", p.lam, "==", -1, True),
        _check("sigma = (4-2b)/d", p.sigma, "==", mass_critical_power(p), ex),
        _check("c > -((d-2)/2)^2", p.c, ">", floor, is_exact(p.c)),
    ]


def hypothesis_ranges(p: ProblemParams) -> dict[str, list[Clause]]:
    return {
        GLOBAL_THEOREM: global_range(p),
        BLOWUP_THEOREM: blowup_range(p),
        INVERSE_SQUARE_THEOREM: inverse_square_range(p),
    }


# --------------------------------------------------------------------------
# evaluation

@dataclass
class _Data:
    """Functionals of u0 and the ledger, fetched lazily so absent constants only
    matter when a clause actually needs them."""

    u0: RadialField
    p: ProblemParams
    ledger: ConstantsLedger | None
    parts: object = field(init=False)

    def __post_init__(self):
        self.parts = energy_parts(self.u0, self.p)

    @property
    def energy(self) -> float:
        return self.parts.energy

    @property
    def mass(self) -> float:
        return self.parts.mass

    @property
    def grad(self) -> float:
        return math.sqrt(self.parts.kinetic)

    def _ledger(self) -> ConstantsLedger:
        if self.ledger is None:
            raise MissingLedgerEntry("missing ledger entry: no constants ledger supplied")
        return self.ledger

    def ground_state(self) -> dict:
        return self._ledger().ground_state(self.p.d, self.p.b, self.p.sigma)

    def aubin_talenti(self) -> dict:
        return self._ledger().aubin_talenti(self.p.d, self.p.b, self.p.sigma)


def scale_invariant_pair(energy: float, mass: float, grad: float, gc: float) -> tuple[float, float]:
    """(E M^γc, ‖∇u‖ ‖u‖^γc), the two scale-invariant sides of the threshold test."""
    return energy * mass ** gc, grad * math.sqrt(mass) ** gc


def _threshold_pair(data: _Data, relation: str) -> list[Clause]:
    gs = data.ground_state()
    gc = float(gamma_c(data.p))
    e0, g0 = scale_invariant_pair(data.energy, data.mass, data.grad, gc)
    eq, gq = scale_invariant_pair(gs["energy_Q"], gs["mass_Q"], math.sqrt(gs["kinetic_Q"]), gc)
    return [
        _check("E(u0) M(u0)^gc < E_b(Q) M(Q)^gc", e0, "<", eq, False),
        _check(f"|grad u0| |u0|^gc {relation} |grad Q| |Q|^gc", g0, relation, gq, False),
    ]


def _negative_energy(data: _Data) -> Clause:
    return _check("E(u0) < 0", data.energy, "<", 0.0, False)


def _global_clauses(data: _Data):
    p = data.p
    ex = p.exact
    mc = mass_critical_power(p)
    yield 1, [_check("lambda = 1", p.lam, "==", 1, True)]
    if p.lam != -1:
        return
    yield 2, [_check("sigma < (4-2b)/d", p.sigma, "<", mc, ex)]
    regime = classify_regime(p)
    if regime is Regime.MassCritical:
        gs = data.ground_state()
        yield 3, [
            _check("sigma = (4-2b)/d", p.sigma, "==", mc, ex),
            _check("M(u0) < M(Q)", data.mass, "<", gs["mass_Q"], False),
        ]
    elif regime is Regime.Intercritical:
        c_ok = _check("c >= 0", p.c, ">=", 0, is_exact(p.c))
        if not c_ok.passed:
            yield 4, [c_ok]
            return
        yield 4, [c_ok] + _threshold_pair(data, "<")


def _blowup_clauses(data: _Data):
    """Yields (item, clauses, outcome) for the blow-up result."""
    p = data.p
    regime = classify_regime(p)
    neg = _negative_energy(data)
    if regime is Regime.MassCritical:
        yield 1, [neg], Outcome.BlowupFinite
    elif regime is Regime.Intercritical:
        ex = p.exact
        strong = _check("sigma < 4/d", p.sigma, "<", Fraction(4, p.d), ex)
        outcome = Outcome.BlowupFinite if strong.passed else Outcome.BlowupFiniteOrInfinite
        extra = [strong] if strong.passed else []
        if neg.passed:
            yield 2, [neg] + extra, outcome
        else:
            yield 2, _threshold_pair(data, ">") + extra, outcome
    elif regime is Regime.EnergyCritical:
        ex = p.exact
        strong = _check("b > 4/d", p.b, ">", Fraction(4, p.d), ex)
        outcome = Outcome.BlowupFinite if strong.passed else Outcome.BlowupFiniteOrInfinite
        extra = [strong] if strong.passed else []
        if neg.passed:
            yield 3, [neg] + extra, outcome
        else:
            w = data.aubin_talenti()
            yield 3, [
                _check("E(u0) < E_b(W_b)", data.energy, "<", w["energy_W"], False),
                _check("|grad u0| > |grad W_b|", data.grad, ">", math.sqrt(w["kinetic_W"]), False),
            ] + extra, outcome


def _fired(clauses: list[Clause]) -> bool:
    # strengthening clauses only change the outcome, they never block the clause
    core = [c for c in clauses if c.name not in ("sigma < 4/d", "b > 4/d")]
    return bool(core) and all(c.passed for c in core)


def evaluate(u0: RadialField, params: ProblemParams, ledger: ConstantsLedger | None = None) -> Verdict:
    """Apply the global-existence / blow-up results to u0 (see module docstring)."""
    if u0.grid.d != params.d:
        raise ValueError(f"field dimension {u0.grid.d} differs from d={params.d}")
    ranges = hypothesis_ranges(params)
    in_range = {k: all(c.passed for c in v) for k, v in ranges.items()}
    if not any(in_range.values()):
        raise HypothesisRangeViolated({k: [c for c in v if not c.passed] for k, v in ranges.items()})
    data = _Data(u0, params, ledger)

    global_hit = blowup_hit = None
    if in_range[GLOBAL_THEOREM]:
        for item, clauses in _global_clauses(data):
            if _fired(clauses):
                global_hit = Verdict(Outcome.GlobalExistence, GLOBAL_THEOREM, item, tuple(clauses))
                break
    if in_range[BLOWUP_THEOREM]:
        for item, clauses, outcome in _blowup_clauses(data):
            if _fired(clauses):
                blowup_hit = Verdict(outcome, BLOWUP_THEOREM, item, tuple(clauses))
                break
    if blowup_hit is None and in_range[INVERSE_SQUARE_THEOREM]:
        neg = _negative_energy(data)
        if neg.passed:
            blowup_hit = Verdict(Outcome.BlowupFinite, INVERSE_SQUARE_THEOREM, None, (neg,))
    if global_hit is not None and blowup_hit is not None:
        raise Contradiction(f"both {global_hit.fired_clause} and {blowup_hit.fired_clause} fired")
    if global_hit is not None:
        return global_hit
    if blowup_hit is not None:
        return blowup_hit
    return Verdict(Outcome.NotCovered, None, None, note="no clause fired")


def mass_threshold_amplitude(profile: RadialField, params: ProblemParams, ledger: ConstantsLedger,
                             xtol: float = 1e-13) -> float:
    """Amplitude A* where the mass-critical mass clause flips for A·profile, by bisection."""
    def fires(A):
        v = evaluate(profile * A, params, ledger)
        return v.theorem == GLOBAL_THEOREM and v.item == 3

    lo, hi = 0.0, 1.0
    while fires(hi):
        lo, hi = hi, 2.0 * hi
    while hi - lo > xtol * hi:
        mid = 0.5 * (lo + hi)
        if fires(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def energy_threshold_amplitude(profile: RadialField, params: ProblemParams,
                               lo: float = 1e-3, hi: float = 100.0, xtol: float = 1e-14) -> float:
    """Smallest amplitude A with E(A·profile) = 0, found by bisection on the energy sign."""
    def e(A):
        return energy_parts(profile * A, params).energy

    if not (e(lo) > 0 > e(hi)):
        raise ValueError("energy does not change sign on the bracket")
    return brentq(e, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)


# --------------------------------------------------------------------------
# agreement with simulation

@dataclass(frozen=True)
class CrossCheckReport:
    verdict: Verdict
    termination: str | None
    consistent: bool
    claim: bool
    detail: str = ""
    trace: SimulationTrace | None = field(default=None, repr=False, compare=False)

    @property
    def pair(self) -> tuple[str, str | None]:
        return self.verdict.outcome.value, self.termination

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict.as_dict(),
            "termination": self.termination,
            "consistent": self.consistent,
            "claim": self.claim,
            "detail": self.detail,
        }


def cross_check(u0: RadialField, params: ProblemParams, cfg: SimulationConfig,
                ledger: ConstantsLedger | None = None, strict: bool = False) -> CrossCheckReport:
    """Run the simulation and compare its termination with the verdict.

    Global existence must complete with a bounded gradient series; any blow-up
    verdict must trip the blow-up guard.  NotCovered data carry no claim and
    are not simulated.  With ``strict`` an inconsistency raises ``Inconsistent``.
    """
    verdict = evaluate(u0, params, ledger)
    if verdict.outcome is Outcome.NotCovered:
        return CrossCheckReport(verdict, None, True, False, "no claim")
    trace = simulate(u0, params, cfg)
    if verdict.outcome is Outcome.GlobalExistence:
        k = np.asarray(trace.kinetic_series)
        bounded = bool(np.all(np.isfinite(k)))
        ok = trace.termination == COMPLETED and bounded
        detail = f"sup |grad u|^2 = {float(k.max())!r}"
    else:
        ok = trace.termination == BLOWUP
        detail = f"T* estimate {trace.t_star!r}" if ok else f"no trip by t={trace.times[-1]!r}"
    report = CrossCheckReport(verdict, trace.termination, ok, True, detail, trace)
    if strict and not ok:
        raise Inconsistent(f"inconsistent: verdict {verdict.outcome.value} vs simulation {trace.termination}")
    return report
