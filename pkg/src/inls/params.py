"""Parameter calculus for the inhomogeneous NLS with inverse-power potential.

    i u_t + Δu - c|x|^{-a} u = λ |x|^{-b} |u|^σ u,   x ∈ R^d

Everything here is a pure function of the tuple (d, c, a, b, σ, λ).  Regime
boundaries are compared in exact rational arithmetic whenever the inputs are
rational (``int``, ``Fraction`` or a string such as ``"2/3"``); floats fall
back to an absolute tolerance of 1e-12.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable, Union

Number = Union[int, float, Fraction]

INF = math.inf
FLOAT_TOL = 1e-12


class InvalidParams(ValueError):
    """Raised when a parameter tuple violates one of its invariants.

    ``invariant`` names the failing condition so front ends can report it.
    """

    def __init__(self, invariant: str, message: str | None = None):
        super().__init__(message or f"invalid parameters: {invariant}")
        self.invariant = invariant


class UndefinedExponent(ValueError):
    pass


class Infeasible(ValueError):
    """An exponent window is empty; ``witness`` holds the offending bounds."""

    def __init__(self, message: str, witness: dict):
        super().__init__(message)
        self.witness = witness


def as_number(x) -> Number:
    """Coerce ``x`` to int/Fraction when it is rational, otherwise float."""
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, int):
        return x
    if isinstance(x, Fraction):
        return x.numerator if x.denominator == 1 else x
    if isinstance(x, Rational):
        return Fraction(x.numerator, x.denominator)
    if isinstance(x, str):
        s = x.strip()
        if s.lower() in ("inf", "+inf", "infinity"):
            return INF
        try:
            return as_number(Fraction(s))
        except (ValueError, ZeroDivisionError):
            return float(s)
    return float(x)


def is_exact(*xs) -> bool:
    return all(isinstance(x, (int, Fraction)) for x in xs)


def _cmp(x, y, exact: bool) -> int:
    """Three-way comparison; exact for rationals, 1e-12 absolute otherwise."""
    if x == INF or y == INF:
        return (x > y) - (x < y)
    if exact:
        return (x > y) - (x < y)
    diff = float(x) - float(y)
    if abs(diff) <= FLOAT_TOL:
        return 0
    return 1 if diff > 0 else -1


def _div(x, y):
    if isinstance(x, (int, Fraction)) and isinstance(y, (int, Fraction)):
        return Fraction(x) / Fraction(y)
    return float(x) / float(y)


@dataclass(frozen=True)
class ProblemParams:
    """The tuple (d, c, a, b, σ, λ).  ``lam`` is +1 (defocusing) or -1 (focusing)."""

    d: int
    c: Number = 0
    a: Number = 1
    b: Number = 0
    sigma: Number = 2
    lam: int = -1

    def __post_init__(self):
        if isinstance(self.d, bool) or not isinstance(self.d, int):
            if isinstance(self.d, float) and self.d.is_integer():
                object.__setattr__(self, "d", int(self.d))
            else:
                raise InvalidParams("d integer", f"d must be an integer, got {self.d!r}")
        for name in ("c", "a", "b", "sigma"):
            object.__setattr__(self, name, as_number(getattr(self, name)))
        if self.lam not in (1, -1):
            raise InvalidParams("lambda in {+1,-1}", f"lambda must be +1 or -1, got {self.lam!r}")
        if self.d < 1:
            raise InvalidParams("d >= 1")
        if not self.a > 0:
            raise InvalidParams("a > 0", f"a must be positive, got {self.a}")
        if not self.b >= 0:
            raise InvalidParams("b >= 0", f"b must be nonnegative, got {self.b}")
        if not self.sigma > 0:
            raise InvalidParams("sigma > 0", f"sigma must be positive, got {self.sigma}")
        for name in ("c", "a", "b", "sigma"):
            if not math.isfinite(float(getattr(self, name))):
                raise InvalidParams(f"{name} finite")

    @property
    def exact(self) -> bool:
        return is_exact(self.b, self.sigma)

    def replace(self, **kw) -> "ProblemParams":
        fields = dict(d=self.d, c=self.c, a=self.a, b=self.b, sigma=self.sigma, lam=self.lam)
        fields.update(kw)
        return ProblemParams(**fields)

    def as_dict(self) -> dict:
        return {
            "d": self.d,
            "c": _jsonable(self.c),
            "a": _jsonable(self.a),
            "b": _jsonable(self.b),
            "sigma": _jsonable(self.sigma),
            "lambda": self.lam,
        }


def _jsonable(x):
    if isinstance(x, Fraction):
        return float(x)
    return x


# --------------------------------------------------------------------------
# critical exponents

def critical_sobolev_exponent(params: ProblemParams) -> Number:
    """s_c = d/2 - (2-b)/σ."""
    return _div(params.d, 2) - _div(2 - params.b, params.sigma)


def gamma_c(params: ProblemParams) -> Number:
    """γ_c = (1 - s_c)/s_c, cross-checked against (4-2b-(d-2)σ)/(dσ-4+2b)."""
    d, b, sigma = params.d, params.b, params.sigma
    sc = critical_sobolev_exponent(params)
    if _cmp(sc, 0, params.exact) == 0:
        raise UndefinedExponent("gamma_c undefined at mass-critical (s_c = 0)")
    first = _div(1 - sc, sc)
    second = _div(4 - 2 * b - (d - 2) * sigma, d * sigma - 4 + 2 * b)
    scale = max(abs(float(first)), abs(float(second)), 1.0)
    if abs(float(first) - float(second)) > 1e-12 * scale:
        raise ArithmeticError(f"gamma_c closed forms disagree: {first} vs {second}")
    return first


def sigma_c(s: Number, params: ProblemParams) -> Number:
    """σ_c(s, b) = (4-2b)/(d-2s) for s < d/2, +inf otherwise."""
    s = as_number(s)
    if s < 0:
        raise ValueError("s must be nonnegative")
    if _cmp(s, _div(params.d, 2), is_exact(s)) >= 0:
        return INF
    return _div(4 - 2 * params.b, params.d - 2 * s)


@dataclass(frozen=True)
class CriticalExponents:
    s_c: Number
    gamma_c: Number | None
    sigma_c_of_s: Callable[[Number], Number] = field(repr=False, compare=False)

    @classmethod
    def of(cls, params: ProblemParams) -> "CriticalExponents":
        sc = critical_sobolev_exponent(params)
        gc = gamma_c(params) if _cmp(sc, 0, params.exact) > 0 else None
        return cls(sc, gc, lambda s: sigma_c(s, params))


class Regime(enum.Enum):
    MassSubcritical = "MassSubcritical"
    MassCritical = "MassCritical"
    Intercritical = "Intercritical"
    EnergyCritical = "EnergyCritical"
    EnergySupercritical = "EnergySupercritical"


def mass_critical_power(params: ProblemParams) -> Number:
    return _div(4 - 2 * params.b, params.d)


def energy_critical_power(params: ProblemParams) -> Number:
    """(4-2b)/(d-2) for d >= 3, +inf otherwise."""
    if params.d < 3:
        return INF
    return _div(4 - 2 * params.b, params.d - 2)


def classify_regime(params: ProblemParams) -> Regime:
    ex = params.exact
    lo = _cmp(params.sigma, mass_critical_power(params), ex)
    if lo < 0:
        return Regime.MassSubcritical
    if lo == 0:
        return Regime.MassCritical
    if params.d < 3:
        return Regime.Intercritical
    hi = _cmp(params.sigma, energy_critical_power(params), ex)
    if hi < 0:
        return Regime.Intercritical
    if hi == 0:
        return Regime.EnergyCritical
    return Regime.EnergySupercritical


# --------------------------------------------------------------------------
# hypothesis checks

@dataclass(frozen=True)
class Clause:
    name: str
    lhs: float
    rhs: float
    relation: str
    passed: bool

    @property
    def margin(self) -> float:
        """Signed slack, positive when the inequality holds with room."""
        if self.relation in ("<", "<="):
            return float(self.rhs) - float(self.lhs)
        if self.relation in (">", ">="):
            return float(self.lhs) - float(self.rhs)
        return 0.0 if self.passed else -1.0

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": _json_float(self.lhs),
            "rhs": _json_float(self.rhs),
            "relation": self.relation,
            "passed": self.passed,
            "margin": _json_float(self.margin),
        }


def _json_float(x):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _check(name, lhs, relation, rhs, exact) -> Clause:
    c = _cmp(lhs, rhs, exact)
    ok = {"<": c < 0, "<=": c <= 0, ">": c > 0, ">=": c >= 0, "==": c == 0}[relation]
    return Clause(name, lhs, rhs, relation, ok)


@dataclass(frozen=True)
class HypothesisReport:
    title: str
    clauses: tuple[Clause, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    @property
    def failures(self) -> list[Clause]:
        return [c for c in self.clauses if not c.passed]

    def clause(self, name: str) -> Clause:
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "title": self.title,
            "passed": self.passed,
            "clauses": [c.as_dict() for c in self.clauses],
        }


def check_lwp_h1(params: ProblemParams) -> HypothesisReport:
    """Energy-space well-posedness ranges: 0 < a, b < min{2, d}, 0 < σ < σ_c(1, b)."""
    p = params
    ex = is_exact(p.a, p.b, p.sigma)
    top = min(2, p.d)
    clauses = (
        _check("a > 0", p.a, ">", 0, ex),
        _check("a < min{2,d}", p.a, "<", top, ex),
        _check("b > 0", p.b, ">", 0, ex),
        _check("b < min{2,d}", p.b, "<", top, ex),
        _check("sigma > 0", p.sigma, ">", 0, ex),
        _check("sigma < sigma_c(1,b)", p.sigma, "<", sigma_c(1, p), ex),
    )
    return HypothesisReport("H1 local well-posedness", clauses)


def _is_even_integer(x) -> bool:
    if isinstance(x, Fraction):
        return x.denominator == 1 and x.numerator % 2 == 0
    if isinstance(x, int):
        return x % 2 == 0
    return float(x).is_integer() and int(x) % 2 == 0


def check_lwp_hs(params: ProblemParams, s: Number) -> HypothesisReport:
    """H^s well-posedness ranges, including the nonlinearity regularity clause."""
    p = params
    s = as_number(s)
    ex = is_exact(s, p.a, p.b, p.sigma)
    half_d = _div(p.d, 2)
    top = min(2, p.d - s, 1 + half_d - s)
    if s < half_d:
        sig_max = _div(4 - 2 * p.b, p.d - 2 * s)
    else:
        sig_max = INF
    ceil_s = math.ceil(s)
    regular = _is_even_integer(p.sigma) or _cmp(p.sigma, ceil_s - 1, ex) > 0
    clauses = (
        _check("s >= 0", s, ">=", 0, ex),
        _check("s < d/2", s, "<", half_d, ex),
        _check("b >= 0", p.b, ">=", 0, ex),
        _check("b < min{2,d-s,1+d/2-s}", p.b, "<", top, ex),
        _check("a > 0", p.a, ">", 0, ex),
        _check("a < min{2,d-s,1+d/2-s}", p.a, "<", top, ex),
        _check("sigma > 0", p.sigma, ">", 0, ex),
        _check("sigma <= (4-2b)/(d-2s)", p.sigma, "<=", sig_max, ex),
        Clause("regularity: sigma even or sigma > ceil(s)-1", p.sigma, ceil_s - 1, ">", regular),
    )
    return HypothesisReport(f"H^s local well-posedness (s={s})", clauses)


# --------------------------------------------------------------------------
# Strichartz bookkeeping

def _recip(x) -> Fraction | float:
    """1/x with 1/inf = 0; exact for rationals."""
    if x == INF:
        return 0
    return _div(1, x)


def is_admissible(p: Number, q: Number, d: int) -> bool:
    """(p, q) satisfies 2/p = d/2 - d/q and the range 2 <= q <= 2d/(d-2) (q < inf for d <= 2)."""
    p, q = as_number(p), as_number(q)
    if p < 1 or q < 1:
        return False
    ex = is_exact(p, q) or (p == INF and is_exact(q)) or (q == INF and is_exact(p))
    lhs = 2 * _recip(p)
    rhs = _div(d, 2) - d * _recip(q)
    if _cmp(lhs, rhs, ex) != 0:
        return False
    if q == INF:
        return False
    if _cmp(q, 2, ex) < 0:
        return False
    if d >= 3:
        return _cmp(q, _div(2 * d, d - 2), ex) <= 0
    return True


def in_s0(p: Number, q: Number, d: int) -> bool:
    """Admissible and strictly inside the non-endpoint range."""
    if not is_admissible(p, q, d):
        return False
    q = as_number(q)
    ex = is_exact(q)
    if _cmp(q, 2, ex) <= 0:
        return False
    if d >= 3:
        return _cmp(q, _div(2 * d, d - 2), ex) < 0
    return True


def _dual_s0_window(d: int) -> tuple[Fraction, Fraction]:
    """Open range of 1/β' for which (α, β) can lie in S_0."""
    lo = Fraction(1, 2)
    hi = Fraction(d + 2, 2 * d) if d >= 3 else Fraction(1)
    return lo, hi


def _p_from_q_inv(q_inv: Fraction, d: int) -> Fraction:
    """Time exponent from the scaling relation 2/p = d/2 - d/q."""
    return 2 / (Fraction(d, 2) - d * q_inv)


@dataclass(frozen=True)
class Window:
    lower: Fraction
    upper: Fraction

    @property
    def empty(self) -> bool:
        return not self.lower < self.upper

    @property
    def midpoint(self) -> Fraction:
        return (self.lower + self.upper) / 2

    def intersect(self, lo, hi) -> "Window":
        return Window(max(self.lower, lo), min(self.upper, hi))

    def as_dict(self) -> dict:
        return {"lower": float(self.lower), "upper": float(self.upper)}


@dataclass(frozen=True)
class StrichartzSelection:
    """Concrete exponent pairs for the contraction argument.

    Exponents are exact ``Fraction``s whenever the parameters were
    representable as such (floats are converted exactly).
    """

    p_tilde: Fraction
    q_tilde: Fraction
    alpha_tilde: Fraction
    beta_tilde: Fraction
    theta: Fraction
    p_bar: Fraction
    q_bar: Fraction
    alpha_bar: Fraction
    beta_bar: Fraction
    source_window: Window
    source_window_s0: Window
    potential_window: Window
    potential_window_s0: Window

    def as_dict(self) -> dict:
        f = float
        return {
            "p_tilde": f(self.p_tilde), "q_tilde": f(self.q_tilde),
            "alpha_tilde": f(self.alpha_tilde), "beta_tilde": f(self.beta_tilde),
            "theta": f(self.theta),
            "p_bar": f(self.p_bar), "q_bar": f(self.q_bar),
            "alpha_bar": f(self.alpha_bar), "beta_bar": f(self.beta_bar),
            "source_window": self.source_window.as_dict(),
            "source_window_s0": self.source_window_s0.as_dict(),
            "potential_window": self.potential_window.as_dict(),
            "potential_window_s0": self.potential_window_s0.as_dict(),
        }


def source_window(params: ProblemParams, s: Number) -> Window:
    """Open window for 1/β̃' from the nonlinear estimate."""
    d = params.d
    s, b, sigma = (Fraction(as_number(v)) for v in (s, params.b, params.sigma))
    lower = max((s + b) / d, Fraction(d - 2) * (sigma + 1) / (2 * d) - sigma * s / d + b / d)
    upper = (sigma + 1) / 2 - sigma * s / d + b / d
    return Window(lower, upper)


def potential_window(params: ProblemParams, s: Number) -> Window:
    """Open window for 1/β̄' from the potential estimate."""
    d = params.d
    s, a = Fraction(as_number(s)), Fraction(as_number(params.a))
    lower = max(Fraction(d - 2, 2 * d) + a / d, (s + a) / d)
    upper = Fraction(1, 2) + a / d
    return Window(lower, upper)


def find_source_pairs(params: ProblemParams, s: Number) -> StrichartzSelection:
    """Pick (p̃,q̃), (α̃,β̃), (p̄,q̄), (ᾱ,β̄) in S_0 by window midpoints.

    1/β̃' is the midpoint of the nonlinear window intersected with the range
    that keeps (α̃, β̃) in S_0; 1/q̃ then follows from
    1/β̃' = σ(1/q̃ - s/d) + 1/q̃ + b/d.  The potential pair is chosen the
    same way from its own window with 1/q̄ = 1/β̄' - a/d.
    """
    d = params.d
    s_f = Fraction(as_number(s))
    b, sigma = Fraction(as_number(params.b)), Fraction(as_number(params.sigma))
    a = Fraction(as_number(params.a))
    lo, hi = _dual_s0_window(d)

    raw = source_window(params, s)
    win = raw.intersect(lo, hi)
    if win.empty:
        raise Infeasible("empty nonlinear exponent window", {"raw": raw.as_dict(), "s0": win.as_dict()})
    bt_prime_inv = win.midpoint
    qt_inv = (bt_prime_inv - b / d + sigma * s_f / d) / (sigma + 1)
    bt_inv = 1 - bt_prime_inv
    p_t = _p_from_q_inv(qt_inv, d)
    a_t = _p_from_q_inv(bt_inv, d)
    theta = (1 - 1 / a_t) - (sigma + 1) / p_t

    raw_bar = potential_window(params, s)
    win_bar = raw_bar.intersect(lo, hi)
    if win_bar.empty:
        raise Infeasible("empty potential exponent window", {"raw": raw_bar.as_dict(), "s0": win_bar.as_dict()})
    bb_prime_inv = win_bar.midpoint
    qb_inv = bb_prime_inv - a / d
    bb_inv = 1 - bb_prime_inv
    p_b = _p_from_q_inv(qb_inv, d)
    a_b = _p_from_q_inv(bb_inv, d)

    return StrichartzSelection(
        p_tilde=p_t, q_tilde=1 / qt_inv, alpha_tilde=a_t, beta_tilde=1 / bt_inv, theta=theta,
        p_bar=p_b, q_bar=1 / qb_inv, alpha_bar=a_b, beta_bar=1 / bb_inv,
        source_window=raw, source_window_s0=win,
        potential_window=raw_bar, potential_window_s0=win_bar,
    )


def exponent_report(params: ProblemParams, s_values=(0, Fraction(1, 2), 1)) -> dict:
    """Flat key/value summary consumed by the ``exponents`` subcommand."""
    sc = critical_sobolev_exponent(params)
    try:
        gc = _json_float(gamma_c(params))
    except UndefinedExponent:
        gc = None
    table = {}
    for s in s_values:
        table[str(s)] = _json_float(sigma_c(s, params))
    out = {
        "params": params.as_dict(),
        "s_c": _json_float(sc),
        "gamma_c": gc,
        "sigma_c": table,
        "regime": classify_regime(params).value,
        "lwp_h1": check_lwp_h1(params).as_dict(),
    }
    for s in s_values:
        out[f"lwp_hs[{s}]"] = check_lwp_hs(params, s).as_dict()
    return out
