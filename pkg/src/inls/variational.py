"""Ground states, the Hardy–Sobolev extremal W_b and the sharp constants.

The ground state Q solves Q'' + ((d-1)/r) Q' - Q + r^{-b} Q^{σ+1} = 0 with
Q'(0) = 0 and Q → 0.  It is found by shooting on Q(0): too small an initial
value and the solution turns around and grows (``blowup``), too large and it
crosses zero (``crossing``).  The low side is detected as soon as Q turns
upward, which also covers the bounded oscillations that occur in d = 1.
Bisection between the two behaviours pins Q(0) down; the norms M = ‖Q‖², K = ‖∇Q‖², N = ∫ r^{-b} Q^{σ+2} are integrated
along the same ODE trajectory so the Pohozaev identities can be checked far
below the accuracy of any grid quadrature.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numba
import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.special import beta as beta_fn, betainc

from .params import ProblemParams, Regime, as_number, classify_regime, gamma_c, sigma_c
from .radial import RadialField, RadialGrid, sphere_area

BLOWUP, CROSSING, UNDECIDED = 1, -1, 0


class GroundStateError(RuntimeError):
    pass


class NoBracket(GroundStateError):
    pass


class ToleranceNotMet(GroundStateError):
    pass


class WrongRegime(ValueError):
    pass


class IdentityViolation(RuntimeError):
    pass


# --------------------------------------------------------------------------
# radial ODE, RK4 on y = (Q, Q', M, K, N)

@numba.njit(cache=True)
def _rhs(r, y, d, b, sigma, wd, out):
    q, p = y[0], y[1]
    aq = abs(q)
    rb = r ** (-b)
    out[0] = p
    out[1] = -(d - 1) / r * p + q - rb * aq ** sigma * q
    jac = wd * r ** (d - 1)
    out[2] = jac * q * q
    out[3] = jac * p * p
    out[4] = jac * rb * aq ** (sigma + 2)


@numba.njit(cache=True)
def _series_start(q0, r0, d, b, sigma):
    c2 = q0 / (2.0 * d)
    cb = q0 ** (sigma + 1) / ((2.0 - b) * (d - b))
    q = q0 + c2 * r0 * r0 - cb * r0 ** (2.0 - b)
    p = 2.0 * c2 * r0 - (2.0 - b) * cb * r0 ** (1.0 - b)
    return q, p


@numba.njit(cache=True)
def _shoot(q0, d, b, sigma, wd, h_max, r0, r_cap, blowup_factor, store):
    """Integrate from r0; returns (outcome, steps, trajectory-if-stored)."""
    y = np.zeros(5)
    y[0], y[1] = _series_start(q0, r0, d, b, sigma)
    # norms accumulated on [0, r0] at leading order
    y[2] = wd * q0 * q0 * r0 ** d / d
    y[4] = wd * q0 ** (sigma + 2) * r0 ** (d - b) / (d - b)
    k1 = np.zeros(5)
    k2 = np.zeros(5)
    k3 = np.zeros(5)
    k4 = np.zeros(5)
    tmp = np.zeros(5)
    cap = 1
    if store:
        cap = int(r_cap / h_max) + 2000
    traj = np.zeros((cap, 6))
    r = r0
    n = 0
    if store:
        traj[0, 0] = r
        traj[0, 1:] = y
    outcome = UNDECIDED
    while r < r_cap:
        h = min(h_max, 0.05 * r)
        _rhs(r, y, d, b, sigma, wd, k1)
        for i in range(5):
            tmp[i] = y[i] + 0.5 * h * k1[i]
        _rhs(r + 0.5 * h, tmp, d, b, sigma, wd, k2)
        for i in range(5):
            tmp[i] = y[i] + 0.5 * h * k2[i]
        _rhs(r + 0.5 * h, tmp, d, b, sigma, wd, k3)
        for i in range(5):
            tmp[i] = y[i] + h * k3[i]
        _rhs(r + h, tmp, d, b, sigma, wd, k4)
        for i in range(5):
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        r += h
        n += 1
        if store:
            if n >= cap:
                break
            traj[n, 0] = r
            traj[n, 1:] = y
        if y[0] < 0.0:
            outcome = CROSSING
            break
        if y[0] > blowup_factor * q0 or y[1] > 0.0:
            outcome = BLOWUP
            break
    return outcome, n, traj[: n + 1]


# --------------------------------------------------------------------------
# ground state

@dataclass(frozen=True)
class ShootingConfig:
    h_max: float = 1e-4
    r0: float = 1e-6
    r_cap: float = 100.0
    q_low: float = 1e-3
    q_high: float = 100.0
    tol: float = 1e-12
    blowup_factor: float = 10.0
    divergence: float = 1e-3


@dataclass(frozen=True, eq=False)
class GroundState:
    d: int
    b: float
    sigma: float
    q0: float
    profile: RadialField
    mass_Q: float
    kinetic_Q: float
    nl_Q: float
    r_cut: float
    bracket_widths: tuple = field(repr=False, default=())

    @property
    def pohozaev_residuals(self) -> tuple[float, float]:
        return pohozaev_residuals(self.d, self.b, self.sigma, self.mass_Q, self.kinetic_Q, self.nl_Q)

    @property
    def energy_Q(self) -> float:
        """E_b(Q) = ½‖∇Q‖² - N/(σ+2) (no potential, focusing sign)."""
        return 0.5 * self.kinetic_Q - self.nl_Q / (self.sigma + 2.0)

    @property
    def params(self) -> ProblemParams:
        return ProblemParams(self.d, 0, 1, self.b, self.sigma, -1)

    def scaled(self, factor: float) -> "GroundState":
        """The same record for factor·Q (used as a Pohozaev negative control)."""
        f = float(factor)
        return GroundState(
            self.d, self.b, self.sigma, self.q0 * f, self.profile * f,
            self.mass_Q * f * f, self.kinetic_Q * f * f, self.nl_Q * f ** (self.sigma + 2),
            self.r_cut, self.bracket_widths,
        )


def pohozaev_residuals(d, b, sigma, M, K, N) -> tuple[float, float]:
    top = 4.0 - 2.0 * b - (d - 2.0) * sigma
    r1 = abs(M - top / (d * sigma + 2.0 * b) * K) / M
    r2 = abs(M - top / (2.0 * (sigma + 2.0)) * N) / M
    return r1, r2


def pohozaev_check(gs: GroundState) -> tuple[float, float]:
    return gs.pohozaev_residuals


def _classify(q0, d, b, sigma, wd, cfg: ShootingConfig) -> int:
    outcome, _, _ = _shoot(q0, d, b, sigma, wd, cfg.h_max, cfg.r0, cfg.r_cap, cfg.blowup_factor, False)
    return outcome


def bisect_initial_value(d, b, sigma, cfg: ShootingConfig = ShootingConfig()):
    """Bracket Q(0) between the two shooting behaviours; returns (lo, hi, widths)."""
    wd = sphere_area(d)
    lo, hi = cfg.q_low, cfg.q_high
    c_lo = _classify(lo, d, b, sigma, wd, cfg)
    c_hi = _classify(hi, d, b, sigma, wd, cfg)
    if c_lo == c_hi or UNDECIDED in (c_lo, c_hi):
        raise NoBracket(f"no bracket found on [{lo}, {hi}]: outcomes {c_lo}, {c_hi}")
    widths = [hi - lo]
    while hi - lo > cfg.tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        c = _classify(mid, d, b, sigma, wd, cfg)
        if c == UNDECIDED:
            raise NoBracket(f"undecided shot at Q(0)={mid!r}")
        if c == c_lo:
            lo = mid
        else:
            hi = mid
        widths.append(hi - lo)
    return lo, hi, tuple(widths)


def _check_ground_state_range(d, b, sigma):
    p = ProblemParams(d, 0, 1, b, sigma, -1)
    if not (0 <= p.b < min(2, d)):
        raise WrongRegime(f"b={b} outside [0, min(2,d))")
    if not p.sigma < sigma_c(1, p):
        raise WrongRegime(f"wrong regime: sigma={sigma} is not below the energy-critical power")


def solve_ground_state(d: int, b, sigma, grid: RadialGrid | None = None,
                       cfg: ShootingConfig = ShootingConfig(), residual_tol: float = 1e-6) -> GroundState:
    _check_ground_state_range(d, b, sigma)
    b, sigma = float(b), float(sigma)
    grid = grid or RadialGrid(d)
    if grid.d != d:
        raise ValueError("grid dimension does not match d")
    wd = sphere_area(d)
    for attempt in range(3):
        lo, hi, widths = bisect_initial_value(d, b, sigma, cfg)
        gs = _assemble(d, b, sigma, lo, hi, widths, grid, wd, cfg)
        if max(gs.pohozaev_residuals) <= residual_tol:
            return gs
        cfg = ShootingConfig(**{**cfg.__dict__, "h_max": cfg.h_max / 2})
    raise ToleranceNotMet(f"Pohozaev residuals {gs.pohozaev_residuals} above {residual_tol}")


def _assemble(d, b, sigma, lo, hi, widths, grid, wd, cfg) -> GroundState:
    args = (d, b, sigma, wd, cfg.h_max, cfg.r0, cfg.r_cap, cfg.blowup_factor, True)
    _, n_lo, t_lo = _shoot(lo, *args)
    _, n_hi, t_hi = _shoot(hi, *args)
    n = min(n_lo, n_hi) + 1
    a, c = t_lo[:n], t_hi[:n]
    q = 0.5 * (a[:, 1] + c[:, 1])
    split = np.abs(a[:, 1] - c[:, 1]) > cfg.divergence * np.abs(q)
    split |= (a[:, 1] <= 0) | (c[:, 1] <= 0)
    cut = int(np.argmax(split)) - 1 if split.any() else n - 1
    # stay on the monotone decaying branch
    rising = np.nonzero(0.5 * (a[: cut + 1, 2] + c[: cut + 1, 2]) >= 0)[0]
    rising = rising[rising > 10]
    if rising.size:
        cut = min(cut, int(rising[0]) - 1)
    traj = 0.5 * (a[: cut + 1] + c[: cut + 1])
    r, Q, dQ = traj[:, 0], traj[:, 1], traj[:, 2]
    rc, qc = r[-1], Q[-1]
    # tail Q ≈ qc (rc/r)^{(d-1)/2} e^{-(r-rc)}: mass and kinetic tails agree to leading order
    tail = 0.5 * wd * qc * qc * rc ** (d - 1)
    M = traj[-1, 3] + tail
    K = traj[-1, 4] + tail
    N = traj[-1, 5]
    values = np.empty(grid.n)
    inside = grid.r <= rc
    values[inside] = CubicHermiteSpline(r, Q, dQ)(np.maximum(grid.r[inside], r[0]))
    ro = grid.r[~inside]
    values[~inside] = qc * (rc / ro) ** ((d - 1) / 2) * np.exp(-(ro - rc))
    q0 = 0.5 * (lo + hi)
    profile = RadialField(grid, values)
    return GroundState(d, b, sigma, q0, profile, float(M), float(K), float(N), float(rc), widths)


# --------------------------------------------------------------------------
# sharp Gagliardo–Nirenberg constant

def gn_exponents(d, b, sigma) -> tuple[float, float]:
    """Powers of ‖∇f‖ and ‖f‖ in the Gagliardo–Nirenberg inequality."""
    return (d * sigma + 2 * b) / 2.0, (4 - 2 * b - sigma * (d - 2)) / 2.0


def gn_quotient(K, M, N, d, b, sigma) -> float:
    """N / (‖∇f‖^α ‖f‖^β) from the squared norms K, M."""
    pa, pb = gn_exponents(d, b, sigma)
    return N / (K ** (pa / 2) * M ** (pb / 2))


def gn_quotient_field(u: RadialField, b, sigma) -> float:
    from .radial import inhomogeneous_term, kinetic, mass
    return gn_quotient(kinetic(u), mass(u), inhomogeneous_term(u, b, sigma), u.grid.d, float(b), float(sigma))


@dataclass(frozen=True)
class SharpConstants:
    c_gn: float | None = None
    c_hs: float | None = None
    provenance: dict = field(default_factory=dict)


def gn_constant(gs: GroundState, rel_tol: float = 1e-5) -> SharpConstants:
    d, b, sigma = gs.d, gs.b, gs.sigma
    p = gs.params
    regime = classify_regime(p)
    M, K, N = gs.mass_Q, gs.kinetic_Q, gs.nl_Q
    if regime is Regime.MassCritical:
        formula = (2 - b + d) / d * M ** (-(2 - b) / d)
        source = "mass-critical closed form"
    elif regime in (Regime.Intercritical, Regime.MassSubcritical):
        gc = float(gamma_c(p))
        formula = 2 * (sigma + 2) / (d * sigma + 2 * b) * (math.sqrt(K) * M ** (gc / 2)) ** (-(d * sigma - 4 + 2 * b) / 2)
        source = "Pohozaev closed form"
    else:
        raise WrongRegime(f"wrong regime for the GN constant: {regime.value}")
    quotient = gn_quotient(K, M, N, d, b, sigma)
    if abs(formula - quotient) > rel_tol * abs(formula):
        raise IdentityViolation(f"GN formula {formula!r} and quotient {quotient!r} disagree")
    return SharpConstants(c_gn=formula, provenance={"c_gn": source, "quotient_at_Q": quotient})


# --------------------------------------------------------------------------
# Hardy–Sobolev extremal

def _w_amplitude(d, b, eps):
    return (eps * (d - b) * (d - 2)) ** ((d - 2) / (4 - 2 * b))


def aubin_talenti_values(d: int, b: float, eps: float, r: np.ndarray) -> np.ndarray:
    q = 2.0 - b
    return _w_amplitude(d, b, eps) * (eps + np.asarray(r, dtype=float) ** q) ** (-(d - 2) / q)


def aubin_talenti_slope(d: int, b: float, eps: float, r: np.ndarray) -> np.ndarray:
    q = 2.0 - b
    r = np.asarray(r, dtype=float)
    return -_w_amplitude(d, b, eps) * (d - 2) * r ** (1 - b) * (eps + r ** q) ** (-(d - b) / q)


def _check_hs_range(d, b, eps=1.0):
    if d < 3:
        raise WrongRegime("the Hardy–Sobolev extremal needs d >= 3")
    if not 0 <= b < 2:
        raise WrongRegime(f"b={b} outside [0, 2)")
    if not eps > 0:
        raise ValueError("eps must be positive")


def aubin_talenti(d: int, b, eps: float, grid: RadialGrid) -> RadialField:
    b = float(b)
    _check_hs_range(d, b, eps)
    return RadialField(grid, aubin_talenti_values(d, b, eps, grid.r))


def power_integral(p, q, s, eps, R=0.0) -> float:
    """∫_R^∞ r^p (ε + r^q)^{-s} dr in closed form (incomplete beta)."""
    alpha = (p + 1.0) / q
    total = eps ** (alpha - s) * beta_fn(alpha, s - alpha) / q
    if R <= 0:
        return total
    x = R ** q / (eps + R ** q)
    return total * betainc(s - alpha, alpha, 1.0 - x)


def _cell_gauss(grid: RadialGrid, f, order: int = 6) -> float:
    """Composite Gauss–Legendre quadrature of f(r) dr over [0, r_max] cell by cell."""
    x, wts = np.polynomial.legendre.leggauss(order)
    h = grid.h
    centers = grid.r[:, None]
    pts = centers + 0.5 * h * x[None, :]
    return float(np.sum(f(pts) * wts[None, :]) * 0.5 * h)


@dataclass(frozen=True)
class HardySobolevReport:
    d: int
    b: float
    eps: float
    kinetic_W: float
    nl_W: float
    tail_kinetic: float
    tail_nl: float
    c_hs: float
    energy_W: float
    energy_W_direct: float
    relative_gap: float

    @property
    def constants(self) -> SharpConstants:
        return SharpConstants(c_hs=self.c_hs, provenance={"c_hs": "W_b norm identity"})


def hs_constant(d: int, b, grid: RadialGrid, eps: float = 1.0, rel_tol: float = 1e-5) -> HardySobolevReport:
    b = float(b)
    _check_hs_range(d, b, eps)
    wd = sphere_area(d)
    q = 2.0 - b
    sc2 = float(sigma_c(1, ProblemParams(d, 0, 1, b, 1, -1))) + 2.0
    A = _w_amplitude(d, b, eps)
    s = 2.0 * (d - b) / q

    def grad_integrand(r):
        return wd * r ** (d - 1) * aubin_talenti_slope(d, b, eps, r) ** 2

    def nl_integrand(r):
        return wd * r ** (d - 1 - b) * aubin_talenti_values(d, b, eps, r) ** sc2

    body_k = _cell_gauss(grid, grad_integrand)
    body_n = _cell_gauss(grid, nl_integrand)
    tail_k = wd * (A * (d - 2)) ** 2 * power_integral(d + 1 - 2 * b, q, s, eps, grid.r_max)
    tail_n = wd * A ** sc2 * power_integral(d - 1 - b, q, s, eps, grid.r_max)
    K = body_k + tail_k
    N = body_n + tail_n
    gap = abs(K - N) / K
    if gap > rel_tol:
        raise IdentityViolation(f"‖∇W‖²={K!r} and ∫|x|^-b W^(σc+2)={N!r} differ by {gap:.3g}")
    c_hs = K ** (-q / (2.0 * (d - b)))
    energy = q / (2.0 * (d - b)) * c_hs ** (-2.0 * (d - b) / q)
    direct = 0.5 * K - N / sc2
    return HardySobolevReport(d, b, eps, K, N, tail_k, tail_n, c_hs, energy, direct, gap)


def hs_closed_form(d: int, b: float, eps: float = 1.0) -> tuple[float, float]:
    """‖∇W_b‖² and ∫|x|^{-b}W_b^{σc+2} from the complete beta integrals."""
    wd = sphere_area(d)
    q = 2.0 - b
    A = _w_amplitude(d, b, eps)
    s = 2.0 * (d - b) / q
    sc2 = (4 - 2 * b) / (d - 2) + 2.0
    K = wd * (A * (d - 2)) ** 2 * power_integral(d + 1 - 2 * b, q, s, eps)
    N = wd * A ** sc2 * power_integral(d - 1 - b, q, s, eps)
    return K, N


def hs_quotient_field(u: RadialField, b) -> float:
    """(∫|x|^{-b}|f|^{σc+2})^{1/(σc+2)} / ‖∇f‖; bounded above by C_HS, equal at W_b.

    This is the orientation in which ‖∇W_b‖² = C_HS^{-2(d-b)/(2-b)} holds.
    """
    from .radial import inhomogeneous_term, kinetic
    d = u.grid.d
    sc = (4 - 2 * float(b)) / (d - 2)
    return inhomogeneous_term(u, b, sc) ** (1.0 / (sc + 2)) / math.sqrt(kinetic(u))


def aubin_talenti_residual(d: int, b, grid: RadialGrid, eps: float = 1.0, band: int = 16) -> float:
    """Relative dual-norm residual of ΔW + r^{-b} W^{σc+1} with the discrete Laplacian.

    The residual r = L W + w·f is measured as sqrt(rᵀ(-L)⁻¹r) against the same
    norm of w·f, i.e. in the discrete H^{-1} norm; the last ``band`` nodes are
    dropped because the closed form does not vanish at r_max.
    """
    import scipy.sparse.linalg as spla
    b = float(b)
    _check_hs_range(d, b, eps)
    W = aubin_talenti_values(d, b, eps, grid.r)
    sc = (4 - 2 * b) / (d - 2)
    f = grid.weights * grid.r ** (-b) * W ** (sc + 1)
    res = grid.stiffness_matrix @ W + f
    res[grid.n - band:] = 0.0
    f = f.copy()
    f[grid.n - band:] = 0.0
    lu = spla.splu((-grid.stiffness_matrix).tocsc())
    return float(math.sqrt(res @ lu.solve(res)) / math.sqrt(f @ lu.solve(f)))


# --------------------------------------------------------------------------
# constants ledger

class MissingLedgerEntry(LookupError):
    """A clause needs a constant that the ledger does not hold."""


def ledger_key(d: int, b, sigma) -> str:
    """'d,b,σ' with rationals written exactly (e.g. '3,1/2,1').

    Floats within 1e-12 of a fraction with denominator ≤ 1000 are keyed as that
    fraction, so 0.5 and 1/2 (or 2/3 and 0.666...) share an entry.
    """
    parts = [str(int(d))]
    for x in (as_number(b), as_number(sigma)):
        if isinstance(x, float):
            f = Fraction(x).limit_denominator(1000)
            x = as_number(f) if abs(float(f) - x) <= 1e-12 else x
        parts.append(repr(x) if isinstance(x, float) else str(x))
    return ",".join(parts)


class ConstantsLedger:
    """JSON document of ground-state and W_b constants keyed by (d, b, σ).

    Each entry may hold a ``ground_state`` section (Q norms, E_b(Q), C_GN) and an
    ``aubin_talenti`` section (‖∇W_b‖², E_b(W_b), C_HS).  Floats are written with
    ``repr`` precision so a write/read cycle is exact.
    """

    def __init__(self, entries: dict | None = None):
        self.entries: dict[str, dict] = {k: dict(v) for k, v in (entries or {}).items()}

    def add_ground_state(self, gs: GroundState, constants: SharpConstants | None = None) -> dict:
        r1, r2 = gs.pohozaev_residuals
        sec = {
            "q0": gs.q0,
            "mass_Q": gs.mass_Q,
            "kinetic_Q": gs.kinetic_Q,
            "nl_Q": gs.nl_Q,
            "energy_Q": gs.energy_Q,
            "pohozaev_residuals": [r1, r2],
        }
        if constants is not None and constants.c_gn is not None:
            sec["c_gn"] = constants.c_gn
        self.entries.setdefault(ledger_key(gs.d, gs.b, gs.sigma), {})["ground_state"] = sec
        return sec

    def add_aubin_talenti(self, rep: HardySobolevReport, sigma) -> dict:
        sec = {
            "eps": rep.eps,
            "kinetic_W": rep.kinetic_W,
            "energy_W": rep.energy_W,
            "c_hs": rep.c_hs,
            "relative_gap": rep.relative_gap,
        }
        self.entries.setdefault(ledger_key(rep.d, rep.b, sigma), {})["aubin_talenti"] = sec
        return sec

    def section(self, d: int, b, sigma, name: str) -> dict:
        key = ledger_key(d, b, sigma)
        try:
            return self.entries[key][name]
        except KeyError:
            raise MissingLedgerEntry(f"missing ledger entry: {name} for (d,b,sigma)=({key})") from None

    def ground_state(self, d: int, b, sigma) -> dict:
        return self.section(d, b, sigma, "ground_state")

    def aubin_talenti(self, d: int, b, sigma) -> dict:
        return self.section(d, b, sigma, "aubin_talenti")

    def to_json(self) -> str:
        return json.dumps(self.entries, indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ConstantsLedger":
        return cls(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "ConstantsLedger":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())
