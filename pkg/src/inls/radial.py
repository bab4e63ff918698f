"""Radial grids, fields, quadrature and the energy/virial functionals.

Fields live on a staggered grid r_j = (j + 1/2) h, j = 0..n-1, with h = r_max/n,
so the origin is never a node.  Integrals over R^d use the weights
w_j = |S^{d-1}| r_j^{d-1} h.

Derivatives live on the faces r_m = m h, m = 1..n, and are computed with the
fourth-order staggered stencil

    g_m = (27 (u_m - u_{m-1}) - (u_{m+1} - u_{m-2})) / (24 h)

using even ghosts u_{-1} = u_0, u_{-2} = u_1 at the origin and homogeneous
Dirichlet ghosts u_n = u_{n+1} = 0 at r_max.  The discrete Laplacian is the
variational operator L = -|S^{d-1}| h G^T diag(r_m^{d-1}) G, so that
<u, L u> = -kinetic(u) holds exactly and L is symmetric: Crank–Nicolson with
L conserves the weighted mass to rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicSpline, CubicHermiteSpline
from scipy.special import gamma as gamma_fn

from .params import ProblemParams


class SingularityError(ValueError):
    """A weight |x|^{-a} with a >= d is not locally integrable."""


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d (2 for d = 1)."""
    return 2.0 * math.pi ** (d / 2) / gamma_fn(d / 2)


@dataclass(frozen=True)
class RadialGrid:
    d: int
    n: int = 4096
    r_max: float = 32.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.n < 8:
            raise ValueError("need at least 8 cells")
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")
        object.__setattr__(self, "r_max", float(self.r_max))

    @property
    def h(self) -> float:
        return self.r_max / self.n

    @cached_property
    def r(self) -> np.ndarray:
        r = (np.arange(self.n) + 0.5) * self.h
        r.flags.writeable = False
        return r

    @cached_property
    def faces(self) -> np.ndarray:
        f = np.arange(1, self.n + 1) * self.h
        f.flags.writeable = False
        return f

    @property
    def omega_d(self) -> float:
        return sphere_area(self.d)

    @cached_property
    def weights(self) -> np.ndarray:
        w = self.omega_d * self.r ** (self.d - 1) * self.h
        w.flags.writeable = False
        return w

    @cached_property
    def face_weights(self) -> np.ndarray:
        """Quadrature weights for face-located integrands."""
        w = self.omega_d * self.faces ** (self.d - 1) * self.h
        w.flags.writeable = False
        return w

    def power_weight(self, p: float) -> np.ndarray:
        """Cell average of r^{-p} against the node weights.

        w_j · power_weight(p)_j = ω_d ∫_cell r^{d-1-p} dr exactly, so singular
        weights are integrated without the O(h^{d-p}) error of point sampling.
        """
        p = float(p)
        if p == 0.0:
            return np.ones(self.n)
        return self._power_weight(p)

    def _power_weight(self, p: float) -> np.ndarray:
        cache = self.__dict__.setdefault("_power_cache", {})
        if p not in cache:
            if p >= self.d:
                raise SingularityError(f"non-integrable singularity: r^-{p} in d={self.d}")
            e = self.d - p
            hi = self.faces
            lo = hi - self.h
            w = self.omega_d * (hi ** e - lo ** e) / e / self.weights
            w.flags.writeable = False
            cache[p] = w
        return cache[p]

    def integrate(self, f: np.ndarray) -> float:
        return float(np.dot(self.weights, f))

    def _pad(self, u: np.ndarray) -> np.ndarray:
        return np.concatenate((u[1::-1], u, np.zeros(2, dtype=u.dtype)))

    def face_gradient(self, u: np.ndarray) -> np.ndarray:
        """∂_r u at the faces r_m = m h, m = 1..n."""
        n = self.n
        P = self._pad(np.asarray(u))
        return (27.0 * (P[3:n + 3] - P[2:n + 2]) - (P[4:n + 4] - P[1:n + 1])) / (24.0 * self.h)

    def face_values(self, u: np.ndarray) -> np.ndarray:
        """Fourth-order interpolation of node values to the faces."""
        n = self.n
        P = self._pad(np.asarray(u))
        return (9.0 * (P[3:n + 3] + P[2:n + 2]) - (P[4:n + 4] + P[1:n + 1])) / 16.0

    @cached_property
    def gradient_matrix(self) -> sp.csr_matrix:
        n, h = self.n, self.h
        m = np.arange(1, n + 1)
        rows, cols, vals = [], [], []
        for offset, coef in ((0, 27.0), (-1, -27.0), (1, -1.0), (-2, 1.0)):
            j = m + offset
            j = np.where(j == -1, 0, np.where(j == -2, 1, j))
            keep = j < n
            rows.append(m[keep] - 1)
            cols.append(j[keep])
            vals.append(np.full(keep.sum(), coef / (24.0 * h)))
        G = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        )
        return G.tocsr()

    @cached_property
    def stiffness_matrix(self) -> sp.csc_matrix:
        """L with <u, L u> = -kinetic(u); Δ_h = diag(w)^{-1} L."""
        G = self.gradient_matrix
        F = sp.diags(self.face_weights)
        return (-(G.T @ F @ G)).tocsc()

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        return (self.stiffness_matrix @ u) / self.weights


@dataclass(frozen=True, eq=False)
class RadialField:
    """Immutable complex amplitude on a radial grid."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite values")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: RadialGrid, f: Callable[[np.ndarray], np.ndarray]) -> "RadialField":
        return cls(grid, f(np.asarray(grid.r)))

    @classmethod
    def gaussian(cls, grid: RadialGrid, amplitude: float = 1.0, width: float = 1.0) -> "RadialField":
        return cls(grid, amplitude * np.exp(-grid.r ** 2 / (2.0 * width ** 2)))

    @classmethod
    def zeros(cls, grid: RadialGrid) -> "RadialField":
        return cls(grid, np.zeros(grid.n))

    def __mul__(self, z) -> "RadialField":
        return RadialField(self.grid, self.values * z)

    __rmul__ = __mul__

    def with_phase(self, theta: float) -> "RadialField":
        return RadialField(self.grid, self.values * np.exp(1j * theta))

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    def boundary_fraction(self, cells: int = 16) -> float:
        """Share of the mass carried by the outermost ``cells`` nodes."""
        dens = self.grid.weights * np.abs(self.values) ** 2
        total = dens.sum()
        return float(dens[-cells:].sum() / total) if total > 0 else 0.0

    def check_boundary(self, floor: float = 1e-10, cells: int = 16) -> bool:
        return self.boundary_fraction(cells) <= floor


# --------------------------------------------------------------------------
# functionals

def _require_integrable(exponent, d: int, name: str) -> None:
    if exponent >= d:
        raise SingularityError(f"non-integrable singularity: {name}={exponent} >= d={d}")


def mass(u: RadialField) -> float:
    return u.grid.integrate(np.abs(u.values) ** 2)


def kinetic(u: RadialField) -> float:
    """‖∇u‖² (no factor 1/2)."""
    g = u.grid.face_gradient(u.values)
    return float(np.dot(u.grid.face_weights, np.abs(g) ** 2))


def potential_term(u: RadialField, a) -> float:
    """∫ |x|^{-a} |u|² dx."""
    a = float(a)
    _require_integrable(a, u.grid.d, "a")
    return u.grid.integrate(u.grid.power_weight(a) * np.abs(u.values) ** 2)


def inhomogeneous_term(u: RadialField, b, sigma) -> float:
    """∫ |x|^{-b} |u|^{σ+2} dx."""
    b, sigma = float(b), float(sigma)
    _require_integrable(b, u.grid.d, "b")
    return u.grid.integrate(u.grid.power_weight(b) * np.abs(u.values) ** (sigma + 2))


@dataclass(frozen=True)
class EnergyParts:
    kinetic: float
    potential: float
    nonlinear: float
    energy: float
    mass: float

    def as_dict(self) -> dict:
        return dict(kinetic=self.kinetic, potential=self.potential, nonlinear=self.nonlinear,
                    energy=self.energy, mass=self.mass)


def energy_parts(u: RadialField, params: ProblemParams) -> EnergyParts:
    K = kinetic(u)
    P = potential_term(u, params.a) if params.c != 0 else 0.0
    N = inhomogeneous_term(u, params.b, params.sigma)
    sigma = float(params.sigma)
    E = 0.5 * K + 0.5 * float(params.c) * P + params.lam / (sigma + 2.0) * N
    return EnergyParts(K, P, N, E, mass(u))


def energy(u: RadialField, params: ProblemParams) -> float:
    return energy_parts(u, params).energy


def functional_G(u: RadialField, params: ProblemParams) -> float:
    """8‖∇u‖² + 2c(dσ+2b)∫|x|^{-a}|u|² - 4(dσ+2b)/(σ+2) ∫|x|^{-b}|u|^{σ+2}."""
    parts = energy_parts(u, params)
    return _G_from_parts(parts, params)


def _G_from_parts(parts: EnergyParts, params: ProblemParams) -> float:
    d, b, sigma, c = params.d, float(params.b), float(params.sigma), float(params.c)
    k = d * sigma + 2 * b
    return 8.0 * parts.kinetic + 2.0 * c * k * parts.potential - 4.0 * k / (sigma + 2) * parts.nonlinear


def functional_G_energy_form(u: RadialField, params: ProblemParams) -> float:
    """4(dσ+2b) E(u) - 2(dσ+2b-4)‖∇u‖², with E taken in its focusing form."""
    foc = params.replace(lam=-1)
    parts = energy_parts(u, foc)
    k = params.d * float(params.sigma) + 2 * float(params.b)
    return 4.0 * k * parts.energy - 2.0 * (k - 4.0) * parts.kinetic


# --------------------------------------------------------------------------
# virial weights

# C² bridge from r² on [0,1] to the plateau value 2 on [2,∞), in s = r - 1.
_QUADRATIC_BRIDGE = Polynomial([1.0, 2.0, 1.0, -5.0, 4.0, -1.0])


@dataclass(frozen=True, eq=False)
class _Piecewise:
    """Piecewise polynomial φ on [0, ∞) in the unit-R variable."""

    breaks: tuple[float, ...]
    pieces: tuple[Polynomial, ...]

    def deriv(self, x: np.ndarray, order: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(np.asarray(self.breaks), x, side="right")
        out = np.zeros_like(x)
        for i, p in enumerate(self.pieces):
            mask = idx == i
            if mask.any():
                out[mask] = p.deriv(order)(x[mask]) if order else p(x[mask])
        return out


def _quadratic_profile() -> _Piecewise:
    shift = Polynomial([-1.0, 1.0])
    return _Piecewise((1.0, 2.0), (Polynomial([0.0, 0.0, 1.0]), _QUADRATIC_BRIDGE(shift), Polynomial([2.0])))


def _mass_critical_profile(k: int) -> _Piecewise:
    """φ = ∫ v with v = 2x, 2x - 2(x-1)^k, a monotone cubic down to 0 at x = 2, then 0."""
    if k < 2:
        raise ValueError("stiffness k must be an integer >= 2")
    x_star = 1.0 + (1.0 / k) ** (1.0 / (k - 1))
    v1 = Polynomial([0.0, 2.0])
    v2 = v1 - 2.0 * Polynomial([-1.0, 1.0]) ** k
    v_star = float(v2(x_star))
    # cubic Hermite from (x_star, v_star) to (2, 0) with zero end slopes
    t = Polynomial([-x_star, 1.0]) / (2.0 - x_star)
    v3 = v_star * (1.0 - 3.0 * t ** 2 + 2.0 * t ** 3)
    v4 = Polynomial([0.0])
    pieces, lower, const = [], [0.0, 1.0, x_star, 2.0], 0.0
    for v, x0 in zip((v1, v2, v3, v4), lower):
        phi = v.integ()
        phi = phi - phi(x0) + const
        pieces.append(phi)
        nxt = {0.0: 1.0, 1.0: x_star, x_star: 2.0}.get(x0)
        if nxt is not None:
            const = float(phi(nxt))
    return _Piecewise((1.0, x_star, 2.0), tuple(pieces))


@dataclass(frozen=True, eq=False)
class VirialWeight:
    """Localized radial weight ω(r) = R² φ(r/R) tabulated on a grid.

    ``kind`` is ``"quadratic"`` (r² near the origin, constant beyond 2R) or
    ``"mass_critical"`` (φ' = R v(r/R) with a stiffness exponent ``k``).
    """

    grid: RadialGrid
    kind: str
    R: float
    k: int | None = None
    profile: _Piecewise = field(repr=False, default=None)

    @classmethod
    def quadratic(cls, grid: RadialGrid, R: float) -> "VirialWeight":
        return cls(grid, "quadratic", float(R), None, _quadratic_profile())

    @classmethod
    def mass_critical(cls, grid: RadialGrid, R: float, k: int = 4) -> "VirialWeight":
        return cls(grid, "mass_critical", float(R), int(k), _mass_critical_profile(int(k)))

    def derivative(self, r: np.ndarray, order: int = 0) -> np.ndarray:
        """d^order ω / dr^order at radii r."""
        R = self.R
        return R ** (2 - order) * self.profile.deriv(np.asarray(r, dtype=float) / R, order)

    def laplacian_at(self, r: np.ndarray) -> np.ndarray:
        d = self.grid.d
        return self.derivative(r, 2) + (d - 1) * self.derivative(r, 1) / r

    def laplacian_slope_at(self, r: np.ndarray) -> np.ndarray:
        """(Δω)'(r) = ω''' + (d-1)(ω''/r - ω'/r²)."""
        d = self.grid.d
        w1, w2, w3 = (self.derivative(r, k) for k in (1, 2, 3))
        return w3 + (d - 1) * (w2 / r - w1 / r ** 2)

    def bilaplacian_at(self, r: np.ndarray) -> np.ndarray:
        """Δ²ω = (Δω)'' + (d-1)(Δω)'/r, piecewise (ignores jumps of ω''')."""
        d = self.grid.d
        w1, w2, w3, w4 = (self.derivative(r, k) for k in (1, 2, 3, 4))
        slope = w3 + (d - 1) * (w2 / r - w1 / r ** 2)
        curv = w4 + (d - 1) * (w3 / r - 2 * w2 / r ** 2 + 2 * w1 / r ** 3)
        return curv + (d - 1) * slope / r

    @cached_property
    def omega(self) -> np.ndarray:
        return self.derivative(self.grid.r, 0)

    @cached_property
    def d_omega(self) -> np.ndarray:
        return self.derivative(self.grid.r, 1)

    @cached_property
    def d2_omega(self) -> np.ndarray:
        return self.derivative(self.grid.r, 2)

    @cached_property
    def lap_omega(self) -> np.ndarray:
        return self.laplacian_at(self.grid.r)

    @cached_property
    def bilap_omega(self) -> np.ndarray:
        return self.bilaplacian_at(self.grid.r)

    def inequality_margins(self) -> dict:
        """Minimum over nodes of 2 - ω'', 2 - ω'/r and 2d - Δω."""
        r = self.grid.r
        return {
            "2-phi''": float(np.min(2.0 - self.d2_omega)),
            "2-phi'/r": float(np.min(2.0 - self.d_omega / r)),
            "2d-lap(phi)": float(np.min(2.0 * self.grid.d - self.lap_omega)),
        }


def virial_value(u: RadialField, w: VirialWeight) -> float:
    return u.grid.integrate(w.omega * np.abs(u.values) ** 2)


def virial_first_derivative(u: RadialField, w: VirialWeight) -> float:
    """2 ∫ ω'(r) Im(ū ∂_r u) dx, evaluated on the faces."""
    g = u.grid
    uf = g.face_values(u.values)
    du = g.face_gradient(u.values)
    dw = w.derivative(g.faces, 1)
    return float(2.0 * np.dot(g.face_weights, dw * np.imag(np.conj(uf) * du)))


@dataclass(frozen=True)
class TermBreakdown:
    """Named pieces of the localized second virial derivative.

    ``total`` is the exact second derivative of V_ω; ``G`` and
    ``potential_correction`` are the comparison pieces of the localized
    upper bound (their sum is the bound up to R-dependent remainders).
    """

    bilaplacian: float
    gradient_radial: float
    gradient_angular: float
    potential_localized: float
    potential_full: float
    nonlinear_drift: float
    nonlinear_laplacian: float
    G: float
    potential_correction: float

    @property
    def total(self) -> float:
        return (self.bilaplacian + self.gradient_radial + self.gradient_angular + self.potential_localized
                + self.potential_full + self.nonlinear_drift + self.nonlinear_laplacian)

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["total"] = self.total
        return out


def virial_second_derivative_identity(u: RadialField, w: VirialWeight, params: ProblemParams) -> TermBreakdown:
    """Term-by-term d²V_ω/dt² for a solution of the equation with parameters ``params``.

    The nonlinear pieces carry the factor -λ so that the focusing case
    λ = -1 has the familiar signs; the bi-Laplacian term is evaluated in
    the integrated-by-parts form ∫ (Δω)' ∂_r|u|² dx, which is insensitive to
    jumps of ω''' between the pieces of the weight.
    """
    g = u.grid
    d = g.d
    a, b, c = float(params.a), float(params.b), float(params.c)
    sigma = float(params.sigma)
    if c != 0:
        _require_integrable(a, d, "a")
    _require_integrable(b, d, "b")
    rf = g.faces
    uf = g.face_values(u.values)
    du = g.face_gradient(u.values)
    fw = g.face_weights
    grad2 = np.abs(du) ** 2

    bilap = float(np.dot(fw, w.laplacian_slope_at(rf) * 2.0 * np.real(np.conj(uf) * du)))
    w1f = w.derivative(rf, 1)
    w2f = w.derivative(rf, 2)
    grad_radial = 4.0 * float(np.dot(fw, (w1f / rf) * grad2))
    grad_ang = 4.0 * float(np.dot(fw, (w2f - w1f / rf) * grad2))

    r = g.r
    dens = np.abs(u.values) ** 2
    ratio = w.d_omega / r
    ra = g.power_weight(a) if c != 0 else np.ones(g.n)
    pot_loc = -2.0 * a * c * g.integrate((2.0 - ratio) * ra * dens)
    P = g.integrate(ra * dens)
    pot_full = 4.0 * a * c * P
    nl = g.power_weight(b) * dens ** (sigma / 2 + 1)
    s = -params.lam
    nl_drift = s * (-4.0 * b / (sigma + 2)) * g.integrate(ratio * nl)
    nl_lap = s * (-2.0 * sigma / (sigma + 2)) * g.integrate(w.lap_omega * nl)
    G = functional_G(u, params)
    corr = -2.0 * c * (d * sigma + 2 * b - 2 * a) * P
    return TermBreakdown(bilap, grad_radial, grad_ang, pot_loc, pot_full, nl_drift, nl_lap, G, corr)


# --------------------------------------------------------------------------
# resampling and snapshots

def resample(u: RadialField, grid: RadialGrid) -> RadialField:
    """Cubic interpolation of ``u`` onto another grid (zero beyond u's box)."""
    return RadialField(grid, evaluate(u, grid.r))


def evaluate(u: RadialField, radii: np.ndarray) -> np.ndarray:
    """Evaluate u at arbitrary radii with an even-reflected cubic spline."""
    r = u.grid.r
    xs = np.concatenate((-r[::-1], r, [u.grid.r_max]))
    vals = np.concatenate((u.values[::-1], u.values, [0.0]))
    radii = np.asarray(radii, dtype=float)
    out = np.zeros(radii.shape, dtype=complex)
    inside = radii < u.grid.r_max
    re = CubicSpline(xs, vals.real)(radii[inside])
    im = CubicSpline(xs, vals.imag)(radii[inside])
    out[inside] = re + 1j * im
    return out


def scaled(u: RadialField, mu: float, exponent: float, grid: RadialGrid | None = None) -> RadialField:
    """x ↦ μ^exponent u(μ x) sampled on ``grid`` (default: u's grid)."""
    grid = grid or u.grid
    return RadialField(grid, mu ** exponent * evaluate(u, mu * grid.r))


def hermite_profile(r_data, q, dq, grid: RadialGrid) -> np.ndarray:
    """Sample a profile known with derivatives at r_data onto the grid nodes."""
    return CubicHermiteSpline(r_data, q, dq)(grid.r)


def save_snapshot(path, u: RadialField) -> None:
    """Columnar text: header '# d n r_max' then rows 'r Re(u) Im(u)' with repr floats."""
    g = u.grid
    lines = [f"# {g.d} {g.n} {g.r_max!r}"]
    for rj, z in zip(g.r, u.values):
        lines.append(f"{float(rj)!r} {float(z.real)!r} {float(z.imag)!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_snapshot(path) -> RadialField:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if not header or header[0] != "#" or len(header) != 4:
            raise ValueError(f"{path}: missing '# d n r_max' header")
        d, n, r_max = int(header[1]), int(header[2]), float(header[3])
        rows = [line.split() for line in fh if line.strip()]
    if len(rows) != n:
        raise ValueError(f"{path}: expected {n} rows, found {len(rows)}")
    grid = RadialGrid(d, n, r_max)
    re = np.array([float(x[1]) for x in rows])
    im = np.array([float(x[2]) for x in rows])
    r = np.array([float(x[0]) for x in rows])
    if not np.allclose(r, grid.r, rtol=1e-12, atol=0):
        raise ValueError(f"{path}: node radii do not match the header grid")
    return RadialField(grid, re + 1j * im)
