"""Time integration of the radial equation with conservation and virial monitoring.

Two symmetric one-step schemes share the Crank–Nicolson machinery built on
the grid's symmetric stiffness matrix L and node weights W.  The singular
factors r^{-a} and r^{-b} enter as cell averages (``grid.power_weight``), so
the integrable singularity in the first cell is integrated, not sampled.

``midpoint`` (default)
    Implicit midpoint rule with the potential inside the linear operator
    H = L - W c r^{-a} and the nonlinearity in discrete-gradient form

        i W (u⁺ - u)/dt = -H m + λ W r^{-b} D(|u|², |u⁺|²) m,   m = (u + u⁺)/2,
        D(x, y) = (y^{σ/2+1} - x^{σ/2+1}) / ((σ/2+1)(y - x)).

    Mass and the discrete energy are conserved to the fixed-point tolerance.
    The nonlinear system is solved by fixed-point iteration on one fixed LU
    factorization.  A step is replaced by two half steps of the same scheme
    (recursively) when the iteration stops contracting or when the largest
    nonlinear phase increment dt·r^{-b}|u|^σ exceeds ``max_phase``; this keeps
    collapsing solutions resolved in time while the sampling stays uniform.

``strang``
    phase(dt/2) ∘ CN(dt) ∘ phase(dt/2), where ``phase`` multiplies each node
    by exp(-i τ (c r^{-a} + λ r^{-b} |u|^σ)).  Cheaper, but its splitting
    error is not controlled near the origin when a or b is positive.

Both schemes preserve |u| nodewise when the Laplacian is switched off
(``linear=False``) and satisfy step(-dt) ∘ step(dt) = id.  ``nonlinear=False``
drops the λ term, leaving the linear flow with its closed-form solutions.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .params import ProblemParams
from .radial import (
    RadialField,
    RadialGrid,
    SingularityError,
    VirialWeight,
    energy_parts,
    save_snapshot,
    virial_first_derivative,
    virial_second_derivative_identity,
    virial_value,
)

COMPLETED = "completed"
BLOWUP = "blowup_detected"
RESOLUTION_LOST = "resolution_lost"
SCHEMES = ("midpoint", "strang")


class StepError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimulationConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    monitor_stride: int = 10
    blowup_gradient_factor: float = 100.0
    resolution_guard: float = 4.0
    snapshot_stride: int = 0
    boundary_floor: float = 1e-10
    scheme: str = "midpoint"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if int(self.monitor_stride) != self.monitor_stride or self.monitor_stride < 1:
            raise ValueError("monitor_stride must be an integer >= 1")
        if self.snapshot_stride < 0:
            raise ValueError("snapshot_stride must be >= 0")
        if not self.blowup_gradient_factor > 1:
            raise ValueError("blowup_gradient_factor must exceed 1")
        if not self.resolution_guard > 0:
            raise ValueError("resolution_guard must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


def _check_singularities(grid: RadialGrid, params: ProblemParams) -> None:
    d = grid.d
    if params.c != 0 and float(params.a) >= d:
        raise SingularityError(f"non-integrable singularity: a={params.a} >= d={d}")
    if float(params.b) >= d:
        raise SingularityError(f"non-integrable singularity: b={params.b} >= d={d}")


def _factorize(A):
    try:
        return spla.splu(A.tocsc())
    except RuntimeError as exc:
        raise StepError(f"linear solve failed: {exc}") from exc


class StrangStepper:
    """phase(dt/2) ∘ Crank–Nicolson(dt) ∘ phase(dt/2)."""

    def __init__(self, grid: RadialGrid, params: ProblemParams, dt: float, linear: bool = True,
                 nonlinear: bool = True):
        _check_singularities(grid, params)
        self.grid, self.params, self.dt, self.linear = grid, params, float(dt), linear
        self._pot = float(params.c) * grid.power_weight(params.a) if params.c != 0 else np.zeros(grid.n)
        self._nl = params.lam * grid.power_weight(params.b) if nonlinear else np.zeros(grid.n)
        self._half_sigma = float(params.sigma) / 2.0
        self.substeps = 0
        if linear:
            W = sp.diags(grid.weights)
            L = grid.stiffness_matrix
            self._rhs = (W + 0.5j * self.dt * L).tocsr()
            self._lu = _factorize(W - 0.5j * self.dt * L)

    def phase(self, u: np.ndarray, tau: float) -> np.ndarray:
        dens = (u.real ** 2 + u.imag ** 2) ** self._half_sigma
        return u * np.exp(-1j * tau * (self._pot + self._nl * dens))

    def __call__(self, u: np.ndarray) -> np.ndarray:
        half = 0.5 * self.dt
        u = self.phase(u, half)
        if self.linear:
            u = self._lu.solve(self._rhs @ u)
        return self.phase(u, half)


def discrete_gradient(x: np.ndarray, y: np.ndarray, sigma: float) -> np.ndarray:
    """(y^e - x^e)/(e (y - x)) with e = σ/2 + 1, continuous across y = x."""
    e = sigma / 2.0 + 1.0
    out = np.empty_like(x)
    scale = np.maximum(x, y)
    close = np.abs(y - x) <= 1e-5 * scale
    far = ~close
    out[far] = (y[far] ** e - x[far] ** e) / (e * (y[far] - x[far]))
    xm = 0.5 * (x[close] + y[close])
    rel = np.divide(y[close] - x[close], xm, out=np.zeros_like(xm), where=xm > 0)
    out[close] = xm ** (e - 1.0) * (1.0 + (e - 1.0) * (e - 2.0) / 24.0 * rel ** 2)
    return out


class MidpointStepper:
    """Energy-conserving implicit midpoint step (see module docstring)."""

    def __init__(self, grid: RadialGrid, params: ProblemParams, dt: float, linear: bool = True,
                 nonlinear: bool = True, tol: float = 1e-14, max_iter: int = 60, max_depth: int = 16,
                 max_phase: float | None = 0.5):
        _check_singularities(grid, params)
        self.grid, self.params, self.dt, self.linear = grid, params, float(dt), linear
        self.nonlinear = nonlinear
        self.tol, self.max_iter, self.max_depth, self.max_phase = tol, max_iter, max_depth, max_phase
        w = grid.weights
        self._w = w
        self._nl = params.lam * grid.power_weight(params.b) if nonlinear else np.zeros(grid.n)
        self._sigma = float(params.sigma)
        H = -sp.diags(w * float(params.c) * grid.power_weight(params.a)) if params.c != 0 else sp.csr_matrix((grid.n, grid.n))
        if linear:
            H = grid.stiffness_matrix + H
        W = sp.diags(w)
        self._rhs = (W + 0.5j * self.dt * H).tocsr()
        self._lu = _factorize(W - 0.5j * self.dt * H)
        self._levels = [self]
        self.substeps = 0

    def _try(self, u: np.ndarray):
        with np.errstate(over="ignore", invalid="ignore"):
            return self._iterate(u)

    def _iterate(self, u: np.ndarray):
        w, dt, s = self._w, self.dt, self._sigma
        rhs = self._rhs @ u
        x = u.real ** 2 + u.imag ** 2
        coef = -1j * dt * w * self._nl
        v = self._lu.solve(rhs + coef * x ** (s / 2) * u)
        prev = math.inf
        stalls = 0
        for _ in range(self.max_iter):
            y = v.real ** 2 + v.imag ** 2
            vn = self._lu.solve(rhs + coef * discrete_gradient(x, y, s) * 0.5 * (u + v))
            diff = vn - v
            norm = float(np.dot(w, vn.real ** 2 + vn.imag ** 2))
            err = math.sqrt(float(np.dot(w, diff.real ** 2 + diff.imag ** 2)) / norm) if norm > 0 else 0.0
            v = vn
            if not (math.isfinite(err) and math.isfinite(norm)):
                return None
            if err < self.tol or (err < 1e3 * self.tol and err > 0.9 * prev):
                # converged, or stagnating at rounding level
                return v
            stalls = stalls + 1 if err >= prev else 0
            if stalls >= 3:
                return None
            prev = err
        return None

    def _level(self, m: int) -> "MidpointStepper":
        while len(self._levels) <= m:
            k = len(self._levels)
            self._levels.append(MidpointStepper(self.grid, self.params, self.dt / 2 ** k, self.linear,
                                                self.nonlinear, self.tol, self.max_iter, self.max_depth, self.max_phase))
        return self._levels[m]

    def _advance(self, u: np.ndarray, m: int) -> np.ndarray:
        if m > self.max_depth:
            raise StepError(f"no convergent sub-step down to dt/2^{self.max_depth}")
        st = self._level(m)
        if self.max_phase is None or st.dt * self.phase_rate(u) <= self.max_phase:
            v = st._try(u)
            if v is not None:
                return v
        self.substeps += 1
        return self._advance(self._advance(u, m + 1), m + 1)

    def phase_rate(self, u: np.ndarray) -> float:
        """Largest nonlinear rotation rate |r^{-b}| |u|^σ over the nodes."""
        return float(np.max(np.abs(self._nl) * (u.real ** 2 + u.imag ** 2) ** (self._sigma / 2)))

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self._advance(u, 0)


def make_stepper(grid: RadialGrid, params: ProblemParams, dt: float, scheme: str = "midpoint",
                 linear: bool = True, nonlinear: bool = True):
    """``linear=False`` drops the Laplacian, ``nonlinear=False`` the λ term."""
    if scheme == "midpoint":
        return MidpointStepper(grid, params, dt, linear, nonlinear)
    if scheme == "strang":
        return StrangStepper(grid, params, dt, linear, nonlinear)
    raise ValueError(f"unknown scheme {scheme!r}")


@lru_cache(maxsize=8)
def _cached_stepper(grid, params, dt, scheme, linear):
    return make_stepper(grid, params, dt, scheme, linear)


def step(u: RadialField, params: ProblemParams, dt: float, scheme: str = "midpoint",
         linear: bool = True) -> RadialField:
    out = _cached_stepper(u.grid, params, float(dt), scheme, linear)(np.asarray(u.values))
    if not np.all(np.isfinite(out)):
        raise StepError("non-finite values after step")
    return RadialField(u.grid, out)


@dataclass
class SimulationTrace:
    times: list = field(default_factory=list)
    mass_series: list = field(default_factory=list)
    energy_series: list = field(default_factory=list)
    kinetic_series: list = field(default_factory=list)
    virial_series: list = field(default_factory=list)
    virial_rate_series: list = field(default_factory=list)
    virial_second_series: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    termination: str = COMPLETED
    t_star: float | None = None
    dt: float = 0.0
    sample_interval: float = 0.0
    boundary_fraction_max: float = 0.0
    warnings: list = field(default_factory=list)
    final: RadialField | None = field(default=None, repr=False)

    @property
    def blowup(self) -> bool:
        return self.termination == BLOWUP

    def mass_drift(self) -> float:
        m = np.asarray(self.mass_series)
        return float(np.max(np.abs(m - m[0])) / m[0]) if m[0] > 0 else 0.0

    def energy_scale(self) -> float:
        """|E(0)|, or ‖∇u0‖² when the initial energy is nearly zero."""
        e0, k0 = abs(self.energy_series[0]), self.kinetic_series[0]
        return e0 if e0 > 1e-8 * k0 else k0

    def energy_drift(self) -> float:
        e = np.asarray(self.energy_series)
        scale = self.energy_scale()
        return float(np.max(np.abs(e - e[0])) / scale) if scale > 0 else 0.0

    def summary(self) -> dict:
        return {
            "termination": self.termination,
            "t_star_estimate": self.t_star,
            "t_star_is_lower_estimate": self.t_star is not None,
            "t_final": self.times[-1] if self.times else 0.0,
            "samples": len(self.times),
            "dt": self.dt,
            "mass_drift_max": self.mass_drift(),
            "energy_drift_max": self.energy_drift(),
            "kinetic_ratio_max": float(np.max(self.kinetic_series) / self.kinetic_series[0])
            if self.kinetic_series and self.kinetic_series[0] > 0 else None,
            "boundary_fraction_max": self.boundary_fraction_max,
            "warnings": list(self.warnings),
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "mass", "energy", "kinetic", "virial", "virial_rate", "flag"])
            for row in zip(self.times, self.mass_series, self.energy_series, self.kinetic_series,
                           self.virial_series, self.virial_rate_series, self.flags):
                w.writerow([_fmt(x) for x in row[:-1]] + [row[-1]])

    def write_summary(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def read_trace_csv(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = {k: [] for k in ("t", "mass", "energy", "kinetic", "virial", "virial_rate", "flag")}
    for row in rows:
        for k in out:
            v = row[k]
            out[k].append(v if k == "flag" else (float(v) if v != "" else None))
    return out


def simulate(u0: RadialField, params: ProblemParams, cfg: SimulationConfig,
             weight: VirialWeight | None = None, snapshot_dir: str | None = None,
             second_derivative: bool = False) -> SimulationTrace:
    grid = u0.grid
    stepper = make_stepper(grid, params, cfg.dt, cfg.scheme)
    trace = SimulationTrace(dt=cfg.dt, sample_interval=cfg.dt * cfg.monitor_stride)
    if float(params.a) == 2.0:
        trace.warnings.append("a=2 (inverse-square) lies outside the H1 well-posedness range; run is formal")
    u = np.array(u0.values)
    h = grid.h

    def record(t, field_, k_val, flag):
        parts = energy_parts(field_, params)
        trace.times.append(t)
        trace.mass_series.append(parts.mass)
        trace.energy_series.append(parts.energy)
        trace.kinetic_series.append(k_val)
        if weight is not None:
            trace.virial_series.append(virial_value(field_, weight))
            trace.virial_rate_series.append(virial_first_derivative(field_, weight))
            if second_derivative:
                trace.virial_second_series.append(virial_second_derivative_identity(field_, weight, params).total)
        else:
            trace.virial_series.append(None)
            trace.virial_rate_series.append(None)
        trace.flags.append(flag)
        trace.boundary_fraction_max = max(trace.boundary_fraction_max, field_.boundary_fraction())

    def kin(v):
        g = grid.face_gradient(v)
        return float(np.dot(grid.face_weights, g.real ** 2 + g.imag ** 2))

    k0 = kin(u)
    m0 = float(np.dot(grid.weights, np.abs(u) ** 2))
    record(0.0, u0, k0, "ok")
    trip_k = k0 * cfg.blowup_gradient_factor ** 2
    n_steps = cfg.n_steps
    for n in range(1, n_steps + 1):
        t = n * cfg.dt
        try:
            nxt = stepper(u)
        except StepError as exc:
            trace.warnings.append(f"step failed at t={t!r}: {exc}")
            nxt = None
        if nxt is None or not np.all(np.isfinite(nxt)):
            trace.termination = RESOLUTION_LOST
            trace.t_star = t
            break
        u = nxt
        k = kin(u)
        wavelength_nodes = 2 * math.pi * math.sqrt(m0 / k) / h if k > 0 else math.inf
        tripped = None
        if k0 > 0 and k >= trip_k:
            tripped = BLOWUP
        elif wavelength_nodes < cfg.resolution_guard:
            tripped = RESOLUTION_LOST
        if snapshot_dir and cfg.snapshot_stride and n % cfg.snapshot_stride == 0:
            save_snapshot(os.path.join(snapshot_dir, f"snapshot_{n:08d}.txt"), RadialField(grid, u))
        if tripped or n % cfg.monitor_stride == 0 or n == n_steps:
            record(t, RadialField(grid, u), k, tripped or "ok")
        if tripped:
            trace.termination = tripped
            trace.t_star = t
            break
    trace.final = RadialField(grid, u)
    if trace.boundary_fraction_max > cfg.boundary_floor:
        trace.warnings.append(
            f"boundary mass fraction {trace.boundary_fraction_max:.3g} exceeds {cfg.boundary_floor:g}"
        )
    return trace


@dataclass(frozen=True)
class VirialAudit:
    first_max_abs: float
    first_max_rel: float
    second_max_abs: float | None
    second_max_rel: float | None
    rate_at_zero: float
    fd_rate_at_zero: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def virial_consistency_audit(trace: SimulationTrace) -> VirialAudit:
    """Compare finite differences of V with the recorded first/second derivative formulas.

    Relative deviations are normalized by the largest recorded |derivative|.
    Only uniformly spaced samples (a completed run) are used.
    """
    if not trace.virial_series or trace.virial_series[0] is None:
        raise ValueError("trace has no virial series; run simulate with a weight")
    t = np.asarray(trace.times)
    V = np.asarray(trace.virial_series)
    rate = np.asarray(trace.virial_rate_series)
    dt = trace.sample_interval
    uniform = np.isclose(np.diff(t), dt, rtol=1e-6, atol=1e-12)
    m = len(t) if uniform.all() else int(np.argmin(uniform)) + 1
    t, V, rate = t[:m], V[:m], rate[:m]
    if m < 3:
        raise ValueError("need at least three uniformly spaced samples")
    fd = (V[2:] - V[:-2]) / (2 * dt)
    dev = np.abs(fd - rate[1:-1])
    first_abs = float(dev.max())
    first_rel = first_abs / float(np.max(np.abs(rate))) if np.any(rate) else first_abs
    second_abs = second_rel = None
    if trace.virial_second_series:
        acc = np.asarray(trace.virial_second_series[:m])
        fd2 = (V[2:] - 2 * V[1:-1] + V[:-2]) / dt ** 2
        dev2 = np.abs(fd2 - acc[1:-1])
        second_abs = float(dev2.max())
        second_rel = second_abs / float(np.max(np.abs(acc)))
    fd0 = (-3 * V[0] + 4 * V[1] - V[2]) / (2 * dt)
    return VirialAudit(first_abs, first_rel, second_abs, second_rel, float(rate[0]), float(fd0))
