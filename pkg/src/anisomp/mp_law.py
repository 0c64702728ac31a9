"""Deterministic spectral theory of anisotropic sample covariance matrices.

Everything here is driven by the self-consistent equation for the Stieltjes
transform m(z) of the deformed Marchenko-Pastur law,

    1/m = -z + d * (1/n) * sum_i sigma_i / (1 + m sigma_i),

solved on the upper half-plane and on the real boundary.  From m(z) we
recover the density via rho(E) = Im m(E + i0) / pi, locate the support edges
as critical values of the functional inverse z(m) on the real line, and
compute per-bulk masses and classical eigenvalue locations by quadrature.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    BranchViolation,
    DegenerateDenominator,
    EdgeDegeneracy,
    NonConvergence,
)

__all__ = [
    "SolverConfig",
    "PopulationSpectrum",
    "StieltjesValue",
    "SupportStructure",
    "RegularityReport",
    "solve_m2c",
    "solve_m2c_grid",
    "m2c_derivative",
    "density_rho2c",
    "support_structure",
    "support_edges",
    "regularity_check",
    "anisotropic_density",
    "anisotropic_density_from_weights",
    "null_mp_m2c",
    "null_mp_m2c_prime",
    "null_mp_edges",
    "read_spectrum_file",
    "write_spectrum_file",
]


@dataclass(frozen=True)
class SolverConfig:
    """Numerical knobs for the self-consistent solver.

    ``omega`` is the domain cutoff: boundary evaluations (eta = 0) require
    |E| >= omega.  ``eta0`` regularizes the eta -> 0+ limit; results are
    confirmed stable under halving eta0.
    """

    omega: float = 1e-2
    eta0: float = 1e-9
    damping: float = 0.5
    newton_switch: float = 1e-3
    residual_tol: float = 1e-12
    max_iter: int = 10_000


DEFAULT_SOLVER = SolverConfig()


@dataclass(frozen=True)
class PopulationSpectrum:
    """Eigenvalues of the population covariance plus the aspect ratio n/N.

    ``eigenvalues`` are stored descending; exact ties are merged into
    weighted atoms before any solve.  ``regularity_margin`` is the tau used
    by regularity checks and edge-degeneracy detection.
    """

    eigenvalues: tuple[float, ...]
    aspect_ratio: float
    regularity_margin: float = 0.05

    def __post_init__(self) -> None:
        vals = tuple(sorted((float(v) for v in self.eigenvalues), reverse=True))
        object.__setattr__(self, "eigenvalues", vals)
        if not vals:
            raise ValueError("population spectrum must contain at least one eigenvalue")
        if vals[-1] < 0.0:
            raise ValueError("population eigenvalues must be nonnegative")
        if not self.aspect_ratio > 0.0:
            raise ValueError("aspect ratio must be positive")
        if not 0.0 < self.regularity_margin < 1.0:
            raise ValueError("regularity margin must lie in (0, 1)")

    @classmethod
    def identity(cls, n: int, aspect_ratio: float, tau: float = 0.05) -> "PopulationSpectrum":
        return cls((1.0,) * n, aspect_ratio, tau)

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def sigma_max(self) -> float:
        return self.eigenvalues[0]

    def validate(self) -> None:
        """Enforce the tau-dependent admissibility bounds (raising)."""
        tau = self.regularity_margin
        if self.sigma_max > 1.0 / tau:
            raise ValueError("largest eigenvalue exceeds 1/tau")
        frac_small = sum(1 for v in self.eigenvalues if v <= tau) / self.n
        if frac_small > 1.0 - tau:
            raise ValueError("spectrum concentrates at zero beyond 1 - tau")
        if not tau <= self.aspect_ratio <= 1.0 / tau:
            raise ValueError("aspect ratio outside [tau, 1/tau]")


@dataclass(frozen=True)
class StieltjesValue:
    """Value of m(z) (and optionally m'(z)) with the fixed-point defect."""

    m: complex
    m_prime: complex | None = None
    residual: float = 0.0


@dataclass(frozen=True)
class SupportStructure:
    """Edges, per-bulk masses/counts and classical locations of the law.

    ``edges`` are descending (a1 > a2 > ... > a_{2L}); bulk k is the interval
    [edges[2k+1], edges[2k]].  ``classical_locations`` are descending, one per
    eigenvalue index j = 1..min(n, N).
    """

    edges: tuple[float, ...]
    bulk_masses: tuple[float, ...]
    bulk_counts: tuple[float, ...]
    classical_locations: tuple[float, ...]
    N: int

    @property
    def lambda_plus(self) -> float:
        return self.edges[0]

    @property
    def lambda_minus(self) -> float:
        return self.edges[-1]

    @property
    def bulks(self) -> tuple[tuple[float, float], ...]:
        return tuple(
            (self.edges[2 * k + 1], self.edges[2 * k]) for k in range(len(self.edges) // 2)
        )

    def contains(self, E: float, pad: float = 0.0) -> bool:
        return any(lo - pad <= E <= hi + pad for lo, hi in self.bulks)

    def distance(self, E: float) -> float:
        """Distance from E to the support (0 inside)."""
        d = math.inf
        for lo, hi in self.bulks:
            if lo <= E <= hi:
                return 0.0
            d = min(d, abs(E - lo), abs(E - hi))
        return d

    def to_dict(self) -> dict:
        return {
            "edges": list(self.edges),
            "bulk_counts": list(self.bulk_counts),
            "gamma": list(self.classical_locations),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


# ---------------------------------------------------------------------------
# atoms and elementary pieces of the self-consistent equation


@lru_cache(maxsize=256)
def _atoms(pop: PopulationSpectrum) -> tuple[np.ndarray, np.ndarray]:
    """Distinct nonzero eigenvalues and their weights count/n.

    Ties within relative 1e-12 are merged into one weighted atom (exact ties
    plus the floating-point scatter of eigensolver output); zero eigenvalues
    drop out of the equation entirely, so weights sum to the nonzero
    fraction.
    """
    vals = np.asarray(sorted(v for v in pop.eigenvalues if v > 0.0))
    groups: list[list[float]] = [[vals[0]]]
    for v in vals[1:]:
        if v - groups[-1][-1] <= 1e-12 * max(v, 1.0):
            groups[-1].append(v)
        else:
            groups.append([v])
    merged = np.array([float(np.mean(g)) for g in groups])
    weights = np.array([len(g) for g in groups], dtype=float) / pop.n
    order = np.argsort(merged)[::-1]
    return merged[order], weights[order]


def _avg_sigma(m: complex, vals: np.ndarray, wts: np.ndarray) -> complex:
    return complex(np.sum(wts * vals / (1.0 + m * vals)))


def _avg_sigma_sq(m: complex, vals: np.ndarray, wts: np.ndarray) -> complex:
    return complex(np.sum(wts * vals**2 / (1.0 + m * vals) ** 2))


def _defect(m: complex, z: complex, d: float, vals: np.ndarray, wts: np.ndarray) -> complex:
    """h(m) = 1/m + z - d * avg(sigma/(1+m sigma)); zero at the solution."""
    return 1.0 / m + z - d * _avg_sigma(m, vals, wts)


def _residual(m: complex, z: complex, d: float, vals: np.ndarray, wts: np.ndarray) -> float:
    # |1 - m * (-z + d*avg)| : the relative fixed-point defect.
    return abs(m * _defect(m, z, d, vals, wts))


def _newton_steps(
    m: complex,
    z: complex,
    d: float,
    vals: np.ndarray,
    wts: np.ndarray,
    tol: float,
    max_steps: int = 60,
) -> tuple[complex, float, int]:
    best_m, best_res = m, _residual(m, z, d, vals, wts)
    used = 0
    for _ in range(max_steps):
        used += 1
        h = _defect(m, z, d, vals, wts)
        hp = -1.0 / m**2 + d * _avg_sigma_sq(m, vals, wts)
        if hp == 0:
            break
        m_new = m - h / hp
        if not np.isfinite(m_new) or m_new == 0:
            break
        res = abs(m_new * _defect(m_new, z, d, vals, wts))
        m = m_new
        if res < best_res:
            best_m, best_res = m, res
        if res <= tol:
            return m, res, used
        if res > 1e3 * max(best_res, tol):
            break
    return best_m, best_res, used


def _solve_at(
    z: complex,
    d: float,
    vals: np.ndarray,
    wts: np.ndarray,
    cfg: SolverConfig,
    m0: complex | None = None,
) -> tuple[complex, float]:
    """Damped fixed point from m0 (default -1/z), sharpened by Newton."""
    m = m0 if m0 is not None else -1.0 / z
    budget = cfg.max_iter
    damping = cfg.damping
    while budget > 0:
        # fixed-point phase
        while budget > 0:
            budget -= 1
            denom = -z + d * _avg_sigma(m, vals, wts)
            if denom == 0 or not np.isfinite(denom):
                m = -1.0 / z * (1.0 + 1e-6j)
                continue
            t = 1.0 / denom
            step = t - m
            if abs(step) <= cfg.newton_switch * max(1.0, abs(m)):
                break
            m = m + damping * step
        m_new, res, used = _newton_steps(m, z, d, vals, wts, cfg.residual_tol)
        budget -= used
        if res <= cfg.residual_tol:
            return m_new, res
        # Newton stalled; tighten with more damped fixed-point iterations
        damping = max(0.1, damping / 2.0)
        m = m_new
        if budget <= 0:
            break
    raise NonConvergence(f"self-consistent solve failed at z={z!r} (residual {res:.3e})")


def _solve_ladder(
    z: complex,
    d: float,
    vals: np.ndarray,
    wts: np.ndarray,
    cfg: SolverConfig,
) -> tuple[complex, float]:
    """Continuation in eta for targets close to the real axis.

    The damped fixed point is globally stable high in the half-plane; we
    descend geometrically, warm-starting Newton at each rung.
    """
    E, eta = z.real, z.imag
    if eta >= 0.1:
        return _solve_at(z, d, vals, wts, cfg)
    m, res = _solve_at(complex(E, 1.0), d, vals, wts, cfg)
    rung = 1.0
    while rung > eta:
        rung = max(rung * 0.2, eta)
        zz = complex(E, rung)
        m, res = _newton_steps(m, zz, d, vals, wts, cfg.residual_tol)[:2]
        if res > cfg.residual_tol:
            m, res = _solve_at(zz, d, vals, wts, cfg, m0=m)
    return m, res


def _check_branch(z: complex, m: complex) -> None:
    if z.imag > 0:
        if m.imag < -1e-12:
            raise BranchViolation(f"Im m = {m.imag:.3e} < 0 at z = {z!r}")
        if (z * m).imag < -1e-10 * max(1.0, abs(z * m)):
            raise BranchViolation(f"Im(z m) < 0 at z = {z!r}")


# ---------------------------------------------------------------------------
# public solver entry points


def solve_m2c(
    z: complex,
    pop: PopulationSpectrum,
    config: SolverConfig = DEFAULT_SOLVER,
) -> StieltjesValue:
    """Solve the self-consistent equation at z = E + i*eta.

    ``Im z == 0`` encodes the boundary limit eta -> 0+: outside the support
    the returned value is polished to the exact real root; inside, it is the
    eta0-regularized boundary value.
    """
    z = complex(z)
    if z.imag < 0:
        raise ValueError("solve_m2c expects Im z >= 0; conjugate the result instead")
    vals, wts = _atoms(pop)
    d = pop.aspect_ratio
    if z.imag == 0.0:
        E = z.real
        if abs(E) < config.omega:
            raise ValueError(f"boundary evaluation requires |E| >= omega = {config.omega}")
        edges = _edges(pop)
        if _outside_edges(E, edges):
            m, res = _solve_real_outside(E, d, vals, wts, config)
            return StieltjesValue(m=complex(m), residual=res)
        # Boundary value inside a bulk: the eta -> 0 limit solves the
        # equation at real E with Im m > 0.  Descend in eta, then polish the
        # complex root directly at z = E (the root is isolated away from
        # edges, where z'(m) = 0).
        m0, _ = _solve_ladder(complex(E, config.eta0), d, vals, wts, config)
        m, res, _ = _newton_steps(m0, complex(E, 0.0), d, vals, wts, config.residual_tol)
        if res > config.residual_tol:
            raise NonConvergence(
                f"boundary polish failed at E={E} (residual {res:.3e}); "
                "the point may sit on a spectral edge"
            )
        if m.imag < -1e-12:
            raise BranchViolation(f"boundary value has Im m = {m.imag:.3e} < 0 at E={E}")
        return StieltjesValue(m=m, residual=res)
    m, res = _solve_ladder(z, d, vals, wts, config)
    _check_branch(z, m)
    return StieltjesValue(m=m, residual=res)


def _solve_real_outside(
    E: float,
    d: float,
    vals: np.ndarray,
    wts: np.ndarray,
    cfg: SolverConfig,
) -> tuple[float, float]:
    m_c, _ = _solve_ladder(complex(E, cfg.eta0), d, vals, wts, cfg)
    m = m_c.real
    for _ in range(80):
        h = (1.0 / m + E - d * float(np.sum(wts * vals / (1.0 + m * vals)))).real
        hp = -1.0 / m**2 + d * float(np.sum(wts * vals**2 / (1.0 + m * vals) ** 2))
        if hp == 0:
            break
        m_new = m - h / hp
        if not np.isfinite(m_new) or m_new == 0:
            break
        m = m_new
        if abs(m * h) <= cfg.residual_tol:
            break
    res = abs(m * (1.0 / m + E - d * float(np.sum(wts * vals / (1.0 + m * vals)))))
    if res > cfg.residual_tol:
        raise NonConvergence(f"real-axis polish failed at E={E} (residual {res:.3e})")
    return m, res


def solve_m2c_grid(
    energies: np.ndarray,
    eta: float,
    pop: PopulationSpectrum,
    config: SolverConfig = DEFAULT_SOLVER,
) -> np.ndarray:
    """Solve along a sorted grid of real energies at fixed eta > 0.

    Marches with warm starts; falls back to continuation where Newton fails.
    """
    energies = np.asarray(energies, dtype=float)
    vals, wts = _atoms(pop)
    d = pop.aspect_ratio
    out = np.empty(energies.shape, dtype=complex)
    m = None
    for k, E in enumerate(energies):
        zz = complex(E, eta)
        if m is not None:
            m_try, res, _ = _newton_steps(m, zz, d, vals, wts, config.residual_tol)
            if res <= config.residual_tol and (eta <= 0 or m_try.imag >= -1e-12):
                out[k] = m = m_try
                continue
        m, _ = _solve_ladder(zz, d, vals, wts, config)
        out[k] = m
    return out


def m2c_derivative(
    z: complex,
    pop: PopulationSpectrum,
    config: SolverConfig = DEFAULT_SOLVER,
) -> complex:
    """m'(z) by implicit differentiation of the self-consistent equation."""
    m = solve_m2c(z, pop, config).m
    vals, wts = _atoms(pop)
    denom = 1.0 / m**2 - pop.aspect_ratio * _avg_sigma_sq(m, vals, wts)
    if abs(denom) < 1e-10:
        raise DegenerateDenominator(f"implicit-function denominator vanishes at z = {z!r}")
    return 1.0 / denom


def density_rho2c(
    E: float,
    pop: PopulationSpectrum,
    config: SolverConfig = DEFAULT_SOLVER,
) -> float:
    """Density of the law at E: Im m(E + i0)/pi, exactly zero off-support."""
    if E < config.omega:
        raise ValueError(f"density requires E >= omega = {config.omega}")
    edges = _edges(pop)
    if _outside_edges(E, edges):
        return 0.0
    m = solve_m2c(complex(E, 0.0), pop, config).m
    return max(m.imag / math.pi, 0.0)


# ---------------------------------------------------------------------------
# support structure: edges, bulk masses, classical locations


def _zfun(m: np.ndarray, d: float, vals: np.ndarray, wts: np.ndarray) -> np.ndarray:
    s = np.sum(wts * vals / (1.0 + np.multiply.outer(m, vals)), axis=-1)
    return -1.0 / m + d * s


def _zprime(m: np.ndarray, d: float, vals: np.ndarray, wts: np.ndarray) -> np.ndarray:
    s2 = np.sum(wts * vals**2 / (1.0 + np.multiply.outer(m, vals)) ** 2, axis=-1)
    return 1.0 / m**2 - d * s2


def _interval_samples(lo: float, hi: float, n_side: int = 200) -> np.ndarray:
    """Geometric clustering toward both endpoints of a bounded interval."""
    width = hi - lo
    rel = np.geomspace(1e-9, 0.5, n_side)
    fracs = np.unique(np.concatenate([rel, 1.0 - rel]))
    return lo + width * fracs


@lru_cache(maxsize=128)
def _edges(pop: PopulationSpectrum) -> tuple[float, ...]:
    """Support edges: critical values of z(m) at real critical points.

    Between consecutive poles of z(m) (at m = -1/sigma_a and m = 0) the sign
    changes of z'(m) are bracketed on geometric grids and refined by brentq.
    """
    vals, wts = _atoms(pop)
    d = pop.aspect_ratio
    poles = np.sort(-1.0 / vals)  # ascending, negative
    scale = max(1.0, abs(poles[0]))

    segments: list[np.ndarray] = []
    segments.append(poles[0] - np.geomspace(1e-9 * scale, 1e4 * scale, 400))
    for lo, hi in zip(poles[:-1], poles[1:]):
        segments.append(_interval_samples(lo, hi))
    segments.append(_interval_samples(poles[-1], 0.0))
    segments.append(np.geomspace(1e-9, 1e6, 400))

    crit: list[float] = []
    for grid in segments:
        grid = np.sort(grid)
        with np.errstate(divide="ignore", invalid="ignore"):
            zp = _zprime(grid, d, vals, wts)
        ok = np.isfinite(zp)
        grid, zp = grid[ok], zp[ok]
        sign_flip = np.nonzero(np.sign(zp[:-1]) * np.sign(zp[1:]) < 0)[0]
        for i in sign_flip:
            try:
                m_star = brentq(
                    lambda mm: float(_zprime(np.array([mm]), d, vals, wts)[0]),
                    grid[i],
                    grid[i + 1],
                    xtol=1e-14,
                    rtol=8.9e-16,
                )
            except ValueError:
                continue
            crit.append(float(_zfun(np.array([m_star]), d, vals, wts)[0]))

    crit = sorted((c for c in crit if c > 0.0), reverse=True)
    if len(crit) % 2 != 0 or not crit:
        raise EdgeDegeneracy(
            f"edge finder located {len(crit)} critical values; support is degenerate"
        )
    for a, b in zip(crit[:-1], crit[1:]):
        if a - b < 1e-8:  # below the bisection reliability floor
            raise EdgeDegeneracy(f"edges {a} and {b} coincide within 1e-8")
    return tuple(crit)


def support_edges(pop: PopulationSpectrum) -> tuple[float, ...]:
    """Edges of the support in descending order (no regularity gating)."""
    return _edges(pop)


def _outside_edges(E: float, edges: Sequence[float]) -> bool:
    for k in range(len(edges) // 2):
        hi, lo = edges[2 * k], edges[2 * k + 1]
        if lo <= E <= hi:
            return False
    return True


_GL_NODES_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _GL_NODES_CACHE:
        _GL_NODES_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_NODES_CACHE[n]


@dataclass(frozen=True)
class _BulkQuadrature:
    """Composite Gauss data for one bulk, in the arcsine variable t.

    x(t) = mid + half*sin(t) removes the square-root edge singularities, so a
    modest composite Gauss rule reaches the 1e-9 mass tolerance.
    """

    lo: float
    hi: float
    t_bounds: np.ndarray  # panel boundaries in t
    cum_mass: np.ndarray  # cumulative integral of rho at panel boundaries
    mass: float

    def x_of_t(self, t: np.ndarray | float) -> np.ndarray | float:
        mid, half = 0.5 * (self.lo + self.hi), 0.5 * (self.hi - self.lo)
        return mid + half * np.sin(t)

    def t_of_x(self, x: float) -> float:
        mid, half = 0.5 * (self.lo + self.hi), 0.5 * (self.hi - self.lo)
        return math.asin(min(1.0, max(-1.0, (x - mid) / half)))


def _bulk_mass_panels(
    pop: PopulationSpectrum, lo: float, hi: float, panels: int, cfg: SolverConfig
) -> tuple[np.ndarray, np.ndarray, float]:
    nodes, weights = _gl(16)
    t_bounds = np.linspace(-math.pi / 2, math.pi / 2, panels + 1)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    t_all = np.concatenate(
        [0.5 * (a + b) + 0.5 * (b - a) * nodes for a, b in zip(t_bounds[:-1], t_bounds[1:])]
    )
    x_all = mid + half * np.sin(t_all)
    m_all = solve_m2c_grid(x_all, cfg.eta0, pop, cfg)
    rho_all = np.maximum(m_all.imag, 0.0) / math.pi
    jac = half * np.cos(t_all)
    per_panel = (rho_all * jac).reshape(panels, -1) @ weights * (
        0.5 * (t_bounds[1:] - t_bounds[:-1])
    )
    cum = np.concatenate([[0.0], np.cumsum(per_panel)])
    return t_bounds, cum, float(cum[-1])


@lru_cache(maxsize=64)
def _bulk_quadratures(pop: PopulationSpectrum) -> tuple[_BulkQuadrature, ...]:
    cfg = DEFAULT_SOLVER
    edges = _edges(pop)
    out = []
    for k in range(len(edges) // 2):
        hi, lo = edges[2 * k], edges[2 * k + 1]
        panels = 64
        t_b, cum, mass = _bulk_mass_panels(pop, lo, hi, panels, cfg)
        while panels < 1024:
            t_b2, cum2, mass2 = _bulk_mass_panels(pop, lo, hi, panels * 2, cfg)
            if abs(mass2 - mass) <= 1e-9:
                t_b, cum, mass = t_b2, cum2, mass2
                break
            panels *= 2
            t_b, cum, mass = t_b2, cum2, mass2
        out.append(_BulkQuadrature(lo=lo, hi=hi, t_bounds=t_b, cum_mass=cum, mass=mass))
    return tuple(out)


def _mass_below(bulk: _BulkQuadrature, x: float, pop: PopulationSpectrum, cfg: SolverConfig) -> float:
    """Integral of rho over [bulk.lo, x] using the cached panel prefix sums."""
    t = bulk.t_of_x(x)
    idx = int(np.searchsorted(bulk.t_bounds, t) - 1)
    idx = min(max(idx, 0), len(bulk.t_bounds) - 2)
    a = bulk.t_bounds[idx]
    nodes, weights = _gl(20)
    tt = 0.5 * (a + t) + 0.5 * (t - a) * nodes
    xx = np.asarray(bulk.x_of_t(tt))
    order = np.argsort(xx)
    m = np.empty_like(xx, dtype=complex)
    m[order] = solve_m2c_grid(xx[order], cfg.eta0, pop, cfg)
    rho = np.maximum(m.imag, 0.0) / math.pi
    mid, half = 0.5 * (bulk.lo + bulk.hi), 0.5 * (bulk.hi - bulk.lo)
    jac = half * np.cos(tt)
    return float(bulk.cum_mass[idx] + 0.5 * (t - a) * np.sum(weights * rho * jac))


def support_structure(
    pop: PopulationSpectrum,
    N: int,
    config: SolverConfig = DEFAULT_SOLVER,
) -> SupportStructure:
    """Edges, bulk masses/counts and classical locations for sample size N."""
    d = pop.aspect_ratio
    tau = pop.regularity_margin
    if abs(d - 1.0) < tau:
        raise ValueError("whole-support functionality requires |d - 1| >= tau")
    edges = _edges(pop)
    for a, b in zip(edges[:-1], edges[1:]):
        if a - b < tau:
            raise EdgeDegeneracy(f"edges {a} and {b} closer than tau = {tau}")
    bulks = _bulk_quadratures(pop)
    masses = tuple(b.mass for b in bulks)
    counts = tuple(N * m for m in masses)

    n = int(round(d * N))
    K = min(n, N)
    # Descending classical locations: 1 - F(gamma_j) = (j - 1/2)/N, so the
    # mass above gamma_j inside the bulks equals (j - 1/2)/N.
    gammas = np.empty(K)
    tail_above = 0.0  # mass above the current bulk
    j = 1
    for b in bulks:  # bulks come ordered top-down
        while j <= K:
            target_above = (j - 0.5) / N
            within = target_above - tail_above  # mass between gamma and b.hi
            if within > b.mass:
                break
            target_below = b.mass - within  # mass in [lo, gamma]
            gammas[j - 1] = _invert_mass(b, target_below, pop, config)
            j += 1
        tail_above += b.mass
    if j <= K:
        raise NonConvergence(
            f"classical locations exhausted the support mass at j={j} (K={K})"
        )
    gam = tuple(float(g) for g in gammas)
    return SupportStructure(
        edges=edges,
        bulk_masses=masses,
        bulk_counts=counts,
        classical_locations=gam,
        N=N,
    )


def _invert_mass(
    bulk: _BulkQuadrature, target: float, pop: PopulationSpectrum, cfg: SolverConfig
) -> float:
    """Safeguarded Newton for the x with mass([lo, x]) = target.

    The panel prefix sums give the bracket and the starting point; Newton
    uses the exact density as derivative, falling back to bisection whenever
    a step leaves the bracket.  Terminates at 1e-10 in x.
    """
    lo, hi = bulk.lo, bulk.hi
    if target <= 0.0:
        return lo
    if target >= bulk.mass:
        return hi
    idx = int(np.searchsorted(bulk.cum_mass, target)) - 1
    idx = min(max(idx, 0), len(bulk.t_bounds) - 2)
    a = float(np.asarray(bulk.x_of_t(bulk.t_bounds[idx])))
    b = float(np.asarray(bulk.x_of_t(bulk.t_bounds[idx + 1])))
    a, b = min(a, b), max(a, b)
    frac = (target - bulk.cum_mass[idx]) / max(
        bulk.cum_mass[idx + 1] - bulk.cum_mass[idx], 1e-300
    )
    x = a + frac * (b - a)
    for _ in range(60):
        f = _mass_below(bulk, x, pop, cfg) - target
        if f > 0:
            b = x
        else:
            a = x
        if b - a < 1e-10:
            break
        rho = max(
            solve_m2c_grid(np.array([x]), cfg.eta0, pop, cfg)[0].imag / math.pi, 0.0
        )
        x_new = x - f / rho if rho > 0 else 0.5 * (a + b)
        if not a < x_new < b:
            x_new = 0.5 * (a + b)
        if abs(x_new - x) < 1e-11:
            x = x_new
            break
        x = x_new
    return x


# ---------------------------------------------------------------------------
# regularity report


@dataclass(frozen=True)
class EdgeFlags:
    edge: float
    above_tau: bool
    gap_ok: bool
    no_pole_ok: bool
    min_abs_one_plus_m_sigma: float

    @property
    def passed(self) -> bool:
        return self.above_tau and self.gap_ok and self.no_pole_ok


@dataclass(frozen=True)
class BulkFlags:
    lo: float
    hi: float
    interior_density_min: float

    @property
    def passed(self) -> bool:
        return self.interior_density_min > 0.0


@dataclass(frozen=True)
class RegularityReport:
    tau: float
    aspect_ratio_ok: bool
    whole_support_ok: bool  # |d - 1| >= tau
    sigma_max_ok: bool
    zero_mass_ok: bool
    edge_flags: tuple[EdgeFlags, ...]
    bulk_flags: tuple[BulkFlags, ...]

    @property
    def passed(self) -> bool:
        return (
            self.aspect_ratio_ok
            and self.whole_support_ok
            and self.sigma_max_ok
            and self.zero_mass_ok
            and all(e.passed for e in self.edge_flags)
            and all(b.passed for b in self.bulk_flags)
        )


def regularity_check(
    pop: PopulationSpectrum,
    tau: float | None = None,
    tau_prime: float | None = None,
    config: SolverConfig = DEFAULT_SOLVER,
) -> RegularityReport:
    """Report-only evaluation of the edge/bulk regularity conditions."""
    tau = pop.regularity_margin if tau is None else tau
    tau_prime = tau if tau_prime is None else tau_prime
    d = pop.aspect_ratio
    frac_small = sum(1 for v in pop.eigenvalues if v <= tau) / pop.n

    edges = _edges(pop)
    sigmas = np.asarray(_atoms(pop)[0])
    edge_flags = []
    for a in edges:
        gaps = [abs(a - b) for b in edges if b != a]
        m_edge = solve_m2c(complex(a, config.eta0), pop, config).m
        min_abs = float(np.min(np.abs(1.0 + m_edge * sigmas)))
        edge_flags.append(
            EdgeFlags(
                edge=a,
                above_tau=a >= tau,
                gap_ok=(min(gaps) >= tau) if gaps else True,
                no_pole_ok=min_abs >= tau,
                min_abs_one_plus_m_sigma=min_abs,
            )
        )

    bulk_flags = []
    for k in range(len(edges) // 2):
        hi, lo = edges[2 * k], edges[2 * k + 1]
        a, b = lo + tau_prime, hi - tau_prime
        if a >= b:
            bulk_flags.append(BulkFlags(lo=lo, hi=hi, interior_density_min=0.0))
            continue
        xs = np.linspace(a, b, 101)
        m = solve_m2c_grid(xs, config.eta0, pop, config)
        bulk_flags.append(
            BulkFlags(lo=lo, hi=hi, interior_density_min=float(np.min(m.imag) / math.pi))
        )

    return RegularityReport(
        tau=tau,
        aspect_ratio_ok=tau <= d <= 1.0 / tau,
        whole_support_ok=abs(d - 1.0) >= tau,
        sigma_max_ok=pop.sigma_max <= 1.0 / tau,
        zero_mass_ok=frac_small <= 1.0 - tau,
        edge_flags=tuple(edge_flags),
        bulk_flags=tuple(bulk_flags),
    )


# ---------------------------------------------------------------------------
# anisotropic (direction-dependent) law


def anisotropic_density_from_weights(
    E: float,
    pop: PopulationSpectrum,
    sigmas: np.ndarray,
    weights: np.ndarray,
    config: SolverConfig = DEFAULT_SOLVER,
) -> float:
    """Direction-resolved density with the direction given as eigenbasis
    weights: sum_k w_k * rho(E) * sigma_k / (E * |1 + m(E) sigma_k|^2)."""
    edges = _edges(pop)
    if _outside_edges(E, edges):
        return 0.0
    m = solve_m2c(complex(E, 0.0), pop, config).m
    rho = max(m.imag / math.pi, 0.0)
    sigmas = np.asarray(sigmas, dtype=float)
    weights = np.asarray(weights, dtype=float)
    val = rho / E * float(np.sum(weights * sigmas / np.abs(1.0 + m * sigmas) ** 2))
    return max(val, 0.0)


def anisotropic_density(
    E: float,
    v: np.ndarray,
    pop: PopulationSpectrum,
    eigenvectors: np.ndarray | None = None,
    config: SolverConfig = DEFAULT_SOLVER,
) -> float:
    """Density of the anisotropic law along direction v.

    ``eigenvectors`` holds the population eigenvectors as columns, ordered to
    match pop.eigenvalues; None means the identity frame (diagonal Sigma).
    """
    v = as_unit_vector(v)
    if len(v) != pop.n:
        raise ValueError("direction vector length must equal the population dimension")
    vt = v if eigenvectors is None else eigenvectors.T @ v
    return anisotropic_density_from_weights(
        E, pop, np.asarray(pop.eigenvalues), vt**2, config
    )


def as_unit_vector(v: Iterable[float], tol: float = 1e-12) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    nrm = float(np.linalg.norm(v))
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"direction vector must have unit norm (got {nrm!r})")
    return v


# ---------------------------------------------------------------------------
# closed forms for the null population (Sigma = I)


def null_mp_edges(d: float) -> tuple[float, float]:
    """(lambda_plus, lambda_minus) = ((1 +- sqrt(d))^2)."""
    r = math.sqrt(d)
    return (1.0 + r) ** 2, (1.0 - r) ** 2


def null_mp_m2c(z: complex, d: float) -> complex:
    """Closed-form m(z) for Sigma = I with the upper-half-plane branch.

    The branch sqrt((z - lm)(z - lp)) is taken factorwise with principal
    square roots, which is the analytic continuation from Im z > 0; real E is
    handled through the +0i boundary convention.
    """
    lp, lm = null_mp_edges(d)
    z = complex(z)
    s = np.sqrt(complex(z - lm)) * np.sqrt(complex(z - lp))
    m = (-(z + 1.0 - d) + s) / (2.0 * z)
    return complex(m)


def null_mp_m2c_prime(z: complex, d: float) -> complex:
    """Closed-form m'(z) for Sigma = I via implicit differentiation."""
    m = null_mp_m2c(z, d)
    denom = 1.0 / m**2 - d / (1.0 + m) ** 2
    return 1.0 / denom


# ---------------------------------------------------------------------------
# population spectrum text format: header "d_N=<real>", one eigenvalue/line


def read_spectrum_file(path, tau: float = 0.05) -> PopulationSpectrum:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines or not lines[0].startswith("d_N="):
        raise ValueError(f"{path}: expected header line 'd_N=<real>'")
    d = float(lines[0].split("=", 1)[1])
    vals = tuple(float(ln) for ln in lines[1:])
    if not vals:
        raise ValueError(f"{path}: no eigenvalues found")
    return PopulationSpectrum(vals, d, tau)


def write_spectrum_file(path, pop: PopulationSpectrum) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"d_N={pop.aspect_ratio!r}\n")
        for v in pop.eigenvalues:
            fh.write(f"{v!r}\n")
