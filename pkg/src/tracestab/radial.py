"""Radial minimizers of the trace quotient on balls and spherical shells.

The Euler-Lagrange equation ``(r^{d-1} φ_p(Ψ'))' = k r^{d-1} Ψ^{p-1}`` is
integrated in flux form.  With ``m = r^{d-1} Ψ'^{p-1}`` the system reads

    m'  = k r^{d-1} Ψ^{p-1}
    Ψ'  = (m / r^{d-1})^{1/(p-1)}

where ``k = 1`` for the trace problem and ``k = |λ|`` for the Robin-Neumann
eigenvalue problem.  Energies are carried along as two extra states so that
the quotient comes out of the same RK4 sweep.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Union

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq


class SolverDivergenceError(ArithmeticError):
    """Non-finite state encountered while integrating the radial system."""


class RootNotBracketedError(RuntimeError):
    """Robin residual does not change sign on the search interval."""


class LevelDomainError(ValueError):
    """Level outside the range ``[z_m, z_M]`` of the profile."""


def sphere_area(d: int) -> float:
    """Surface measure ``d ω_d`` of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


@dataclass(frozen=True)
class Ball:
    R: float

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("ball radius must be positive")


@dataclass(frozen=True)
class Shell:
    R1: float
    R2: float

    def __post_init__(self):
        if not 0 < self.R1 < self.R2:
            raise ValueError("shell radii must satisfy 0 < R1 < R2")


Geometry = Union[Ball, Shell]


@dataclass(frozen=True)
class ProblemParams:
    p: float
    q: float
    d: int
    geometry: Geometry

    def __post_init__(self):
        if not (self.p > 1 and math.isfinite(self.p)):
            raise ValueError("p must satisfy 1 < p < inf")
        if not 1 <= self.q <= self.p:
            raise ValueError("q must satisfy 1 <= q <= p")
        if int(self.d) != self.d or self.d < 2:
            raise ValueError("d must be an integer >= 2")
        object.__setattr__(self, "d", int(self.d))
        if self.q >= self.critical_exponent:
            raise ValueError("q must be below the critical trace exponent")

    @property
    def critical_exponent(self) -> float:
        p, d = self.p, self.d
        return p * (d - 1) / (d - p) if p < d else math.inf

    @property
    def r_inner(self) -> float:
        return self.geometry.R1 if isinstance(self.geometry, Shell) else 0.0

    @property
    def r_outer(self) -> float:
        return self.geometry.R2 if isinstance(self.geometry, Shell) else self.geometry.R

    @property
    def volume(self) -> float:
        d = self.d
        return sphere_area(d) / d * (self.r_outer**d - self.r_inner**d)

    @property
    def outer_perimeter(self) -> float:
        return sphere_area(self.d) * self.r_outer ** (self.d - 1)

    def to_dict(self) -> dict:
        g = self.geometry
        geo = {"type": "shell", "R1": g.R1, "R2": g.R2} if isinstance(g, Shell) else {"type": "ball", "R": g.R}
        return {"p": self.p, "q": self.q, "d": self.d, "geometry": geo}

    @classmethod
    def from_dict(cls, obj: dict) -> "ProblemParams":
        g = obj["geometry"]
        geo = Shell(g["R1"], g["R2"]) if g["type"] == "shell" else Ball(g["R"])
        return cls(obj["p"], obj["q"], obj["d"], geo)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Discrete radial minimizer.

    ``energy_grad`` and ``energy_lp`` are the full-domain integrals of
    ``|∇z|^p`` and ``z^p`` for the stored scaling.  ``sigma`` is the value of
    the quotient (for Robin profiles it holds the eigenvalue instead, see
    ``problem``).
    """

    params: ProblemParams
    grid: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    flux: np.ndarray
    sigma: float
    energy_grad: float
    energy_lp: float
    normalization: str = "shooting"
    problem: str = "trace"
    rate: float = 1.0  # k in m' = k r^{d-1} Ψ^{p-1}

    def __post_init__(self):
        for name in ("grid", "psi", "dpsi", "flux"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def z_m(self) -> float:
        return float(self.psi[0])

    @property
    def z_M(self) -> float:
        return float(self.psi[-1])

    @property
    def r_inner(self) -> float:
        return float(self.grid[0])

    @property
    def r_outer(self) -> float:
        return float(self.grid[-1])

    @property
    def boundary_integral(self) -> float:
        """``∫_{outer sphere} z^q``."""
        return self.z_M**self.params.q * self.params.outer_perimeter

    def scaled(self, c: float, normalization: str = "scaled") -> "RadialProfile":
        p = self.params.p
        return replace(
            self,
            psi=self.psi * c,
            dpsi=self.dpsi * c,
            flux=self.flux * c ** (p - 1),
            energy_grad=self.energy_grad * c**p,
            energy_lp=self.energy_lp * c**p,
            normalization=normalization,
        )

    def normalized(self) -> "RadialProfile":
        """Rescale so that the outer boundary ``L^q`` norm equals one."""
        c = self.boundary_integral ** (-1.0 / self.params.q)
        return self.scaled(c, "boundary_qnorm")

    def quotient(self) -> float:
        """Trace quotient recomputed from the stored energies (scale invariant)."""
        p, q = self.params.p, self.params.q
        return (self.energy_grad + self.energy_lp) ** (1.0 / p) / self.boundary_integral ** (1.0 / q)

    def boundary_residual(self) -> float:
        """Relative residual of the natural boundary condition at the outer radius."""
        p, q = self.params.p, self.params.q
        S = self.boundary_integral
        lhs = self.dpsi[-1] ** (p - 1)
        rhs = self.sigma**p * S ** ((p - q) / q) * self.z_M ** (q - 1)
        return abs(lhs - rhs) / max(abs(rhs), 1e-300)

    @cached_property
    def _d2psi(self) -> np.ndarray:
        p, d, k = self.params.p, self.params.d, self.rate
        r, psi, dpsi = self.grid, self.psi, self.dpsi
        out = np.empty_like(psi)
        inner = slice(1, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            out[inner] = (
                dpsi[inner] ** (2.0 - p)
                * (k * psi[inner] ** (p - 1) - (d - 1) * dpsi[inner] ** (p - 1) / r[inner])
                / (p - 1)
            )
        out[0] = (dpsi[1] - dpsi[0]) / (r[1] - r[0])
        bad = ~np.isfinite(out)
        if bad.any():
            fd = np.gradient(dpsi, r)
            out[bad] = fd[bad]
        return out

    @cached_property
    def psi_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.grid, self.psi, self.dpsi)

    @cached_property
    def dpsi_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.grid, self.dpsi, self._d2psi)

    def psi_at(self, r):
        r = np.clip(np.asarray(r, dtype=float), self.grid[0], self.grid[-1])
        return self.psi_spline(r)

    def dpsi_at(self, r):
        r = np.clip(np.asarray(r, dtype=float), self.grid[0], self.grid[-1])
        return np.maximum(self.dpsi_spline(r), 0.0)

    def radius_of_level(self, t):
        """Inverse of the Hermite interpolant of Ψ (vectorised bisection)."""
        t = np.asarray(t, dtype=float)
        tt = np.atleast_1d(t)
        psi = self.psi
        lo_ok = tt >= psi[0] - 1e-12 * abs(psi[0])
        hi_ok = tt <= psi[-1] * (1 + 1e-12)
        if not np.all(lo_ok & hi_ok):
            raise LevelDomainError(f"level outside [{psi[0]!r}, {psi[-1]!r}]")
        tt = np.clip(tt, psi[0], psi[-1])
        i = np.clip(np.searchsorted(psi, tt, side="right") - 1, 0, len(psi) - 2)
        a, b = self.grid[i].copy(), self.grid[i + 1].copy()
        spl = self.psi_spline
        for _ in range(64):
            mid = 0.5 * (a + b)
            below = spl(mid) < tt
            a = np.where(below, mid, a)
            b = np.where(below, b, mid)
        out = 0.5 * (a + b)
        return out.reshape(t.shape) if t.ndim else float(out[0])

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.tolist(),
            "psi": self.psi.tolist(),
            "dpsi": self.dpsi.tolist(),
            "sigma": self.sigma,
            "params": self.params.to_dict(),
            "flux": self.flux.tolist(),
            "energy_grad": self.energy_grad,
            "energy_lp": self.energy_lp,
            "normalization": self.normalization,
            "problem": self.problem,
            "rate": self.rate,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "RadialProfile":
        o = json.loads(text)
        params = ProblemParams.from_dict(o["params"])
        p = params.p
        dpsi = np.asarray(o["dpsi"], dtype=float)
        grid = np.asarray(o["grid"], dtype=float)
        flux = np.asarray(o["flux"], dtype=float) if "flux" in o else grid ** (params.d - 1) * dpsi ** (p - 1)
        return cls(
            params=params,
            grid=grid,
            psi=np.asarray(o["psi"], dtype=float),
            dpsi=dpsi,
            flux=flux,
            sigma=float(o["sigma"]),
            energy_grad=float(o.get("energy_grad", math.nan)),
            energy_lp=float(o.get("energy_lp", math.nan)),
            normalization=o.get("normalization", "shooting"),
            problem=o.get("problem", "trace"),
            rate=float(o.get("rate", 1.0)),
        )


# --------------------------------------------------------------------- integrator
def radial_grid(r0: float, r1: float, n: int, eps_rel: float = 1e-6) -> np.ndarray:
    """``r0``, then a geometric run from ``r0 + ε`` and a uniform run to ``r1``.

    One eighth of the steps go to the geometric part, which covers the first
    5% of the interval; this resolves the algebraic behaviour of Ψ near the
    start for every ``p``.
    """
    if n < 64:
        raise ValueError("grid_n must be at least 64")
    L = r1 - r0
    eps = eps_rel * L
    n_geo = n // 8
    knee = r0 + 0.05 * L
    geo = r0 + np.geomspace(eps, knee - r0, n_geo + 1)
    uni = np.linspace(knee, r1, n - n_geo)[1:]
    g = np.concatenate([[r0], geo, uni])
    g[-1] = r1
    return g


def _integrate(p: float, d: int, k: float, grid: np.ndarray, shell: bool):
    """RK4 sweep of (Ψ, m, ∫r^{d-1}Ψ'^p, ∫r^{d-1}Ψ^p); returns arrays on ``grid``."""
    a = 1.0 / (p - 1.0)
    dm1 = d - 1
    pm1 = p - 1.0
    r0, r_eps = float(grid[0]), float(grid[1])
    s = r_eps - r0
    # series start at r0 + ε
    if shell:
        m0 = k * (r_eps**d - r0**d) / d
        psi0 = 1.0 + (pm1 / p) * (k * r0**dm1 / r_eps**dm1) ** a * s ** (p / pm1)
        ilp0 = (r_eps**d - r0**d) / d
    else:
        m0 = k * r_eps**d / d
        psi0 = 1.0 + (pm1 / p) * (k / d) ** a * r_eps ** (p / pm1)
        ilp0 = r_eps**d / d
    dpsi0 = (m0 / r_eps**dm1) ** a
    igr0 = dpsi0**p * s * r_eps**dm1 * pm1 / (2 * p - 1)  # ∫ of a power law, negligible

    n = len(grid)
    psi = np.empty(n)
    m = np.empty(n)
    igr = np.empty(n)
    ilp = np.empty(n)
    psi[0], m[0], igr[0], ilp[0] = 1.0, 0.0, 0.0, 0.0
    psi[1], m[1], igr[1], ilp[1] = psi0, m0, igr0, ilp0

    pw = math.pow

    def rhs(r, y0, y1):
        rd = pw(r, dm1)
        dps = pw(y1 / rd, a) if y1 > 0.0 else 0.0
        yp = pw(y0, pm1)
        return dps, k * rd * yp, rd * pw(dps, p), rd * y0 * yp

    y0, y1, y2, y3 = psi0, m0, igr0, ilp0
    g = grid.tolist()
    for i in range(1, n - 1):
        r = g[i]
        h = g[i + 1] - r
        h2 = 0.5 * h
        k1 = rhs(r, y0, y1)
        k2 = rhs(r + h2, y0 + h2 * k1[0], y1 + h2 * k1[1])
        k3 = rhs(r + h2, y0 + h2 * k2[0], y1 + h2 * k2[1])
        k4 = rhs(r + h, y0 + h * k3[0], y1 + h * k3[1])
        h6 = h / 6.0
        y0 += h6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        y1 += h6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        y2 += h6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        y3 += h6 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
        if not (math.isfinite(y0) and math.isfinite(y1) and math.isfinite(y3)):
            raise SolverDivergenceError(f"non-finite state at r={g[i + 1]!r}")
        psi[i + 1], m[i + 1], igr[i + 1], ilp[i + 1] = y0, y1, y2, y3
    with np.errstate(divide="ignore", invalid="ignore"):
        dpsi = np.where(grid > 0, (np.maximum(m, 0.0) / grid**dm1) ** a, 0.0)
    dpsi[0] = 0.0
    return psi, dpsi, m, igr, ilp


def _build_profile(params: ProblemParams, grid_n: int, k: float = 1.0, problem: str = "trace", sigma=None) -> RadialProfile:
    shell = isinstance(params.geometry, Shell)
    grid = radial_grid(params.r_inner, params.r_outer, grid_n)
    psi, dpsi, m, igr, ilp = _integrate(params.p, params.d, k, grid, shell)
    area = sphere_area(params.d)
    eg, el = area * igr[-1], area * ilp[-1]
    if sigma is None:
        S = psi[-1] ** params.q * params.outer_perimeter
        sigma = (eg + el) ** (1.0 / params.p) / S ** (1.0 / params.q)
    if not math.isfinite(sigma):
        raise SolverDivergenceError("quotient is not finite")
    return RadialProfile(params, grid, psi, dpsi, m, float(sigma), float(eg), float(el), "shooting", problem, k)


def solve_ball(params: ProblemParams, grid_n: int = 4096) -> RadialProfile:
    if not isinstance(params.geometry, Ball):
        raise TypeError("solve_ball needs Ball geometry")
    return _build_profile(params, grid_n)


def solve_shell(params: ProblemParams, grid_n: int = 4096) -> RadialProfile:
    if not isinstance(params.geometry, Shell):
        raise TypeError("solve_shell needs Shell geometry")
    return _build_profile(params, grid_n)


def solve_radial(params: ProblemParams, grid_n: int = 4096) -> RadialProfile:
    return _build_profile(params, grid_n)


def sigma_ball(p: float, q: float, d: int, R: float, grid_n: int = 4096) -> float:
    return solve_ball(ProblemParams(p, q, d, Ball(R)), grid_n).sigma


def sigma_shell(p: float, q: float, d: int, R1: float, R2: float, grid_n: int = 4096) -> float:
    return solve_shell(ProblemParams(p, q, d, Shell(R1, R2)), grid_n).sigma


# ------------------------------------------------------------------ level maps
@dataclass(frozen=True, eq=False)
class LevelFunctions:
    """``ell(t) = |∇z|`` on the level ``{z = t}`` and ``g_inv(t)`` = distance from the outer sphere."""

    profile: RadialProfile

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.profile.z_m, self.profile.z_M
        tol = 1e-12 * hi
        if np.any(t < lo - tol) or np.any(t > hi + tol):
            raise LevelDomainError(f"level outside [{lo!r}, {hi!r}]")
        return t

    def ell(self, t):
        t = self._check(t)
        return self.profile.dpsi_at(self.profile.radius_of_level(t))

    def g_inv(self, t):
        """``∫_t^{z_M} dτ/ℓ(τ)``, which equals ``R_out - Ψ^{-1}(t)``."""
        t = self._check(t)
        return self.profile.r_outer - self.profile.radius_of_level(t)

    def g_inv_quadrature(self, t: float, n: int = 200) -> float:
        """Direct evaluation of the defining integral, for cross-checks."""
        t = float(self._check(t))
        r_t = self.profile.radius_of_level(t)
        # substitute τ = Ψ(r): dτ/ℓ(τ) = dr, integrate over Gauss nodes in r
        x, w = np.polynomial.legendre.leggauss(n)
        rs = 0.5 * (r_t + self.profile.r_outer) + 0.5 * (self.profile.r_outer - r_t) * x
        taus = self.profile.psi_at(rs)
        jac = self.profile.dpsi_at(rs) * 0.5 * (self.profile.r_outer - r_t)
        return float(np.sum(w * jac / self.ell(taus)))


def level_functions(profile: RadialProfile) -> LevelFunctions:
    return LevelFunctions(profile)


# -------------------------------------------------------------------- Robin
def robin_residual(p: float, d: int, beta: float, R1: float, R2: float, k: float, grid_n: int = 4096) -> float:
    """``φ_p(Ψ'(R2)) + β Ψ(R2)^{p-1}`` for the trial rate ``k = |λ|``."""
    if k == 0.0:
        return beta
    grid = radial_grid(R1, R2, grid_n)
    psi, dpsi, *_ = _integrate(p, d, k, grid, True)
    return float(dpsi[-1] ** (p - 1) + beta * psi[-1] ** (p - 1))


def robin_neumann_profile(p: float, d: int, beta: float, R1: float, R2: float, grid_n: int = 4096, xtol: float = 1e-14) -> RadialProfile:
    """Radial Robin-Neumann eigenfunction; ``sigma`` holds the eigenvalue ``λ < 0``."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    if not beta < 0:
        raise ValueError("beta must be negative")
    shell = Shell(R1, R2)
    params = ProblemParams(p, 1.0, d, shell)
    # constants give λ ≤ β P/|A|, so |λ| is at least |β| P/|A|
    k_lo = abs(beta) * params.outer_perimeter / params.volume
    f = lambda k: robin_residual(p, d, beta, R1, R2, k, grid_n)  # noqa: E731
    f_lo = f(k_lo)
    if f_lo > 0:
        k_lo, f_lo = 1e-12, f(1e-12)
    k_hi = 2.0 * k_lo
    f_hi = f(k_hi)
    doublings = 0
    while f_hi <= 0:
        k_lo, f_lo = k_hi, f_hi
        k_hi *= 2.0
        doublings += 1
        if doublings > 60:
            raise RootNotBracketedError(f"residual stays negative on [{-k_hi!r}, {-1e-12!r}]")
        f_hi = f(k_hi)
    if f_lo > 0:
        raise RootNotBracketedError(f"residual positive at both ends of [{-k_hi!r}, {-k_lo!r}]")
    # defensive monotonicity sample of the residual on the bracket
    samples = [f(k) for k in np.linspace(k_lo, k_hi, 6)]
    if np.any(np.diff(samples) < -1e-12 * max(1.0, max(abs(x) for x in samples))):
        raise RootNotBracketedError(f"residual is not monotone on [{-k_hi!r}, {-k_lo!r}]")
    k = brentq(f, k_lo, k_hi, xtol=xtol * k_hi, rtol=4 * np.finfo(float).eps, maxiter=200)
    return _build_profile(params, grid_n, k=k, problem="robin", sigma=-k)


def robin_neumann_shell(p: float, d: int, beta: float, R1: float, R2: float, grid_n: int = 4096) -> float:
    """First Robin-Neumann eigenvalue of the shell (negative for ``β < 0``)."""
    return robin_neumann_profile(p, d, beta, R1, R2, grid_n).sigma
