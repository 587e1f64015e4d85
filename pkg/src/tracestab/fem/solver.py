"""P1 finite-element minimization of the trace and Robin quotients.

The discrete quotient is minimized by preconditioned descent with Armijo
backtracking.  The preconditioner is the symmetric positive definite matrix
``A_w = K_w + M_w``: stiffness and mass weighted by ``(p-1)|∇u|^{p-2}`` and
``(p-1)|u|^{p-2}``, which is ``1/p`` times the Hessian of the numerator at the
current iterate (up to the regularisation).  For ``p = 2`` this makes every
step an exact inverse-iteration step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .mesh import OUTER, TriMesh


class NonConvergenceError(RuntimeError):
    """Descent stalled before reaching the first-order tolerance."""

    def __init__(self, message: str, iterate: np.ndarray | None = None, history: list | None = None):
        super().__init__(message)
        self.iterate = iterate
        self.history = history or []


@dataclass(frozen=True)
class SolverOptions:
    tol: float | None = None  # first-order residual; default depends on p
    max_iter: int = 500
    armijo_c1: float = 1e-4
    backtrack: float = 0.5
    eps_reg: float = 1e-12
    stall_rtol: float = 1e-12  # relative objective drop of the last step

    def residual_tol(self, p: float) -> float:
        if self.tol is not None:
            return self.tol
        return 1e-9 if p >= 2 else 1e-7


@dataclass(frozen=True, eq=False)
class SolveResult:
    sigma: float
    coefficients: np.ndarray
    iterations: int
    grad_norm: float
    positive: bool
    history: tuple = field(default=(), repr=False)


@dataclass(frozen=True, eq=False)
class RobinResult:
    eigenvalue: float
    coefficients: np.ndarray
    iterations: int
    grad_norm: float
    positive: bool
    history: tuple = field(default=(), repr=False)


# degree-4 symmetric rule with positive weights (barycentric, weights sum to 1)
_TRI_B = np.array(
    [
        [0.816847572980459, 0.091576213509771, 0.091576213509771],
        [0.091576213509771, 0.816847572980459, 0.091576213509771],
        [0.091576213509771, 0.091576213509771, 0.816847572980459],
        [0.108103018168070, 0.445948490915965, 0.445948490915965],
        [0.445948490915965, 0.108103018168070, 0.445948490915965],
        [0.445948490915965, 0.445948490915965, 0.108103018168070],
    ]
)
_TRI_W = np.array([0.109951743655322] * 3 + [0.223381589678011] * 3)
_GX, _GW = np.polynomial.legendre.leggauss(4)
_EDGE_B = np.column_stack([(1 - _GX) / 2, (1 + _GX) / 2])
_EDGE_W = _GW / 2


class Discretization:
    """Precomputed geometry for the energy functionals on one mesh."""

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        nodes, tris = mesh.nodes, mesh.triangles
        self.n = len(nodes)
        self.tris = tris
        a, b, c = nodes[tris[:, 0]], nodes[tris[:, 1]], nodes[tris[:, 2]]
        area2 = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
        self.area = 0.5 * area2
        # gradients of barycentric basis functions, shape (m, 3, 2)
        g = np.empty((len(tris), 3, 2))
        g[:, 0] = np.column_stack([b[:, 1] - c[:, 1], c[:, 0] - b[:, 0]]) / area2[:, None]
        g[:, 1] = np.column_stack([c[:, 1] - a[:, 1], a[:, 0] - c[:, 0]]) / area2[:, None]
        g[:, 2] = np.column_stack([a[:, 1] - b[:, 1], b[:, 0] - a[:, 0]]) / area2[:, None]
        self.grad_basis = g
        self._edges: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self._lu2 = None
        rows = np.repeat(tris, 3, axis=1).ravel()
        cols = np.tile(tris, (1, 3)).ravel()
        self._rows, self._cols = rows, cols
        # local P1 mass matrix pattern and stiffness pattern
        self._kloc = np.einsum("mid,mjd->mij", g, g) * self.area[:, None, None]
        self._mloc_phi = np.einsum("qi,qj,q->qij", _TRI_B, _TRI_B, _TRI_W)

    def boundary(self, tag: str) -> tuple[np.ndarray, np.ndarray]:
        if tag not in self._edges:
            e = self.mesh.edges_with_tag(tag)
            if len(e) == 0:
                raise ValueError(f"mesh has no boundary edges tagged {tag!r}")
            L = np.linalg.norm(self.mesh.nodes[e[:, 1]] - self.mesh.nodes[e[:, 0]], axis=1)
            self._edges[tag] = (e, L)
        return self._edges[tag]

    # -- functionals with gradients -------------------------------------------
    def grad_energy(self, u: np.ndarray, p: float):
        """``∫|∇u|^p`` and its gradient; also returns per-triangle ``|∇u|``."""
        G = np.einsum("mi,mid->md", u[self.tris], self.grad_basis)
        s = np.einsum("md,md->m", G, G)
        gn = np.sqrt(s)
        val = float(np.sum(self.area * gn**p))
        with np.errstate(divide="ignore", invalid="ignore"):
            fac = np.where(s > 0, p * s ** ((p - 2) / 2), 0.0)
        loc = np.einsum("md,mid->mi", G, self.grad_basis) * (fac * self.area)[:, None]
        grad = np.bincount(self.tris.ravel(), weights=loc.ravel(), minlength=self.n)
        return val, grad, gn

    def volume_power(self, u: np.ndarray, p: float):
        """``∫|u|^p`` by the 6-point rule, with gradient."""
        uq = u[self.tris] @ _TRI_B.T  # (m, Q)
        a = np.abs(uq)
        val = float(np.sum(self.area * (a**p @ _TRI_W)))
        with np.errstate(divide="ignore", invalid="ignore"):
            d = p * np.where(a > 0, a ** (p - 1) * np.sign(uq), 0.0)
        loc = (d * _TRI_W) @ _TRI_B * self.area[:, None]
        grad = np.bincount(self.tris.ravel(), weights=loc.ravel(), minlength=self.n)
        return val, grad

    def boundary_power(self, u: np.ndarray, q: float, tag: str):
        """``∫_{tag}|u|^q`` by 4-point Gauss per edge, with gradient."""
        e, L = self.boundary(tag)
        uq = u[e] @ _EDGE_B.T
        a = np.abs(uq)
        val = float(np.sum(L * (a**q @ _EDGE_W)))
        with np.errstate(divide="ignore", invalid="ignore"):
            d = q * np.where(a > 0, a ** (q - 1) * np.sign(uq), 0.0)
        loc = (d * _EDGE_W) @ _EDGE_B * L[:, None]
        grad = np.bincount(e.ravel(), weights=loc.ravel(), minlength=self.n)
        return val, grad

    # -- matrices ----------------------------------------------------------------
    def stiffness(self, weights: np.ndarray | None = None) -> sp.csc_matrix:
        k = self._kloc if weights is None else self._kloc * weights[:, None, None]
        return sp.coo_matrix((k.ravel(), (self._rows, self._cols)), shape=(self.n, self.n)).tocsc()

    def mass(self, weights_q: np.ndarray | None = None) -> sp.csc_matrix:
        """Mass matrix with an optional weight at each quadrature point (m, Q)."""
        if weights_q is None:
            loc = self._mloc_phi.sum(axis=0)[None] * self.area[:, None, None]
        else:
            loc = np.einsum("mq,qij->mij", weights_q, self._mloc_phi) * self.area[:, None, None]
        return sp.coo_matrix((loc.ravel(), (self._rows, self._cols)), shape=(self.n, self.n)).tocsc()

    def boundary_mass(self, tag: str) -> sp.csc_matrix:
        e, L = self.boundary(tag)
        loc = np.einsum("qi,qj,q->ij", _EDGE_B, _EDGE_B, _EDGE_W)[None] * L[:, None, None]
        rows = np.repeat(e, 2, axis=1).ravel()
        cols = np.tile(e, (1, 2)).ravel()
        return sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(self.n, self.n)).tocsc()

    def stiffness_tensor(self, W: np.ndarray) -> sp.csc_matrix:
        """Stiffness matrix with a symmetric 2x2 weight tensor per triangle."""
        k = np.einsum("mid,mde,mje->mij", self.grad_basis, W, self.grad_basis) * self.area[:, None, None]
        return sp.coo_matrix((k.ravel(), (self._rows, self._cols)), shape=(self.n, self.n)).tocsc()

    def preconditioner(self, u: np.ndarray, p: float, eps_reg: float):
        """LU of ``Hess(∫|∇u|^p + |u|^p)/p``, regularised where ``∇u`` or ``u`` vanish."""
        if p == 2:
            if self._lu2 is None:
                self._lu2 = splu((self.stiffness() + self.mass()).tocsc())
            return self._lu2
        G = np.einsum("mi,mid->md", u[self.tris], self.grad_basis)
        s = np.einsum("md,md->m", G, G)
        rms2 = float(np.sum(self.area * s)) / float(np.sum(self.area))
        uq = np.abs(u[self.tris] @ _TRI_B.T)
        urms2 = float(np.mean(uq**2))
        if rms2 == 0.0:
            # constant iterate: isotropic weight at the scale of u
            K = self.stiffness() * (p - 1) * max(urms2, 1e-300) ** ((p - 2) / 2)
        else:
            s_reg = s + 1e-4 * rms2 + eps_reg
            iso = s_reg ** ((p - 2) / 2)
            with np.errstate(divide="ignore", invalid="ignore"):
                gg = np.einsum("md,me->mde", G, G) / s_reg[:, None, None]
            W = iso[:, None, None] * (np.eye(2)[None] + (p - 2) * gg)
            K = self.stiffness_tensor(W)
        mw = (p - 1) * (uq**2 + 1e-4 * urms2 + eps_reg) ** ((p - 2) / 2)
        return splu((K + self.mass(mw)).tocsc())


def _descent(disc: Discretization, p: float, evaluate, opts: SolverOptions, u0: np.ndarray, normalize):
    """Generic preconditioned Armijo descent on a 0-homogeneous quotient.

    ``evaluate(u)`` returns ``(F, grad F, scale, gn)`` where ``scale`` turns
    ``A_w^{-1} grad F`` into a Newton-sized step.
    """
    tol = opts.residual_tol(p)
    u = normalize(u0)
    F, g, scale, gn = evaluate(u)
    history = [F]
    alpha0 = 1.0
    for it in range(1, opts.max_iter + 1):
        lu = disc.preconditioner(u, p, opts.eps_reg)
        Pg = lu.solve(g)
        dec = float(g @ Pg)
        res = math.sqrt(max(scale * dec, 0.0) / max(abs(F), 1e-300))
        last_drop = abs(history[-2] - F) / max(abs(F), 1e-300) if len(history) > 1 else 0.0
        if res <= tol and last_drop < opts.stall_rtol:
            return u, F, it - 1, res, history
        d = -scale * Pg
        slope = float(g @ d)
        # rounding allowance: near convergence the predicted decrease drops below eps*|F|
        noise = 16.0 * np.finfo(float).eps * abs(F)
        alpha = alpha0
        accepted = False
        while alpha > 1e-20:
            un = normalize(u + alpha * d)
            Fn, g_n, s_n, gn_n = evaluate(un)
            if math.isfinite(Fn) and Fn <= F + opts.armijo_c1 * alpha * slope + noise:
                accepted = True
                break
            alpha *= opts.backtrack
        if not accepted:
            raise NonConvergenceError(f"line search stalled at iteration {it} with residual {res:.3e}", u, history)
        # grow the first trial step again after a successful full step
        alpha0 = min(1.0, alpha / opts.backtrack)
        u, F, g, scale, gn = un, Fn, g_n, s_n, gn_n
        history.append(F)
    raise NonConvergenceError(f"no convergence in {opts.max_iter} iterations", u, history)


def _check_pq(p: float, q: float):
    if not p > 1:
        raise ValueError("p must exceed 1")
    if not 1 <= q <= p:
        raise ValueError("q must satisfy 1 <= q <= p")


def minimize_trace_quotient(mesh: TriMesh, p: float, q: float, boundary: str = OUTER, options: SolverOptions | None = None, disc: Discretization | None = None) -> SolveResult:
    """Minimize ``(∫|∇u|^p + |u|^p) / (∫_{boundary}|u|^q)^{p/q}`` over P1 functions."""
    _check_pq(p, q)
    opts = options or SolverOptions()
    disc = disc or Discretization(mesh)
    disc.boundary(boundary)
    r = p / q

    def normalize(u):
        D, _ = disc.boundary_power(u, q, boundary)
        return u / D ** (1.0 / q)

    def evaluate(u):
        Ng, gg, gn = disc.grad_energy(u, p)
        Nv, gv = disc.volume_power(u, p)
        D, gD = disc.boundary_power(u, q, boundary)
        N = Ng + Nv
        Dr = D**r
        F = N / Dr
        g = (gg + gv - r * (N / D) * gD) / Dr
        return F, g, Dr / p, gn

    u, F, its, res, hist = _descent(disc, p, evaluate, opts, np.ones(disc.n), normalize)
    if u.sum() < 0:
        u = -u
    positive = bool(u.min() >= -1e-8 * np.abs(u).max())
    return SolveResult(F ** (1.0 / p), u, its, res, positive, tuple(hist))


def linear_steklov_reference(mesh: TriMesh, boundary: str = OUTER, tol: float = 1e-12, max_iter: int = 2000, disc: Discretization | None = None) -> SolveResult:
    """Smallest eigenvalue of ``(K + M) u = λ B u`` by inverse iteration; ``σ = √λ``."""
    disc = disc or Discretization(mesh)
    A = (disc.stiffness() + disc.mass()).tocsc()
    B = disc.boundary_mass(boundary)
    lu = splu(A)
    u = np.ones(disc.n)
    lam_old = math.inf
    for it in range(1, max_iter + 1):
        Bu = B @ u
        u = lu.solve(Bu)
        u /= math.sqrt(float(u @ (B @ u)))
        Au = A @ u
        lam = float(u @ Au)
        r = Au - lam * (B @ u)
        res = float(np.linalg.norm(r) / max(np.linalg.norm(Au), 1e-300))
        if res <= tol or (abs(lam_old - lam) <= 4 * np.finfo(float).eps * lam and res <= 1e3 * tol):
            if u.sum() < 0:
                u = -u
            return SolveResult(math.sqrt(lam), u, it, res, bool(u.min() >= -1e-8 * np.abs(u).max()))
        lam_old = lam
    raise NonConvergenceError(f"inverse iteration did not converge in {max_iter} steps", u)


def robin_neumann_fem(mesh: TriMesh, p: float, beta: float, boundary: str = OUTER, options: SolverOptions | None = None, disc: Discretization | None = None) -> RobinResult:
    """Minimize ``(∫|∇u|^p + β∫_{boundary}|u|^p) / ∫|u|^p`` (first Robin-Neumann eigenvalue)."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    if not beta < 0:
        raise ValueError("beta must be negative")
    opts = options or SolverOptions()
    disc = disc or Discretization(mesh)
    disc.boundary(boundary)

    def normalize(u):
        V, _ = disc.volume_power(u, p)
        return u / V ** (1.0 / p)

    def evaluate(u):
        Ng, gg, gn = disc.grad_energy(u, p)
        Bb, gb = disc.boundary_power(u, p, boundary)
        V, gV = disc.volume_power(u, p)
        N = Ng + beta * Bb
        F = N / V
        g = (gg + beta * gb - F * gV) / V
        return F, g, V / p, gn

    u, F, its, res, hist = _descent(disc, p, evaluate, opts, np.ones(disc.n), normalize)
    if u.sum() < 0:
        u = -u
    positive = bool(u.min() >= -1e-8 * np.abs(u).max())
    return RobinResult(F, u, its, res, positive, tuple(hist))


def radiality_check(result, mesh: TriMesh, center=(0.0, 0.0), n_bins: int = 64) -> float:
    """Worst in-bin spread of nodal values over radial bins, relative to the global spread."""
    u = np.asarray(getattr(result, "coefficients", result), dtype=float)
    r = np.linalg.norm(mesh.nodes - np.asarray(center, dtype=float), axis=1)
    spread = float(u.max() - u.min())
    if spread == 0.0:
        return 0.0
    edges = np.linspace(r.min(), r.max(), n_bins + 1)
    idx = np.clip(np.searchsorted(edges, r, side="right") - 1, 0, n_bins - 1)
    lo = np.full(n_bins, np.inf)
    hi = np.full(n_bins, -np.inf)
    np.minimum.at(lo, idx, u)
    np.maximum.at(hi, idx, u)
    used = np.isfinite(lo)
    return float(np.max(hi[used] - lo[used]) / spread)
