"""Web test functions built from radial profiles, and the deficit chains.

A web function depends only on the distance ``d(x)`` to the outer boundary:
``w(x) = Ψ(R_out - d(x))`` until ``d`` reaches the plateau depth, and the
inner value ``z_m`` beyond it.  Because ``|∇d| = 1`` almost everywhere, every
volume integral of ``F(d(x))`` reduces by the coarea formula to a 1D integral
weighted by the perimeter of the inner parallel sets, which is known exactly
between edge-collapse events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from scipy.optimize import brentq

from .convex2d import (
    ConvexPolygon,
    _clip_halfplane,
    hausdorff_distance,
    inner_parallel,
    radial_graph_norms,
    steiner_point_and_ball,
)
from .radial import Ball, LevelFunctions, RadialProfile


class ConstraintViolation(ValueError):
    """Perimeter/volume/containment constraint not met."""


class TUndefinedError(RuntimeError):
    """No level below ``z_M`` satisfies the critical-level conditions."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach its tolerance."""


# ------------------------------------------------------------------ domain types
@dataclass(frozen=True)
class ClassParams:
    R1: float
    R2: float
    vartheta: float


@dataclass(frozen=True, eq=False)
class HoledDomain:
    """Convex outer polygon with a convex hole, optionally tagged with class radii."""

    outer: ConvexPolygon
    hole: ConvexPolygon
    class_params: ClassParams | None = None

    def __post_init__(self):
        if not np.all(self.outer.contains(self.hole.vertices, tol=-1e-14 * self.outer.perimeter)):
            raise ConstraintViolation("hole is not strictly inside the outer polygon")

    @property
    def area(self) -> float:
        return self.outer.area - self.hole.area

    @property
    def clearance(self) -> float:
        """Distance from the hole to the outer boundary."""
        return float(np.min(self.outer.distance_to_boundary(self.hole.vertices)))

    def class_violations(self, vol_rtol: float = 1e-8, per_rtol: float = 1e-10) -> list[str]:
        cp = self.class_params
        if cp is None:
            return ["no class parameters"]
        out = []
        target_area = math.pi * (cp.R2**2 - cp.R1**2)
        if abs(self.area - target_area) > vol_rtol * target_area:
            out.append(f"volume {self.area!r} != {target_area!r}")
        target_per = 2 * math.pi * cp.R2
        if abs(self.outer.perimeter - target_per) > per_rtol * target_per:
            out.append(f"outer perimeter {self.outer.perimeter!r} != {target_per!r}")
        if self.clearance < cp.vartheta:
            out.append(f"clearance {self.clearance!r} < vartheta {cp.vartheta!r}")
        if self.hole.profile.inradius < cp.vartheta:
            out.append(f"hole inradius {self.hole.profile.inradius!r} < vartheta {cp.vartheta!r}")
        return out

    def to_dict(self) -> dict:
        cp = self.class_params
        return {
            "outer": self.outer.vertices.tolist(),
            "hole": self.hole.vertices.tolist(),
            "class_params": None if cp is None else {"R1": cp.R1, "R2": cp.R2, "vartheta": cp.vartheta},
        }


@dataclass(frozen=True, eq=False)
class WebFunction:
    profile: RadialProfile
    outer: ConvexPolygon
    plateau_depth: float

    @property
    def levels(self) -> LevelFunctions:
        return LevelFunctions(self.profile)

    @property
    def r_out(self) -> float:
        return self.profile.r_outer

    @property
    def z_m(self) -> float:
        return self.profile.z_m

    @property
    def z_M(self) -> float:
        return self.profile.z_M

    @property
    def w_min(self) -> float:
        """Smallest value taken by ``w`` on the outer polygon."""
        depth = min(self.plateau_depth, self.outer.profile.inradius)
        return float(self.profile.psi_at(self.r_out - depth))

    def distance(self, x):
        return np.maximum(self.outer.distance_to_boundary(x), 0.0)

    def value_of_distance(self, s):
        s = np.asarray(s, dtype=float)
        v = self.profile.psi_at(self.r_out - np.minimum(s, self.plateau_depth))
        return np.where(s >= self.plateau_depth, self.z_m, v)

    def grad_of_distance(self, s):
        s = np.asarray(s, dtype=float)
        g = self.profile.dpsi_at(self.r_out - np.minimum(s, self.plateau_depth))
        return np.where(s >= self.plateau_depth, 0.0, g)

    def __call__(self, x):
        return self.value_of_distance(self.distance(x))

    def grad_norm(self, x):
        return self.grad_of_distance(self.distance(x))

    def energy_density(self, s):
        """``|∇w|^p + w^p`` as a function of the distance."""
        p = self.profile.params.p
        return self.grad_of_distance(s) ** p + self.value_of_distance(s) ** p


def build_web(profile: RadialProfile, outer: ConvexPolygon, perimeter_rtol: float = 1e-8) -> WebFunction:
    """Web function of ``profile`` over ``outer``.

    A ball profile gives the convex-case function (no plateau); a shell
    profile gives the holed-case function with plateau at depth ``R2 - R1``.
    """
    params = profile.params
    if params.d != 2:
        raise ConstraintViolation("web functions are built on planar polygons only (d = 2)")
    target = params.outer_perimeter
    if abs(outer.perimeter - target) > perimeter_rtol * target:
        raise ConstraintViolation(f"outer perimeter {outer.perimeter!r} differs from {target!r}")
    if isinstance(params.geometry, Ball):
        depth = math.inf
        if outer.profile.inradius > params.geometry.R * (1 + 1e-12):
            raise ConstraintViolation("inradius exceeds the ball radius")
    else:
        depth = params.geometry.R2 - params.geometry.R1
    return WebFunction(profile, outer, depth)


# ------------------------------------------------------------ 1D coarea quadrature
@lru_cache(maxsize=None)
def _gauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def _event_breaks(outer: ConvexPolygon, t_max: float) -> np.ndarray:
    times = outer.profile.times
    inner = times[(times > 0) & (times < t_max)]
    return np.unique(np.concatenate([[0.0], inner, [t_max]]))


def coarea_integral(outer: ConvexPolygon, func: Callable, t_max: float, panels: int = 2048, order: int = 6) -> float:
    """``∫_0^{t_max} func(t) P(Ω_t) dt`` with panels split at edge-collapse events."""
    if t_max <= 0:
        return 0.0
    breaks = _event_breaks(outer, t_max)
    lengths = np.diff(breaks)
    counts = np.maximum(1, np.round(panels * lengths / t_max).astype(int))
    x, w = _gauss(order)
    nodes, weights = [], []
    for a, L, c in zip(breaks[:-1], lengths, counts):
        edges = a + L * np.arange(c + 1) / c
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * np.diff(edges)
        nodes.append((mid[:, None] + half[:, None] * x).ravel())
        weights.append((half[:, None] * w).ravel())
    t = np.concatenate(nodes)
    wt = np.concatenate(weights)
    return float(np.sum(wt * func(t) * outer.profile.perimeter(t)))


def _volume_integral_of_distance(w: WebFunction, func_of_s: Callable, plateau_value: float) -> float:
    """``∫_{outer} F(d(x)) dx`` where ``F`` is constant ``plateau_value`` past the plateau depth."""
    rho = w.outer.profile.inradius
    depth = min(w.plateau_depth, rho)
    total = coarea_integral(w.outer, func_of_s, depth)
    if w.plateau_depth < rho:
        total += plateau_value * float(w.outer.profile.area(w.plateau_depth))
    return total


@dataclass(frozen=True)
class WebIntegrals:
    Ip: float
    Igrad: float
    Ibdry: float


def web_integrals_convex(w: WebFunction) -> WebIntegrals:
    """Volume and boundary integrals of a web function over its outer polygon."""
    p, q = w.profile.params.p, w.profile.params.q
    Ip = _volume_integral_of_distance(w, lambda s: w.value_of_distance(s) ** p, w.z_m**p)
    Ig = _volume_integral_of_distance(w, lambda s: w.grad_of_distance(s) ** p, 0.0)
    Ib = w.z_M**q * w.outer.perimeter
    return WebIntegrals(Ip, Ig, Ib)


def web_quotient(ints: WebIntegrals, p: float, q: float) -> float:
    return (ints.Igrad + ints.Ip) ** (1.0 / p) / ints.Ibdry ** (1.0 / q)


# --------------------------------------------------- 2D quadrature on convex cells
# Strang-Fix 6-point degree-4 rule (all weights positive), barycentric
_B4 = np.array(
    [
        [0.816847572980459, 0.091576213509771, 0.091576213509771],
        [0.091576213509771, 0.816847572980459, 0.091576213509771],
        [0.091576213509771, 0.091576213509771, 0.816847572980459],
        [0.108103018168070, 0.445948490915965, 0.445948490915965],
        [0.445948490915965, 0.108103018168070, 0.445948490915965],
        [0.445948490915965, 0.445948490915965, 0.108103018168070],
    ]
)
_W4 = np.array([0.109951743655322] * 3 + [0.223381589678011] * 3)


def _tri_areas(tris: np.ndarray) -> np.ndarray:
    a, b = tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]
    return 0.5 * np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])


def _tri_rule(tris: np.ndarray, f: Callable) -> np.ndarray:
    """Integral estimate on each triangle (shape (m, 3, 2))."""
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    area = 0.5 * np.abs((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    pts = np.einsum("qk,mkd->mqd", _B4, tris)
    vals = f(pts.reshape(-1, 2)).reshape(len(tris), -1)
    return area * (vals @ _W4)


def _split4(tris: np.ndarray) -> np.ndarray:
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    return np.stack(
        [
            np.stack([a, ab, ca], 1),
            np.stack([ab, b, bc], 1),
            np.stack([ca, bc, c], 1),
            np.stack([ab, bc, ca], 1),
        ],
        axis=1,
    ).reshape(-1, 3, 2)


def adaptive_triangle_quadrature(
    tris: np.ndarray, f: Callable, atol: float, max_level: int = 14, max_triangles: int = 200_000
) -> float:
    """Integrate ``f`` over a triangle soup by red refinement until the
    parent/children discrepancy meets an area-weighted share of ``atol``."""
    tris = np.asarray(tris, dtype=float).reshape(-1, 3, 2)
    if len(tris) == 0:
        return 0.0
    total_area = float(np.sum(_tri_areas(tris)))
    if total_area == 0:
        return 0.0
    est = _tri_rule(tris, f)
    result = 0.0
    for _ in range(max_level):
        kids = _split4(tris)
        kid_est = _tri_rule(kids, f).reshape(-1, 4)
        fine = kid_est.sum(axis=1)
        area = _tri_areas(tris)
        # the relative floor keeps the test above rounding noise on tiny cells
        ok = np.abs(fine - est) <= np.maximum(atol * area / total_area, 1e-13 * np.abs(fine))
        result += float(fine[ok].sum())
        if ok.all():
            return result
        tris = kids.reshape(-1, 4, 3, 2)[~ok].reshape(-1, 3, 2)
        est = kid_est[~ok].ravel()
        if len(tris) > max_triangles:
            raise QuadratureError(f"adaptive quadrature exceeded {max_triangles} active triangles")
    raise QuadratureError(f"adaptive quadrature unresolved on {len(tris)} triangles after {max_level} levels")


def _fan(vertices: np.ndarray) -> np.ndarray:
    v = np.asarray(vertices)
    if len(v) < 3:
        return np.zeros((0, 3, 2))
    return np.stack([np.repeat(v[:1], len(v) - 2, 0), v[1:-1], v[2:]], axis=1)


def _clip_many(v: np.ndarray, normals: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    for n, c in zip(normals, offsets):
        v = _clip_halfplane(v, n, c)
        if len(v) < 3:
            return v[:0]
    return v


def distance_cells(outer: ConvexPolygon) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """Medial-axis cells: for each edge ``i`` the half-planes where ``d(x) = c_i - n_i.x``.

    Returned as ``(i, normals, offsets)`` systems to be clipped against a region.
    """
    nrm, off = outer.normals, outer.offsets
    cells = []
    for i, nb in enumerate(outer.profile.neighbours):
        nb = [j for j in nb if j != i]
        # d_i <= d_j  <=>  (n_j - n_i).x <= c_j - c_i
        # regions are assumed inside ``outer``, so only the bisector constraints matter
        cn = np.array([nrm[j] - nrm[i] for j in nb]).reshape(-1, 2)
        co = np.array([off[j] - off[i] for j in nb])
        cells.append((i, cn, co))
    return cells


def _chord_lengths(piece: np.ndarray, n: np.ndarray, c: float, s: np.ndarray) -> np.ndarray:
    """Length of ``{x in piece : c - n.x = s}`` for each ``s`` (convex piece)."""
    v = piece
    w = np.roll(v, -1, axis=0)
    tang = np.array([-n[1], n[0]])
    sv = c - v @ n
    sw = c - w @ n
    ss = np.asarray(s, dtype=float)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = (ss - sv) / (sw - sv)
        hit = (lam >= 0) & (lam <= 1) & (sw != sv)
        pos_v, pos_w = v @ tang, w @ tang
        pos = pos_v + lam * (pos_w - pos_v)
    hi = np.where(hit, pos, -np.inf).max(axis=1)
    lo = np.where(hit, pos, np.inf).min(axis=1)
    return np.where(np.isfinite(hi) & np.isfinite(lo), np.maximum(hi - lo, 0.0), 0.0)


def _slab_integral(piece: np.ndarray, n: np.ndarray, c: float, func_of_s: Callable, sub: int, order: int) -> float:
    """``∫_piece F(c - n.x) dx`` as ``∫ F(s) L(s) ds`` with ``L`` piecewise linear."""
    levels = np.unique(c - piece @ n)
    if len(levels) < 2:
        return 0.0
    x, wq = _gauss(order)
    nodes, weights = [], []
    for a, b in zip(levels[:-1], levels[1:]):
        if b - a <= 0:
            continue
        edges = np.linspace(a, b, sub + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * np.diff(edges)
        nodes.append((mid[:, None] + half[:, None] * x).ravel())
        weights.append((half[:, None] * wq).ravel())
    if not nodes:
        return 0.0
    t = np.concatenate(nodes)
    wt = np.concatenate(weights)
    # L is linear between consecutive vertex levels, so interpolate its values there
    L_levels = _chord_lengths(piece, n, c, levels)
    L = np.interp(t, levels, L_levels)
    return float(np.sum(wt * func_of_s(t) * L))


def integrate_distance_function(
    outer: ConvexPolygon,
    region: np.ndarray,
    func_of_s: Callable,
    split_depth: float | None = None,
    plateau_value: float = 0.0,
    method: str = "slab",
    rtol: float = 1e-9,
    sub: int = 16,
    order: int = 16,
) -> float:
    """``∫_{region} F(d(x)) dx`` for a convex region inside ``outer``.

    The region is cut into the medial-axis cells of ``outer``, where ``d``
    equals the affine function ``c_i - n_i.x``, and split at
    ``d = split_depth`` (beyond which ``F`` equals ``plateau_value``).  Each
    smooth piece is then integrated either exactly in the transverse
    direction (``method="slab"``: ``∫ F(s) L(s) ds`` with chord length ``L``)
    or by adaptive red refinement of a fan triangulation
    (``method="adaptive"``, relative tolerance ``rtol``).
    """
    region = np.asarray(region, dtype=float)
    smooth, flat_area = [], 0.0
    for i, cn, co in distance_cells(outer):
        piece = _clip_many(region, cn, co)
        if len(piece) < 3:
            continue
        n_i, c_i = outer.normals[i], outer.offsets[i]
        if split_depth is not None and math.isfinite(split_depth):
            near = _clip_halfplane(piece, -n_i, split_depth - c_i)  # d_i <= depth
            far = _clip_halfplane(piece, n_i, c_i - split_depth)  # d_i >= depth
            if len(far) >= 3:
                flat_area += _poly_area(far)
            piece = near
        if len(piece) >= 3:
            smooth.append((i, piece))
    total = plateau_value * flat_area
    nrm, off = outer.normals, outer.offsets
    if method == "slab":
        for i, piece in smooth:
            total += _slab_integral(piece, nrm[i], off[i], func_of_s, sub, order)
        return total
    if method != "adaptive":
        raise ValueError(f"unknown method {method!r}")
    rough = []
    for i, piece in smooth:
        rough.append(abs(_slab_integral(piece, nrm[i], off[i], func_of_s, 1, 4)))
    atol = rtol * max(sum(rough), 1e-300)
    for i, piece in smooth:

        def f(x, i=i):
            return func_of_s(np.maximum(off[i] - x @ nrm[i], 0.0))

        total += adaptive_triangle_quadrature(_fan(piece), f, atol / max(len(smooth), 1))
    return total


def _poly_area(v: np.ndarray) -> float:
    w = np.roll(v, -1, axis=0)
    return 0.5 * float(np.sum(v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0]))


def coarea_region_integral(outer: ConvexPolygon, region: ConvexPolygon, func_of_s: Callable, t_max: float, nodes: int = 4000) -> float:
    """Independent 1D route for ``∫_{region} F(d(x)) dx`` (region inside the
    non-plateau zone up to ``t_max``): integrates ``F(t) H^1(∂Ω_t ∩ region)``
    with ``∂Ω_t`` clipped against the region."""
    breaks = np.unique(np.concatenate([_event_breaks(outer, t_max), _region_breaks(outer, region, t_max)]))
    x, w = _gauss(8)
    per_panel = max(1, nodes // (8 * (len(breaks) - 1)))
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        edges = np.linspace(a, b, per_panel + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            ts = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x
            lens = np.array([_boundary_length_in(outer, region, t) for t in ts])
            total += 0.5 * (hi - lo) * float(np.sum(w * func_of_s(ts) * lens))
    return total


def _region_breaks(outer: ConvexPolygon, region: ConvexPolygon, t_max: float) -> np.ndarray:
    """Distances at which ``∂Ω_t`` passes a region vertex (kinks of the clipped length)."""
    d = outer.distance_to_boundary(region.vertices)
    dd = d[(d > 0) & (d < t_max)]
    return dd


def _boundary_length_in(outer: ConvexPolygon, region: ConvexPolygon, t: float) -> float:
    v = outer.profile.vertices_at(t)
    if v is None:
        return 0.0
    w = np.roll(v, -1, axis=0)
    lo = np.zeros(len(v))
    hi = np.ones(len(v))
    dirn = w - v
    for n, c in zip(region.normals, region.offsets):
        num = c - v @ n
        den = dirn @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            tt = num / den
        pos = den > 0
        neg = den < 0
        hi = np.where(pos, np.minimum(hi, tt), hi)
        lo = np.where(neg, np.maximum(lo, tt), lo)
        out = (den == 0) & (num < 0)
        hi = np.where(out, -1.0, hi)
    seg = np.maximum(hi - lo, 0.0) * np.linalg.norm(dirn, axis=1)
    return float(seg.sum())


# ------------------------------------------------------------ holed-case objects
def shellifying_hole(domain: HoledDomain) -> tuple[float, ConvexPolygon]:
    """Inner parallel set of the outer polygon with the hole's area."""
    target = domain.hole.area
    prof = domain.outer.profile
    if target >= domain.outer.area:
        raise ConstraintViolation("hole area is not smaller than the outer area")
    f = lambda t: float(prof.area(t)) - target  # noqa: E731
    t_star = brentq(f, 0.0, prof.inradius, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    K = inner_parallel(domain.outer, t_star)
    if K is None or abs(K.area - target) > 1e-10 * target:
        # area is strictly decreasing, so a final bisection on the clipped area settles rounding
        lo, hi = max(t_star - 1e-12, 0.0), min(t_star + 1e-12, prof.inradius)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            Km = inner_parallel(domain.outer, mid)
            if Km is not None and Km.area > target:
                lo = mid
            else:
                hi = mid
        t_star = 0.5 * (lo + hi)
        K = inner_parallel(domain.outer, t_star)
    if K is None or abs(K.area - target) > 1e-10 * target:
        raise ConstraintViolation("shellifying hole bisection did not reach the area tolerance")
    return float(t_star), K


def _excess_density(w: WebFunction):
    p = w.profile.params.p
    zmp = w.z_m**p

    def f(s):
        return np.where(s >= w.plateau_depth, 0.0, w.energy_density(s) - zmp)

    return f


def weak_inner_asymmetry(domain: HoledDomain, w: WebFunction, method: str = "slab", rtol: float = 1e-9) -> float:
    """``∫_{Θ \\ K} (|∇w|^p + w^p - z_m^p)``; the integrand vanishes on ``K`` and on the plateau."""
    _, K = shellifying_hole(domain)
    f = _excess_density(w)
    whole = integrate_distance_function(w.outer, domain.hole.vertices, f, w.plateau_depth, 0.0, method, rtol)
    overlap = _intersect(domain.hole, K)
    inside_k = 0.0
    if overlap is not None:
        inside_k = integrate_distance_function(w.outer, overlap, f, w.plateau_depth, 0.0, method, rtol)
    return max(whole - inside_k, 0.0)


def _intersect(a: ConvexPolygon, b: ConvexPolygon) -> np.ndarray | None:
    v = _clip_many(a.vertices, b.normals, b.offsets)
    if len(v) < 3 or _poly_area(v) <= 0:
        return None
    return v


def stratified_region_integral(region: ConvexPolygon, g: Callable, exclude: ConvexPolygon | None = None, n_side: int = 1000, seed: int = 0) -> float:
    """Jittered-grid Monte Carlo over the region's bounding box (oracle use)."""
    rng = np.random.default_rng(seed)
    lo = region.vertices.min(axis=0)
    hi = region.vertices.max(axis=0)
    h = (hi - lo) / n_side
    total = 0.0
    idx = np.arange(n_side)
    for row in range(n_side):
        pts = np.column_stack(
            [lo[0] + (idx + rng.random(n_side)) * h[0], np.full(n_side, lo[1] + (row + rng.random()) * h[1])]
        )
        pts[:, 1] = lo[1] + (row + rng.random(n_side)) * h[1]
        mask = region.contains(pts)
        if exclude is not None:
            mask &= ~exclude.contains(pts)
        if mask.any():
            total += float(g(pts[mask]).sum())
    return total * h[0] * h[1]


@dataclass(frozen=True)
class CriticalLevel:
    T: float
    alpha_out: float
    hausdorff0: float
    depth_T: float
    levels_checked: int


def critical_level_and_outer_asymmetry(outer: ConvexPolygon, w: WebFunction, n_levels: int = 256) -> CriticalLevel:
    """Sweep sublevel sets of ``w`` downward from ``z_M`` and return the
    smallest level ``T`` such that every swept level in ``[T, z_M]`` keeps half
    the outer Hausdorff asymmetry and a comparable level gradient."""
    prof = outer.profile
    ball0 = steiner_point_and_ball(outer)
    a0 = hausdorff_distance(outer, ball0.disc)
    reach = min(w.plateau_depth, prof.inradius)
    ts = reach * np.arange(n_levels) / n_levels
    levels = w.profile.psi_at(w.r_out - ts)
    ells = w.profile.dpsi_at(w.r_out - ts)
    ell_M = float(w.profile.dpsi[-1])
    last = None
    for k in range(1, n_levels):
        poly = prof.polygon_at(float(ts[k]))
        if poly is None:
            break
        ak = hausdorff_distance(poly, steiner_point_and_ball(poly).disc)
        ok = ak >= 0.5 * a0 and 0.5 * ell_M <= ells[k] <= 2.0 * ell_M
        if not ok:
            break
        last = k
    if last is None:
        raise TUndefinedError(
            f"first level below z_M fails (depth {ts[1]!r}, asymmetry {a0!r}, level gradient range check)"
        )
    T = float(levels[last])
    alpha = (w.z_M - T) ** 3 * a0**2.5
    return CriticalLevel(T, float(alpha), float(a0), float(ts[last]), last)


@dataclass(frozen=True)
class HybridAsymmetry:
    alpha_out: float
    A_tilde: float
    alpha_hyb: float
    T: float


def hybrid_asymmetry(domain: HoledDomain, w: WebFunction) -> HybridAsymmetry:
    crit = critical_level_and_outer_asymmetry(domain.outer, w)
    A = weak_inner_asymmetry(domain, w)
    return HybridAsymmetry(crit.alpha_out, A, max(crit.alpha_out, A), crit.T)


# --------------------------------------------------------------------- chains
def bernoulli_constant(p: float, q: float, d: int, P: float, z_m: float) -> float:
    """Constant of the Bernoulli-form lower bound on the convex deficit."""
    omega = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    base = P ** (1 / q - d / (p * (d - 1))) / (d ** (d / (d - 1)) * omega ** (1 / (d - 1)))
    return z_m**p / p * base ** (p - 1)


REPORT_FIELDS = (
    "sigma_optimal",
    "quotient_web",
    "deficit_p",
    "A_tilde",
    "alpha_out",
    "alpha_hyb",
    "T_level",
    "flags",
    "constants",
)
FLAG_FIELDS = ("wq", "dwp", "wp", "inner_chain")
CONSTANT_FIELDS = ("bernoulli_c", "z_m", "z_M", "ell_zM")


@dataclass
class DeficitReport:
    sigma_optimal: float
    quotient_web: float
    deficit_p: float
    A_tilde: float
    alpha_out: float
    alpha_hyb: float
    T_level: float
    flags: dict
    constants: dict
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in REPORT_FIELDS[:7]}
        out["flags"] = {k: self.flags.get(k) for k in FLAG_FIELDS}
        out["constants"] = {k: self.constants.get(k) for k in CONSTANT_FIELDS}
        if self.extras:
            out["extras"] = dict(self.extras)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "DeficitReport":
        return cls(
            **{k: obj[k] for k in REPORT_FIELDS[:7]},
            flags=dict(obj["flags"]),
            constants=dict(obj["constants"]),
            extras=dict(obj.get("extras", {})),
        )

    def to_json(self) -> str:
        from .harness import dumps_stable

        return dumps_stable(self.to_dict())

    def csv_row(self) -> list:
        row = [self.to_dict()[k] for k in REPORT_FIELDS[:7]]
        row += [self.flags.get(k) for k in FLAG_FIELDS]
        row += [self.constants.get(k) for k in CONSTANT_FIELDS]
        return row

    @staticmethod
    def csv_header() -> list[str]:
        return list(REPORT_FIELDS[:7]) + [f"flags.{k}" for k in FLAG_FIELDS] + [f"constants.{k}" for k in CONSTANT_FIELDS]


def comparison_chain_report(
    domain: Union[ConvexPolygon, HoledDomain],
    profile: RadialProfile,
    tol: float = 1e-9,
    sigma_h: float | None = None,
) -> DeficitReport:
    """Evaluate and flag every inequality of the comparison chain.

    ``profile`` is the radial minimizer on the comparison ball (convex
    domain) or shell (holed domain); it is renormalized to unit boundary
    ``L^q`` norm first.  ``tol`` is the absolute slack allowed on each flag.
    ``sigma_h``, when given, is a discrete estimate of the domain's own trace
    constant and is reported alongside.
    """
    prof = profile.normalized()
    p, q, d = prof.params.p, prof.params.q, prof.params.d
    w = build_web(prof, domain.outer if isinstance(domain, HoledDomain) else domain)
    outer = w.outer
    ell_M = float(prof.dpsi[-1])
    consts = {"z_m": prof.z_m, "z_M": prof.z_M, "ell_zM": ell_M}
    sigma_B = prof.sigma
    bdry_B = prof.boundary_integral
    bdry = prof.z_M**q * outer.perimeter
    N = bdry
    if isinstance(domain, ConvexPolygon):
        ints = web_integrals_convex(w)
        Q = web_quotient(ints, p, q)
        dV = prof.params.volume - outer.area
        deficit_p = sigma_B**p - Q**p
        C = bernoulli_constant(p, q, d, outer.perimeter, prof.z_m)
        consts["bernoulli_c"] = C
        chain_rhs = prof.z_m**p * dV / N ** (p / q)
        flags = {
            "wq": abs(bdry - bdry_B) <= tol * max(1.0, bdry_B),
            "dwp": ints.Igrad <= prof.energy_grad + tol,
            "wp": ints.Ip + prof.z_m**p * dV <= prof.energy_lp + tol,
            "inner_chain": None,
        }
        extras = {
            "deficit_chain_margin": deficit_p - chain_rhs,
            "deficit_chain": deficit_p - chain_rhs >= -tol,
            "bernoulli_margin": (sigma_B - Q) - C * dV,
            "bernoulli": (sigma_B - Q) - C * dV >= -tol,
            "volume_gap": dV,
            "Igrad": ints.Igrad,
            "Ip": ints.Ip,
            "Ibdry": ints.Ibdry,
        }
        if sigma_h is not None:
            extras["sigma_h"] = sigma_h
            extras["deficit_h"] = sigma_B - sigma_h
        return DeficitReport(sigma_B, Q, deficit_p, 0.0, 0.0, 0.0, math.nan, flags, consts, extras)

    # holed domain
    ints = web_integrals_convex(w)
    hole_vol = integrate_distance_function(outer, domain.hole.vertices, lambda s: w.value_of_distance(s) ** p, w.plateau_depth, prof.z_m**p)
    hole_grad = integrate_distance_function(outer, domain.hole.vertices, lambda s: w.grad_of_distance(s) ** p, w.plateau_depth, 0.0)
    Ip = ints.Ip - hole_vol
    Ig = ints.Igrad - hole_grad
    Q = (Ip + Ig) ** (1.0 / p) / bdry ** (1.0 / q)
    hyb = hybrid_asymmetry(domain, w)
    deficit_p = sigma_B**p - Q**p
    inner_margin = deficit_p - hyb.A_tilde / N ** (p / q)
    P = outer.perimeter
    area = domain.area
    consts["bernoulli_c"] = None
    flags = {
        "wq": abs(bdry - bdry_B) <= tol * max(1.0, bdry_B),
        "dwp": Ig <= prof.energy_grad + tol,
        "wp": Ip <= prof.energy_lp + tol,
        "inner_chain": inner_margin >= -tol,
    }
    extras = {
        "inner_chain_margin": inner_margin,
        "inner_constant": P ** ((p - 1) / q) / (p * area ** ((p - 1) / p)),
        "outer_factor": P ** ((p - 1) / q) / (12.0 * ell_M * p * area ** ((p - 1) / p)),
        "deficit_web": sigma_B - Q,
        "outer_ratio": (sigma_B - Q) / hyb.alpha_out if hyb.alpha_out > 0 else math.inf,
        "Igrad": Ig,
        "Ip": Ip,
        "Ibdry": bdry,
    }
    if sigma_h is not None:
        extras["sigma_h"] = sigma_h
        extras["deficit_h"] = sigma_B - sigma_h
    return DeficitReport(sigma_B, Q, deficit_p, hyb.A_tilde, hyb.alpha_out, hyb.alpha_hyb, hyb.T, flags, consts, extras)


def nearly_annular_check(domain: HoledDomain, R1: float, R2: float, center=None) -> dict:
    """Radial-graph test of both boundaries about a common centre inside the hole.

    Outer boundary needs ``‖u‖ < R2/2`` and the hole ``‖v‖ ≤ R1/2`` with
    ``‖·‖ = max(sup|·|, sup|·'|)``.
    """
    if center is None:
        center = steiner_point_and_ball(domain.outer).center
    c = np.asarray(center, dtype=float)
    inside = bool(domain.hole.distance_to_boundary(c) > 0)
    if not inside:
        return {"nearly_annular": False, "norm_u": math.inf, "norm_v": math.inf, "diagnostic": "centre not inside the hole"}
    su, lu = radial_graph_norms(domain.outer, R2, c)
    sv, lv = radial_graph_norms(domain.hole, R1, c)
    nu, nv = max(su, lu), max(sv, lv)
    return {"nearly_annular": bool(nu < R2 / 2 and nv <= R1 / 2), "norm_u": nu, "norm_v": nv, "diagnostic": ""}
