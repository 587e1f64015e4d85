"""Convex polygon kernel.

Everything here works on strictly convex polygons stored as counter-clockwise
vertex cycles.  Support-function integrals are evaluated in closed form on the
normal cone of each vertex, where the support function is a single sinusoid.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import ConvexHull

TWO_PI = 2.0 * math.pi
COLLINEAR_TOL = 1e-12


class GeometryError(ValueError):
    """Raised when a vertex list does not describe a strictly convex CCW polygon."""


class PolygonFormatError(ValueError):
    """Raised by the JSON reader, carrying a line/column position."""

    def __init__(self, message: str, lineno: int = 1, colno: int = 1):
        super().__init__(f"{message} (line {lineno}, column {colno})")
        self.lineno = lineno
        self.colno = colno


class GenerationError(RuntimeError):
    """Raised when random polygon generation runs out of retries."""


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _clean_cycle(v: np.ndarray) -> np.ndarray:
    """Drop duplicate and collinear vertices from a closed cycle."""
    scale = max(float(np.max(np.abs(v))), 1.0)
    changed = True
    while changed and len(v) >= 3:
        changed = False
        nxt = np.roll(v, -1, axis=0)
        dup = np.linalg.norm(nxt - v, axis=1) <= 1e-14 * scale
        if dup.any():
            v = v[~dup]
            changed = True
            continue
        e_in = v - np.roll(v, 1, axis=0)
        e_out = np.roll(v, -1, axis=0) - v
        norms = np.linalg.norm(e_in, axis=1) * np.linalg.norm(e_out, axis=1)
        cr = _cross(e_in, e_out) / norms
        dot = np.einsum("ij,ij->i", e_in, e_out)
        flat = (np.abs(cr) <= COLLINEAR_TOL) & (dot > 0)
        if flat.any():
            # remove one at a time so that long flat runs collapse cleanly
            v = np.delete(v, int(np.argmax(flat)), axis=0)
            changed = True
    return v


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """Strictly convex polygon with counter-clockwise vertices.

    Duplicate points and vertices whose turning cross product is below
    ``1e-12`` (relative) are merged at construction.  Anything else that is
    not strictly convex and CCW raises :class:`GeometryError`.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float, copy=True)
        if v.ndim != 2 or v.shape[1] != 2:
            raise GeometryError(f"vertices must have shape (n, 2), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise GeometryError("vertices must be finite")
        v = _clean_cycle(v)
        if len(v) < 3:
            raise GeometryError("fewer than 3 distinct non-collinear vertices")
        e = np.roll(v, -1, axis=0) - v
        turns = _cross(e, np.roll(e, -1, axis=0))
        if np.any(turns <= 0):
            k = int(np.argmin(turns))
            raise GeometryError(
                f"polygon is not strictly convex and counter-clockwise at vertex {(k + 1) % len(v)}"
            )
        ang = np.arctan2(e[:, 1], e[:, 0])
        turn_angles = np.mod(np.roll(ang, -1) - ang, TWO_PI)
        if abs(turn_angles.sum() - TWO_PI) > 1e-9:
            raise GeometryError("vertex cycle winds more than once")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    # ------------------------------------------------------------------ basics
    @classmethod
    def from_points(cls, points: Sequence[Sequence[float]]) -> "ConvexPolygon":
        """Convex hull of an arbitrary point cloud."""
        pts = np.asarray(points, dtype=float)
        hull = ConvexHull(pts)
        return cls(pts[hull.vertices])

    @property
    def n(self) -> int:
        return len(self.vertices)

    @cached_property
    def edges(self) -> np.ndarray:
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edges, axis=1)

    @cached_property
    def normals(self) -> np.ndarray:
        """Outward unit normals; ``normals[i]`` belongs to edge ``v[i] -> v[i+1]``."""
        e = self.edges / self.edge_lengths[:, None]
        return np.column_stack([e[:, 1], -e[:, 0]])

    @cached_property
    def offsets(self) -> np.ndarray:
        """Support values so that the polygon is ``{x : normals @ x <= offsets}``."""
        return np.einsum("ij,ij->i", self.normals, self.vertices)

    @cached_property
    def normal_angles(self) -> np.ndarray:
        nrm = self.normals
        return np.arctan2(nrm[:, 1], nrm[:, 0])

    @cached_property
    def area(self) -> float:
        v = self.vertices
        return 0.5 * float(np.sum(_cross(v, np.roll(v, -1, axis=0))))

    @cached_property
    def perimeter(self) -> float:
        return float(self.edge_lengths.sum())

    @cached_property
    def centroid(self) -> np.ndarray:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        c = _cross(v, w)
        return ((v + w) * c[:, None]).sum(axis=0) / (6.0 * self.area)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all(x @ self.normals.T <= self.offsets + tol, axis=-1)

    def distance_to_boundary(self, x: np.ndarray) -> np.ndarray:
        """Distance to the boundary for points inside (``min_i c_i - n_i.x``)."""
        x = np.asarray(x, dtype=float)
        return np.min(self.offsets - x @ self.normals.T, axis=-1)

    def distance(self, x: np.ndarray) -> np.ndarray:
        """Euclidean distance from points to the polygon (zero inside)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        a = self.vertices[None, :, :]
        e = self.edges[None, :, :]
        rel = x[:, None, :] - a
        s = np.clip(np.einsum("pij,pij->pi", rel, np.broadcast_to(e, rel.shape)) / self.edge_lengths**2, 0.0, 1.0)
        d = np.linalg.norm(rel - s[..., None] * e, axis=2).min(axis=1)
        d[self.contains(x)] = 0.0
        return d

    def support(self, theta: np.ndarray | float) -> np.ndarray:
        th = np.asarray(theta, dtype=float)
        u = np.stack([np.cos(th), np.sin(th)], axis=-1)
        return np.max(u @ self.vertices.T, axis=-1)

    def translated(self, shift: Sequence[float]) -> "ConvexPolygon":
        return ConvexPolygon(self.vertices + np.asarray(shift, dtype=float))

    def scaled(self, factor: float, about: Sequence[float] | None = None) -> "ConvexPolygon":
        c = np.zeros(2) if about is None else np.asarray(about, dtype=float)
        return ConvexPolygon(c + factor * (self.vertices - c))

    def rotated(self, angle: float, about: Sequence[float] | None = None) -> "ConvexPolygon":
        c = np.zeros(2) if about is None else np.asarray(about, dtype=float)
        ca, sa = math.cos(angle), math.sin(angle)
        rot = np.array([[ca, -sa], [sa, ca]])
        return ConvexPolygon(c + (self.vertices - c) @ rot.T)

    def with_perimeter(self, target: float) -> "ConvexPolygon":
        """Rescale about the centroid so that the perimeter equals ``target``."""
        out = self.scaled(target / self.perimeter, about=self.centroid)
        # one correction step removes the rounding left by the first scaling
        return out.scaled(target / out.perimeter, about=out.centroid)

    @cached_property
    def profile(self) -> "ParallelProfile":
        return parallel_profile(self)


@dataclass(frozen=True)
class Disc:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if not self.radius >= 0:
            raise GeometryError("disc radius must be non-negative")

    def support(self, theta):
        th = np.asarray(theta, dtype=float)
        return self.center[0] * np.cos(th) + self.center[1] * np.sin(th) + self.radius


@dataclass(frozen=True)
class SteinerBall:
    center: tuple[float, float]
    radius: float

    @property
    def disc(self) -> Disc:
        return Disc(self.center, self.radius)


@dataclass(frozen=True)
class AsymmetryIndices:
    star: float
    sharp: float
    optimal_center_star: tuple[float, float]
    optimal_center_sharp: tuple[float, float]


def regular_polygon(n: int, circumradius: float = 1.0, center=(0.0, 0.0), rotation: float = 0.0) -> ConvexPolygon:
    th = rotation + TWO_PI * np.arange(n) / n
    pts = np.column_stack([np.cos(th), np.sin(th)]) * circumradius + np.asarray(center, dtype=float)
    return ConvexPolygon(pts)


def rectangle(width: float, height: float, center=(0.0, 0.0)) -> ConvexPolygon:
    cx, cy = center
    w, h = width / 2.0, height / 2.0
    return ConvexPolygon([[cx - w, cy - h], [cx + w, cy - h], [cx + w, cy + h], [cx - w, cy + h]])


# --------------------------------------------------------------------------- areas
def area_perimeter(poly: ConvexPolygon) -> tuple[float, float]:
    return poly.area, poly.perimeter


def quermassintegrals_2d(poly: ConvexPolygon) -> tuple[float, float, float]:
    return poly.area, poly.perimeter / 2.0, math.pi


def outer_parallel_area(poly: ConvexPolygon, r: float) -> float:
    """Area of ``poly + r*B`` by Green's theorem on its boundary.

    The boundary of the outer parallel body alternates between translated
    edges and circular arcs centred at the vertices, so the line integral
    ``(x dy - y dx)/2`` is summed piece by piece in closed form.
    """
    v, nrm = poly.vertices, poly.normals
    w = np.roll(v, -1, axis=0)
    a = v + r * nrm
    b = w + r * nrm
    total = float(np.sum(_cross(a, b)))
    ang = poly.normal_angles
    a0 = np.roll(ang, 1)  # normal of incoming edge
    a1 = a0 + np.mod(ang - a0, TWO_PI)
    cx, cy = v[:, 0], v[:, 1]
    # x dy - y dx on c + r(cos t, sin t): r^2 + r(cx cos t + cy sin t)
    arcs = r * r * (a1 - a0) + r * (cx * (np.sin(a1) - np.sin(a0)) + cy * (np.cos(a0) - np.cos(a1)))
    return 0.5 * (total + float(np.sum(arcs)))


# ----------------------------------------------------------------- inner parallel
def _clip_halfplane(v: np.ndarray, n: np.ndarray, c: float) -> np.ndarray:
    """Vectorised Sutherland-Hodgman step against ``n.x <= c``."""
    s = v @ n - c
    inside = s <= 0.0
    if inside.all():
        return v
    if not inside.any():
        return v[:0]
    s_next = np.roll(s, -1)
    v_next = np.roll(v, -1, axis=0)
    crossing = inside != np.roll(inside, -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = s / (s - s_next)
        x = v + lam[:, None] * (v_next - v)
    pts = np.stack([v, x], axis=1)
    keep = np.stack([inside, crossing], axis=1)
    return pts[keep]


def _clip_offsets(poly: ConvexPolygon, t: float) -> np.ndarray:
    v = poly.vertices
    for n, c in zip(poly.normals, poly.offsets - t):
        v = _clip_halfplane(v, n, c)
        if len(v) == 0:
            break
    return v


def inner_parallel(poly: ConvexPolygon, t: float) -> ConvexPolygon | None:
    """Inner parallel set at distance ``t``; ``None`` stands for the empty set."""
    if t < 0:
        raise ValueError("inner parallel distance must be non-negative")
    if t == 0:
        return poly
    v = _clip_offsets(poly, t)
    if len(v) < 3:
        return None
    try:
        out = ConvexPolygon(v)
    except GeometryError:
        return None
    if out.area <= 1e-15 * poly.area:
        return None
    return out


def inradius(poly: ConvexPolygon, tol: float = 1e-12) -> float:
    """Largest ``t`` with a non-empty inner parallel set, by bisection."""
    # ρ·P/2 ≤ |Ω| ≤ P²/(4π) gives ρ ≤ P/(2π)
    lo, hi = 0.0, poly.perimeter / TWO_PI * (1.0 + 1e-9)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if len(_clip_offsets(poly, mid)) == 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True, eq=False)
class ParallelProfile:
    """Exact description of ``t -> Ω_t`` by edge-collapse events.

    Between consecutive event times the perimeter is affine and the area is
    quadratic in ``t``:  ``P(t) = P_k - 2 S_k (t - t_k)`` and
    ``A(t) = A_k - P_k (t - t_k) + S_k (t - t_k)^2`` with
    ``S_k = sum tan(phi/2)`` over the exterior angles of ``Ω_{t_k}``.
    """

    normals: np.ndarray
    offsets: np.ndarray
    times: np.ndarray  # event times t_0 = 0 < ... < t_K = inradius
    perimeters: np.ndarray  # P at the start of each segment (length K)
    areas: np.ndarray
    slopes: np.ndarray  # S_k
    active: tuple  # active edge indices (CCW) for each segment
    neighbours: tuple  # neighbours[i] = edges sharing a skeleton arc with edge i
    final_vertices: np.ndarray

    @property
    def inradius(self) -> float:
        return float(self.times[-1])

    @property
    def incenter(self) -> np.ndarray:
        return self.final_vertices.mean(axis=0)

    def _segment(self, t):
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.slopes) - 1)
        return k, t - self.times[k]

    def perimeter(self, t):
        k, tau = self._segment(t)
        out = self.perimeters[k] - 2.0 * self.slopes[k] * tau
        return np.where(np.asarray(t) >= self.times[-1], 0.0, out)

    def perimeter_slope(self, t=None):
        """``dP/dt`` on each segment (``t=None``) or at the given depths."""
        if t is None:
            return -2.0 * self.slopes
        k, _ = self._segment(t)
        return -2.0 * self.slopes[k]

    def area(self, t):
        k, tau = self._segment(t)
        out = self.areas[k] - self.perimeters[k] * tau + self.slopes[k] * tau**2
        return np.where(np.asarray(t) >= self.times[-1], 0.0, out)

    def vertices_at(self, t: float) -> np.ndarray | None:
        """Vertices of ``Ω_t`` from the active edge lines (fast path for sweeps)."""
        if t >= self.times[-1]:
            return None
        k = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.slopes) - 1))
        idx = np.asarray(self.active[k])
        return _line_vertices(self.normals[idx], self.offsets[idx] - t)

    def polygon_at(self, t: float) -> ConvexPolygon | None:
        v = self.vertices_at(t)
        if v is None:
            return None
        try:
            return ConvexPolygon(v)
        except GeometryError:
            return None


def _line_vertices(nrm: np.ndarray, off: np.ndarray) -> np.ndarray:
    """Intersections of consecutive lines; vertex k joins line k-1 and line k."""
    n0, c0 = np.roll(nrm, 1, axis=0), np.roll(off, 1)
    det = _cross(n0, nrm)
    x = (c0 * nrm[:, 1] - off * n0[:, 1]) / det
    y = (n0[:, 0] * off - nrm[:, 0] * c0) / det
    return np.column_stack([x, y])


def parallel_profile(poly: ConvexPolygon) -> ParallelProfile:
    nrm, off = poly.normals, poly.offsets
    ang = poly.normal_angles
    active = list(range(poly.n))
    neighbours = [set() for _ in range(poly.n)]
    t = 0.0
    times, pers, areas, slopes, act = [0.0], [], [], [], []
    scale = poly.perimeter
    final = poly.vertices.copy()
    while True:
        idx = np.asarray(active)
        m = len(idx)
        gaps = np.mod(ang[idx] - np.roll(ang[idx], 1), TWO_PI)  # gap before edge k
        if m < 3 or np.any(gaps >= math.pi - 1e-14):
            break
        v = _line_vertices(nrm[idx], off[idx] - t)
        final = v
        nxt = np.roll(v, -1, axis=0)
        tang = np.column_stack([-nrm[idx, 1], nrm[idx, 0]])
        lengths = np.einsum("ij,ij->i", nxt - v, tang)
        half = np.tan(gaps / 2.0)
        rates = half + np.roll(half, -1)
        area = 0.5 * float(np.sum(_cross(v, nxt)))
        for k in range(m):
            neighbours[idx[k]].add(int(idx[k - 1]))
            neighbours[idx[k - 1]].add(int(idx[k]))
        pers.append(float(np.sum(np.maximum(lengths, 0.0))))
        areas.append(max(area, 0.0))
        slopes.append(float(half.sum()))
        act.append(tuple(int(i) for i in idx))
        dts = np.maximum(lengths, 0.0) / rates
        dt = float(dts.min())
        t += dt
        times.append(t)
        gone = dts <= dt * (1.0 + 1e-9) + 1e-15 * scale
        active = [int(i) for i, g in zip(idx, gone) if not g]
        if len(active) < 3:
            final = _line_vertices(nrm[idx], off[idx] - t)
            break
        gaps_next = np.mod(ang[active] - np.roll(ang[active], 1), TWO_PI)
        if np.any(gaps_next >= math.pi - 1e-14):
            final = _line_vertices(nrm[idx], off[idx] - t)
            break
    # incenter: the set where all surviving constraints are tight
    final = final[np.all(np.isfinite(final), axis=1)]
    return ParallelProfile(
        normals=nrm,
        offsets=off,
        times=np.asarray(times),
        perimeters=np.asarray(pers),
        areas=np.asarray(areas),
        slopes=np.asarray(slopes),
        active=tuple(act),
        neighbours=tuple(tuple(sorted(s)) for s in neighbours),
        final_vertices=final,
    )


# -------------------------------------------------------------- Steiner point
def _vertex_arcs(poly: ConvexPolygon) -> tuple[np.ndarray, np.ndarray]:
    """Normal-cone arc ``[a_i, b_i]`` of each vertex, with ``b_i > a_i``."""
    ang = poly.normal_angles
    a = np.roll(ang, 1)
    b = a + np.mod(ang - a, TWO_PI)
    return a, b


def steiner_point_and_ball(poly: ConvexPolygon) -> SteinerBall:
    """Steiner point and half mean width, integrated exactly arc by arc."""
    a, b = _vertex_arcs(poly)
    v = poly.vertices
    d = b - a
    s2 = np.sin(2 * b) - np.sin(2 * a)
    c2 = np.cos(2 * b) - np.cos(2 * a)
    icc = d / 2 + s2 / 4
    iss = d / 2 - s2 / 4
    ics = -c2 / 4
    cx = np.sum(v[:, 0] * icc + v[:, 1] * ics) / math.pi
    cy = np.sum(v[:, 0] * ics + v[:, 1] * iss) / math.pi
    width = np.sum(v[:, 0] * (np.sin(b) - np.sin(a)) + v[:, 1] * (np.cos(a) - np.cos(b))) / math.pi
    return SteinerBall((float(cx), float(cy)), float(width) / 2.0)


# ------------------------------------------------------------------ Hausdorff
def _poly_disc_distance_many(poly: ConvexPolygon, centers: np.ndarray, r: float) -> np.ndarray:
    """Batch version of :func:`_poly_disc_distance` over an array of centres."""
    a, b = _vertex_arcs(poly)
    rel = poly.vertices[None, :, :] - np.asarray(centers, dtype=float)[:, None, :]
    f_a = rel[..., 0] * np.cos(a) + rel[..., 1] * np.sin(a) - r
    f_b = rel[..., 0] * np.cos(b) + rel[..., 1] * np.sin(b) - r
    best = np.maximum(np.abs(f_a).max(axis=1), np.abs(f_b).max(axis=1))
    norm = np.linalg.norm(rel, axis=2)
    phi = np.arctan2(rel[..., 1], rel[..., 0])
    for sign, shift in ((1.0, 0.0), (-1.0, math.pi)):
        inside = np.mod(phi + shift - a, TWO_PI) <= (b - a)
        val = np.where(inside, np.abs(sign * norm - r), 0.0)
        best = np.maximum(best, val.max(axis=1))
    return best


def _poly_disc_distance(poly: ConvexPolygon, center, r: float) -> float:
    """max over directions of |h_P(u) - (x.u + r)|, evaluated per arc.

    On the normal cone of vertex v the difference is ``(v-x).u - r``, whose
    extrema over the arc sit at the arc ends or at ``u || (v-x)``.
    """
    a, b = _vertex_arcs(poly)
    rel = poly.vertices - np.asarray(center, dtype=float)
    f_a = rel[:, 0] * np.cos(a) + rel[:, 1] * np.sin(a) - r
    f_b = rel[:, 0] * np.cos(b) + rel[:, 1] * np.sin(b) - r
    best = max(np.abs(f_a).max(), np.abs(f_b).max())
    norm = np.linalg.norm(rel, axis=1)
    phi = np.arctan2(rel[:, 1], rel[:, 0])
    # direction of rel (maximum) or its opposite (minimum) inside [a, b]
    for shift in (0.0, math.pi):
        target = phi + shift
        k = np.mod(target - a, TWO_PI)
        inside = k <= (b - a)
        val = norm if shift == 0.0 else -norm
        if inside.any():
            best = max(best, float(np.abs(val[inside] - r).max()))
    return float(best)


def hausdorff_distance(a: ConvexPolygon | Disc, b: ConvexPolygon | Disc) -> float:
    if isinstance(a, Disc) and isinstance(b, Disc):
        return float(math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1]) + abs(a.radius - b.radius))
    if isinstance(a, Disc):
        a, b = b, a
    if isinstance(b, Disc):
        return _poly_disc_distance(a, b.center, b.radius)
    return float(max(b.distance(a.vertices).max(), a.distance(b.vertices).max()))


# ------------------------------------------------------------------ asymmetry
def _min_center(poly: ConvexPolygon, r: float) -> tuple[float, np.ndarray]:
    def obj(x):
        return _poly_disc_distance(poly, x, r)

    steiner = np.asarray(steiner_point_and_ball(poly).center)
    seeds = [poly.centroid, steiner]
    prof = poly.profile
    rho, inc = prof.inradius, prof.incenter
    g = np.linspace(-rho, rho, 32)
    gx, gy = np.meshgrid(inc[0] + g, inc[1] + g)
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    vals = _poly_disc_distance_many(poly, grid, r)
    seeds.append(grid[int(np.argmin(vals))])
    best_val, best_x = math.inf, seeds[0]
    scale = max(poly.perimeter, 1e-300)
    for s in seeds:
        res = minimize(
            obj,
            s,
            method="Nelder-Mead",
            options={"xatol": 1e-12 * scale, "fatol": 1e-14 * scale, "maxiter": 4000, "initial_simplex": None},
        )
        # restart once from the optimum to shake off a collapsed simplex
        res = minimize(obj, res.x, method="Nelder-Mead", options={"xatol": 1e-13 * scale, "fatol": 1e-15 * scale, "maxiter": 4000})
        if res.fun < best_val:
            best_val, best_x = float(res.fun), np.asarray(res.x)
    return best_val, best_x


def asymmetry_indices(poly: ConvexPolygon) -> AsymmetryIndices:
    """Hausdorff asymmetry against discs of equal perimeter (star) and area (sharp)."""
    star, cs = _min_center(poly, poly.perimeter / TWO_PI)
    sharp, ch = _min_center(poly, math.sqrt(poly.area / math.pi))
    return AsymmetryIndices(star, sharp, (float(cs[0]), float(cs[1])), (float(ch[0]), float(ch[1])))


def g_modulus(d: int, s: float) -> float:
    """Quantitative-isoperimetric modulus: ``s^2``, ``f^{-1}(s^2)`` or ``s^((d+1)/2)``."""
    if s < 0:
        raise ValueError("s must be non-negative")
    if d < 2:
        raise ValueError("dimension must be at least 2")
    if d == 2:
        return s * s
    if d >= 4:
        return s ** ((d + 1) / 2.0)
    y = s * s
    top = math.exp(-0.5)
    if y > top * (1 + 1e-15):
        raise ValueError(f"s^2 = {y} outside the range [0, e^(-1/2)] of sqrt(t log(1/t)) on (0, 1/e]")
    if y == 0:
        return 0.0
    lo, hi = 1e-300, math.exp(-1.0)

    def f(t):
        return math.sqrt(t * math.log(1.0 / t))

    if y >= f(hi):
        return hi
    while hi - lo > 1e-14 * max(hi, 1e-300) and hi - lo > 1e-300:
        mid = 0.5 * (lo + hi)
        if f(mid) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class NearlySphericalResult:
    is_nearly_spherical: bool
    sup_u: float
    lip_u: float
    norm_w1inf: float
    center: tuple[float, float]
    diagnostic: str = ""


def radial_graph_norms(poly: ConvexPolygon, R: float, center) -> tuple[float, float]:
    """``sup|u|`` and ``sup|u'|`` of ``u(θ) = ρ(θ) - R`` for the radial function about ``center``.

    On each edge the radial function is ``c / cos(θ - α)``; it is extremal at
    edge endpoints or the foot of the perpendicular, and its angular
    derivative is largest in modulus at the endpoints.
    """
    v = poly.vertices - np.asarray(center, dtype=float)
    c = poly.offsets - poly.normals @ np.asarray(center, dtype=float)
    w = np.roll(v, -1, axis=0)
    e = w - v
    s = np.clip(-np.einsum("ij,ij->i", v, e) / np.einsum("ij,ij->i", e, e), 0.0, 1.0)
    rmin = float(np.linalg.norm(v + s[:, None] * e, axis=1).min())
    rv = np.linalg.norm(v, axis=1)
    rmax = float(rv.max())
    sup_u = max(abs(rmax - R), abs(rmin - R))
    # |dρ/dθ| at each endpoint of edge i: |x| sqrt(|x|^2 - c_i^2) / c_i
    lip = 0.0
    for pts in (v, w):
        r = np.linalg.norm(pts, axis=1)
        lip = max(lip, float(np.max(r * np.sqrt(np.maximum(r * r - c * c, 0.0)) / c)))
    return sup_u, lip


def nearly_spherical_check(poly: ConvexPolygon, R: float, center=None, strict: bool = False) -> NearlySphericalResult:
    """Test whether ``∂poly`` is a radial graph ``ξ(R + u(ξ))`` with ``‖u‖_{W^{1,∞}} ≤ R/2``.

    The ``W^{1,∞}`` norm is taken as ``max(sup|u|, sup|u'|)``.  With
    ``strict=True`` the comparison is strict.
    """
    if center is None:
        center = steiner_point_and_ball(poly).center
    center = (float(center[0]), float(center[1]))
    margin = poly.distance_to_boundary(np.asarray(center))
    if not margin > 0:
        return NearlySphericalResult(False, math.inf, math.inf, math.inf, center, "center is not interior; no radial parameterization")
    sup_u, lip = radial_graph_norms(poly, R, center)
    norm = max(sup_u, lip)
    ok = norm < R / 2 if strict else norm <= R / 2
    return NearlySphericalResult(bool(ok), sup_u, lip, norm, center)


# ------------------------------------------------------------------ sampling
def random_convex_polygon(
    n: int,
    seed: int,
    target_perimeter: float = TWO_PI,
    axis_ratio: tuple[float, float] = (0.3, 0.9),
    jitter: float = 0.1,
    max_tries: int = 200,
) -> ConvexPolygon:
    """Hull of jittered ellipse points with exactly ``n`` vertices, rescaled to a perimeter."""
    if n < 3:
        raise ValueError("n must be at least 3")
    rng = np.random.default_rng(seed)
    j = jitter
    for _ in range(max_tries):
        ratio = rng.uniform(*axis_ratio)
        th = np.sort(rng.uniform(0.0, TWO_PI, n))
        rad = 1.0 + j * rng.uniform(-1.0, 1.0, n)
        pts = np.column_stack([np.cos(th), ratio * np.sin(th)]) * rad[:, None]
        rot = rng.uniform(0.0, TWO_PI)
        ca, sa = math.cos(rot), math.sin(rot)
        pts = pts @ np.array([[ca, -sa], [sa, ca]]).T
        try:
            hull = ConvexHull(pts)
            poly = ConvexPolygon(pts[hull.vertices])
        except (GeometryError, Exception):
            j *= 0.8
            continue
        if poly.n == n:
            poly = poly.translated(-poly.centroid)
            return poly.with_perimeter(target_perimeter)
        j *= 0.8
    raise GenerationError(f"no {n}-vertex convex polygon after {max_tries} tries (seed={seed})")


# ------------------------------------------------------------------ JSON I/O
_PAIR = re.compile(r"\[\s*[^\[\]]*?\]")


def _position(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def polygon_from_json(text: str) -> ConvexPolygon:
    """Parse ``{"vertices": [[x, y], ...]}`` and validate convexity and orientation."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PolygonFormatError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(obj, dict) or "vertices" not in obj:
        raise PolygonFormatError('expected an object with a "vertices" array')
    start = text.find('"vertices"')
    pairs = [m.start() for m in _PAIR.finditer(text, start)] if start >= 0 else []

    def where(k):
        if 0 <= k < len(pairs):
            return _position(text, pairs[k])
        return _position(text, max(start, 0))

    verts = obj["vertices"]
    if not isinstance(verts, list) or len(verts) < 3:
        raise PolygonFormatError("need at least 3 vertices", *where(0))
    for k, pt in enumerate(verts):
        ok = isinstance(pt, list) and len(pt) == 2 and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) for x in pt
        )
        if not ok:
            raise PolygonFormatError(f"vertex {k} is not a pair of finite numbers", *where(k))
    v = np.asarray(verts, dtype=float)
    # duplicates and collinear triples are rejected here: files must be exact
    n = len(v)
    e = np.roll(v, -1, axis=0) - v
    turns = _cross(e, np.roll(e, -1, axis=0))
    scale = np.linalg.norm(e, axis=1) * np.linalg.norm(np.roll(e, -1, axis=0), axis=1)
    for k in range(n):
        if not turns[k] > COLLINEAR_TOL * scale[k]:
            kind = "clockwise or reflex turn" if turns[k] < 0 else "collinear or repeated vertex"
            raise PolygonFormatError(f"{kind} at vertex {(k + 1) % n}", *where((k + 1) % n))
    try:
        return ConvexPolygon(v)
    except GeometryError as exc:
        raise PolygonFormatError(str(exc), *where(0)) from exc


def polygon_to_json(poly: ConvexPolygon) -> str:
    body = ",\n    ".join(f"[{x!r}, {y!r}]" for x, y in poly.vertices.tolist())
    return '{\n  "vertices": [\n    ' + body + "\n  ]\n}\n"


def load_polygon(path: str | Path) -> ConvexPolygon:
    return polygon_from_json(Path(path).read_text())


def save_polygon(poly: ConvexPolygon, path: str | Path) -> None:
    Path(path).write_text(polygon_to_json(poly))
