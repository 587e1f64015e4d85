"""Triangular meshes of convex polygons with an optional convex hole."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import triangle

from ..convex2d import ConvexPolygon

OUTER = "outer"
INNER = "inner"
_MARK = {OUTER: 1, INNER: 2}
_TAG = {1: OUTER, 2: INNER}


class MeshResolutionError(ValueError):
    """The requested edge length cannot resolve the hole clearance."""


@dataclass(frozen=True, eq=False)
class TriMesh:
    nodes: np.ndarray  # (n, 2)
    triangles: np.ndarray  # (m, 3), CCW
    boundary_edges: np.ndarray  # (k, 2)
    edge_tags: tuple  # tag per boundary edge
    h: float

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        tris = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        edges = np.array(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        a = self._signed_areas(nodes, tris)
        flip = a < 0
        if flip.any():
            tris[flip] = tris[flip][:, [0, 2, 1]]
        for arr in (nodes, tris, edges):
            arr.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "boundary_edges", edges)
        object.__setattr__(self, "edge_tags", tuple(str(t) for t in self.edge_tags))
        if len(self.edge_tags) != len(edges):
            raise ValueError("one tag per boundary edge is required")

    @staticmethod
    def _signed_areas(nodes, tris):
        a, b, c = nodes[tris[:, 0]], nodes[tris[:, 1]], nodes[tris[:, 2]]
        return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))

    @cached_property
    def areas(self) -> np.ndarray:
        return self._signed_areas(self.nodes, self.triangles)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def tags(self) -> set[str]:
        return set(self.edge_tags)

    def edges_with_tag(self, tag: str) -> np.ndarray:
        mask = np.array([t == tag for t in self.edge_tags], dtype=bool)
        return self.boundary_edges[mask]

    def boundary_loops(self) -> dict[str, list[list[int]]]:
        """Closed node loops per tag (raises if a tag's edges do not close up)."""
        loops: dict[str, list[list[int]]] = {}
        for tag in sorted(self.tags):
            edges = self.edges_with_tag(tag)
            nxt: dict[int, list[int]] = {}
            for i, j in edges.tolist():
                nxt.setdefault(i, []).append(j)
                nxt.setdefault(j, []).append(i)
            if any(len(v) != 2 for v in nxt.values()):
                raise ValueError(f"boundary edges tagged {tag!r} do not form simple loops")
            seen: set[int] = set()
            out = []
            for start in sorted(nxt):
                if start in seen:
                    continue
                loop, prev, cur = [start], None, start
                seen.add(start)
                while True:
                    a, b = nxt[cur]
                    step = a if a != prev else b
                    if step == start:
                        break
                    loop.append(step)
                    seen.add(step)
                    prev, cur = cur, step
                out.append(loop)
            loops[tag] = out
        return loops

    def refine(self) -> "TriMesh":
        """Red refinement: every triangle split in four through edge midpoints."""
        tris = self.triangles
        e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        key = np.sort(e, axis=1)
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        mids = 0.5 * (self.nodes[uniq[:, 0]] + self.nodes[uniq[:, 1]])
        base = len(self.nodes)
        m = len(tris)
        m01, m12, m20 = inv[:m] + base, inv[m : 2 * m] + base, inv[2 * m :] + base
        a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
        new_tris = np.concatenate(
            [
                np.column_stack([a, m01, m20]),
                np.column_stack([m01, b, m12]),
                np.column_stack([m20, m12, c]),
                np.column_stack([m01, m12, m20]),
            ]
        )
        lookup = {tuple(k): i + base for i, k in enumerate(uniq.tolist())}
        new_edges, new_tags = [], []
        for (i, j), tag in zip(self.boundary_edges.tolist(), self.edge_tags):
            mid = lookup[(min(i, j), max(i, j))]
            new_edges += [(i, mid), (mid, j)]
            new_tags += [tag, tag]
        return TriMesh(np.vstack([self.nodes, mids]), new_tris, np.array(new_edges), tuple(new_tags), self.h / 2)

    def to_dict(self) -> dict:
        return {
            "nodes": self.nodes.tolist(),
            "triangles": self.triangles.tolist(),
            "boundary_edges": [{"i": int(i), "j": int(j), "tag": t} for (i, j), t in zip(self.boundary_edges.tolist(), self.edge_tags)],
            "h": self.h,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "TriMesh":
        be = obj["boundary_edges"]
        edges = np.array([[e["i"], e["j"]] for e in be], dtype=np.int64).reshape(-1, 2)
        tags = tuple(e["tag"] for e in be)
        return cls(np.asarray(obj["nodes"], float), np.asarray(obj["triangles"], np.int64), edges, tags, float(obj.get("h", math.nan)))

    @classmethod
    def from_json(cls, text: str) -> "TriMesh":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "TriMesh":
        return cls.from_json(Path(path).read_text())


def _sample_boundary(poly: ConvexPolygon, h: float) -> np.ndarray:
    """Vertices plus equally spaced points on every edge, spacing at most ``h``."""
    pts = []
    v = poly.vertices
    for i in range(poly.n):
        a, b = v[i], v[(i + 1) % poly.n]
        k = max(1, int(math.ceil(np.linalg.norm(b - a) / h - 1e-9)))
        s = np.arange(k)[:, None] / k
        pts.append(a + s * (b - a))
    return np.vstack(pts)


def mesh_domain(outer: ConvexPolygon, hole: ConvexPolygon | None = None, h: float = 0.05, min_angle: float = 30.0) -> TriMesh:
    """Quality Delaunay mesh with target edge length ``h``.

    Boundary nodes lie exactly on the input polygon edges and are never split
    by the mesher, so the boundary of the mesh is the boundary of the domain.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    ob = _sample_boundary(outer, h)
    segs = [np.column_stack([np.arange(len(ob)), np.roll(np.arange(len(ob)), -1)])]
    marks = [np.full(len(ob), _MARK[OUTER])]
    pts = [ob]
    holes = None
    if hole is not None:
        clearance = float(np.min(outer.distance_to_boundary(hole.vertices)))
        if clearance < 2 * h:
            raise MeshResolutionError(f"clearance {clearance!r} is below 2h = {2 * h!r}")
        ib = _sample_boundary(hole, h)
        off = len(ob)
        segs.append(off + np.column_stack([np.arange(len(ib)), np.roll(np.arange(len(ib)), -1)]))
        marks.append(np.full(len(ib), _MARK[INNER]))
        pts.append(ib)
        holes = np.array([hole.centroid])
    data = {
        "vertices": np.vstack(pts),
        "segments": np.vstack(segs),
        "segment_markers": np.concatenate(marks)[:, None],
    }
    if holes is not None:
        data["holes"] = holes
    max_area = math.sqrt(3) / 4 * h * h
    out = triangle.triangulate(data, f"pq{min_angle:g}a{max_area:.17g}YQ")
    seg = np.asarray(out["segments"], dtype=np.int64)
    smark = np.asarray(out["segment_markers"]).ravel()
    tags = tuple(_TAG[int(m)] for m in smark)
    return TriMesh(np.asarray(out["vertices"], float), np.asarray(out["triangles"], np.int64), seg, tags, h)
