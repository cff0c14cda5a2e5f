"""Graph substrates: Delaunay triangulations, grids, swiss rolls, radius
graphs, and a JSON loader for external geometric graphs.

Edges are stored directed, both orientations for every undirected pair,
sorted by (receiver, sender). That ordering is what makes segment reductions
over receivers valid and deterministic downstream.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .rng import Stream


class GraphSchemaError(ValueError):
    """Graph file does not match the expected JSON schema."""


class EdgeListError(ValueError):
    """Edge list is not in canonical undirected form (i < j, unique)."""


class NodeIndexError(IndexError):
    """Edge endpoint outside [0, n)."""


class DegenerateInputError(ValueError):
    """Point set unsuitable for triangulation (collinear beyond tolerance)."""


@dataclass
class PointCloud:
    """Points plus their per-dimension [min, max] bounds."""

    points: np.ndarray
    bounds: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2:
            raise ValueError("points must be an (n, d) matrix")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("points must be finite")
        if self.bounds is None:
            if len(self.points):
                self.bounds = np.stack(
                    [self.points.min(axis=0), self.points.max(axis=0)], axis=1
                )
            else:
                self.bounds = np.zeros((self.points.shape[1], 2))
        else:
            self.bounds = np.asarray(self.bounds, dtype=np.float64)

    @property
    def n(self) -> int:
        return self.points.shape[0]


class Graph:
    """Undirected graph stored as directed edge arrays (both orientations).

    `src[k] -> dst[k]` means node src[k] sends its state to dst[k]; the
    neighbourhood of i is exactly {src[k] : dst[k] == i}. Edges are kept
    sorted by (dst, src).
    """

    __slots__ = ("n", "src", "dst", "coords", "indptr")

    def __init__(self, n: int, src, dst, coords=None):
        self.n = int(n)
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if src.shape != dst.shape or src.ndim != 1:
            raise ValueError("src/dst must be 1-d arrays of equal length")
        if len(src):
            if src.min() < 0 or dst.min() < 0 or src.max() >= n or dst.max() >= n:
                raise NodeIndexError("edge endpoint out of range")
            if np.any(src == dst):
                raise EdgeListError("self-loops are not allowed")
            key = src * self.n + dst
            if len(np.unique(key)) != len(key):
                raise EdgeListError("duplicate directed edge")
            rkey = dst * self.n + src
            if not np.array_equal(np.sort(key), np.sort(rkey)):
                raise EdgeListError("edge set is not symmetric")
        order = np.lexsort((src, dst))
        self.src = src[order]
        self.dst = dst[order]
        self.coords = None if coords is None else np.asarray(coords, dtype=np.float64)
        if self.coords is not None and self.coords.shape[0] != self.n:
            raise ValueError("coords must have one row per node")
        self.indptr = np.searchsorted(self.dst, np.arange(self.n + 1))

    @classmethod
    def from_pairs(cls, n: int, pairs, coords=None) -> "Graph":
        """Build from undirected pairs (any orientation, no duplicates)."""
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        src = np.concatenate([pairs[:, 0], pairs[:, 1]])
        dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
        return cls(n, src, dst, coords)

    @property
    def num_edges_undirected(self) -> int:
        return len(self.src) // 2

    @property
    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        return self.src[self.indptr[i] : self.indptr[i + 1]]

    def undirected_pairs(self) -> np.ndarray:
        """(m, 2) array of pairs with i < j, lexicographically sorted."""
        mask = self.src < self.dst
        pairs = np.stack([self.src[mask], self.dst[mask]], axis=1)
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        return pairs[order]


# ----------------------------------------------------------------------------
# builders
# ----------------------------------------------------------------------------


def uniform_square(n: int, seed: int) -> PointCloud:
    """n points uniform in the unit square."""
    return PointCloud(Stream(seed).uniform((n, 2)))


def grid2d(h: int, w: int) -> Graph:
    """4-neighbour lattice with integer (col, row) coordinates."""
    if h < 2 or w < 2:
        raise ValueError("grid2d needs h, w >= 2")
    idx = np.arange(h * w).reshape(h, w)
    right = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
    down = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
    cols, rows = np.meshgrid(np.arange(w), np.arange(h))
    coords = np.stack([cols.ravel(), rows.ravel()], axis=1).astype(np.float64)
    return Graph.from_pairs(h * w, np.concatenate([right, down]), coords)


def swiss_roll(n: int, seed: int, rescale: bool = True) -> PointCloud:
    """Random swiss-roll cloud (t cos t, y, t sin t), t in [1.5pi, 4.5pi].

    With rescale=True (default) each dimension is mapped linearly onto
    [-1, 1]; rescale=False keeps raw manifold coordinates.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    stream = Stream(seed)
    t = stream.uniform((n,), 1.5 * math.pi, 4.5 * math.pi)
    y = stream.uniform((n,), 0.0, 21.0)
    pts = np.stack([t * np.cos(t), y, t * np.sin(t)], axis=1)
    if rescale:
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        span = hi - lo
        safe = np.where(span > 0, span, 1.0)
        pts = 2.0 * (pts - lo) / safe - 1.0
        pts[:, span == 0] = 0.0
    return PointCloud(pts)


def _circumcircle(ax, ay, bx, by, cx, cy):
    """Circumcenter and squared radius; raises on (near-)collinear triples."""
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    scale = max(abs(ax), abs(ay), abs(bx), abs(by), abs(cx), abs(cy), 1e-30)
    if abs(d) <= 1e-12 * scale * scale:
        raise DegenerateInputError("collinear points in triangulation")
    a2 = ax * ax + ay * ay
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    rr = (ax - ux) ** 2 + (ay - uy) ** 2
    return ux, uy, rr


def delaunay(cloud: PointCloud) -> Graph:
    """Bowyer-Watson triangulation of a 2D point cloud.

    Incremental insertion into a super-triangle; a point is inside a
    triangle's circumcircle only under strict inequality, so exactly
    cocircular configurations resolve deterministically by insertion order
    instead of erroring. Exactly collinear point sets raise.
    """
    pts = np.asarray(cloud.points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("delaunay expects 2D points")
    n = len(pts)
    if n < 3:
        raise ValueError("delaunay needs at least 3 points")

    # reject point sets with no area at all
    rel = pts - pts[0]
    anchor = next((i for i in range(1, n) if rel[i, 0] != 0.0 or rel[i, 1] != 0.0), None)
    if anchor is None:
        raise DegenerateInputError("all points identical")
    cross = rel[anchor, 0] * rel[:, 1] - rel[anchor, 1] * rel[:, 0]
    if np.max(np.abs(cross)) == 0.0:
        raise DegenerateInputError("all points collinear")

    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    cx, cy = (lo + hi) / 2.0
    span = float(max(hi[0] - lo[0], hi[1] - lo[1]))
    big = 64.0 * span
    verts = np.vstack(
        [pts, [cx - big, cy - big], [cx + big, cy - big], [cx, cy + big]]
    )
    s0, s1, s2 = n, n + 1, n + 2

    cap = 16
    tri = np.zeros((cap, 3), dtype=np.int64)
    cc = np.zeros((cap, 2))
    rr = np.zeros(cap)
    alive = np.zeros(cap, dtype=bool)
    m = 0

    def push(i, j, k):
        nonlocal m, cap, tri, cc, rr, alive
        if m == cap:
            cap *= 2
            tri = np.resize(tri, (cap, 3))
            cc = np.resize(cc, (cap, 2))
            rr = np.resize(rr, cap)
            alive = np.resize(alive, cap)
        ux, uy, r2 = _circumcircle(*verts[i], *verts[j], *verts[k])
        tri[m] = (i, j, k)
        cc[m] = (ux, uy)
        rr[m] = r2
        alive[m] = True
        m += 1

    push(s0, s1, s2)

    for p in range(n):
        px, py = verts[p]
        d2 = (px - cc[:m, 0]) ** 2 + (py - cc[:m, 1]) ** 2
        bad = np.flatnonzero(alive[:m] & (d2 < rr[:m]))
        if len(bad) == 0:
            # inside the triangulated region, so inside some circumcircle;
            # reaching here means a duplicate point landed on a vertex
            raise DegenerateInputError("point insertion found no cavity (duplicate point?)")
        edge_count: dict[tuple[int, int], int] = {}
        for b in bad:
            i, j, k = tri[b]
            for a, c in ((i, j), (j, k), (k, i)):
                key = (a, c) if a < c else (c, a)
                edge_count[key] = edge_count.get(key, 0) + 1
        alive[bad] = False
        for (a, c), count in sorted(edge_count.items()):
            if count == 1:
                push(p, a, c)

    pairs = set()
    for b in np.flatnonzero(alive[:m]):
        i, j, k = tri[b]
        if i < n and j < n and k < n:
            for a, c in ((i, j), (j, k), (k, i)):
                pairs.add((a, c) if a < c else (c, a))
    return Graph.from_pairs(n, sorted(pairs), coords=pts)


def _radius_pairs(pts: np.ndarray, r: float) -> np.ndarray:
    """All pairs (i < j) with Euclidean distance strictly < r, via binning."""
    n, d = pts.shape
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    r2 = r * r
    cells = np.floor(pts / r).astype(np.int64)
    buckets: dict[tuple, np.ndarray] = {}
    order = np.lexsort(cells.T[::-1])
    sorted_cells = cells[order]
    change = np.flatnonzero(np.r_[True, np.any(sorted_cells[1:] != sorted_cells[:-1], axis=1)])
    for a, b in zip(change, np.r_[change[1:], n]):
        buckets[tuple(sorted_cells[a])] = order[a:b]

    offsets = [off for off in itertools.product((-1, 0, 1), repeat=d) if off > (0,) * d]
    out = []
    for cell, idx in buckets.items():
        # pairs within the cell
        if len(idx) > 1:
            p = pts[idx]
            diff = p[:, None, :] - p[None, :, :]
            dist2 = np.sum(diff * diff, axis=2)
            ii, jj = np.nonzero(np.triu(dist2 < r2, k=1))
            if len(ii):
                out.append(np.stack([idx[ii], idx[jj]], axis=1))
        # pairs against half of the neighbouring cells
        for off in offsets:
            other = buckets.get(tuple(c + o for c, o in zip(cell, off)))
            if other is None:
                continue
            diff = pts[idx][:, None, :] - pts[other][None, :, :]
            dist2 = np.sum(diff * diff, axis=2)
            ii, jj = np.nonzero(dist2 < r2)
            if len(ii):
                out.append(np.stack([idx[ii], other[jj]], axis=1))
    if not out:
        return np.zeros((0, 2), dtype=np.int64)
    pairs = np.concatenate(out)
    flip = pairs[:, 0] > pairs[:, 1]
    pairs[flip] = pairs[flip][:, ::-1]
    return pairs


def radius_graph(points, r: float) -> Graph:
    """Undirected edges between all pairs strictly closer than r."""
    if r <= 0:
        raise ValueError("radius must be positive")
    pts = points.points if isinstance(points, PointCloud) else np.asarray(points, dtype=np.float64)
    pairs = _radius_pairs(pts, float(r))
    return Graph.from_pairs(len(pts), pairs, coords=pts)


# ----------------------------------------------------------------------------
# file I/O
# ----------------------------------------------------------------------------


def load_geometric_graph(path) -> Graph:
    """Load {"n", "dim", "coords", "edges"} JSON; edges once per pair, i < j."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphSchemaError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or set(doc.keys()) != {"n", "dim", "coords", "edges"}:
        raise GraphSchemaError("expected exactly the keys n, dim, coords, edges")
    n, dim = doc["n"], doc["dim"]
    if not isinstance(n, int) or not isinstance(dim, int) or n < 0 or dim < 1:
        raise GraphSchemaError("n must be a non-negative int, dim a positive int")
    coords = doc["coords"]
    if not isinstance(coords, list) or len(coords) != n:
        raise GraphSchemaError("coords must list one row per node")
    for row in coords:
        if not isinstance(row, list) or len(row) != dim:
            raise GraphSchemaError("every coord row must have `dim` entries")
        if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in row):
            raise GraphSchemaError("coords must be finite numbers")
    edges = doc["edges"]
    if not isinstance(edges, list):
        raise GraphSchemaError("edges must be a list")
    seen = set()
    for e in edges:
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(v, int) for v in e)):
            raise GraphSchemaError("every edge must be a pair of ints")
        i, j = e
        if not (0 <= i < n and 0 <= j < n):
            raise NodeIndexError(f"edge {e} endpoint out of range for n={n}")
        if i >= j:
            raise EdgeListError(f"edge {e} not in canonical i < j form")
        if (i, j) in seen:
            raise EdgeListError(f"duplicate edge {e}")
        seen.add((i, j))
    coords_arr = np.asarray(coords, dtype=np.float64).reshape(n, dim)
    pairs = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    return Graph.from_pairs(n, pairs, coords_arr)


def save_geometric_graph(g: Graph, path) -> None:
    """Inverse of load_geometric_graph; bit-exact round trip."""
    if g.coords is None:
        raise ValueError("graph has no coordinates to save")
    doc = {
        "n": g.n,
        "dim": int(g.coords.shape[1]),
        "coords": [[float(v) for v in row] for row in g.coords],
        "edges": [[int(a), int(b)] for a, b in g.undirected_pairs()],
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)
