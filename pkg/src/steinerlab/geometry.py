"""Floating-point primitives: points, segments, balls, embedded forests.

Everything here is a pure function of immutable values.  Forests are stored
as exact edge endpoints; clipping solves the segment/sphere quadratic in
closed form, and the coarea integral is evaluated analytically per segment
(never by sampling).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import nnls

# Absolute tolerances; instances are assumed normalized to diameter O(1).
TOL_GEOM = 1e-9
TOL_LEN = 1e-9


def as_point(coords: Sequence[float] | np.ndarray) -> np.ndarray:
    """Validate and return a d-dimensional point (d >= 2, finite coords)."""
    p = np.asarray(coords, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise ValueError(f"point must be a vector of dimension >= 2, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point has non-finite coordinates")
    return p


def distance(p: Sequence[float] | np.ndarray, q: Sequence[float] | np.ndarray) -> float:
    p = as_point(p)
    q = as_point(q)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return float(np.linalg.norm(p - q))


def angle_at(v, a, b) -> float:
    """Angle in [0, pi] between the rays v->a and v->b."""
    v, a, b = as_point(v), as_point(a), as_point(b)
    u1 = a - v
    u2 = b - v
    n1 = np.linalg.norm(u1)
    n2 = np.linalg.norm(u2)
    if n1 <= TOL_GEOM or n2 <= TOL_GEOM:
        raise ValueError("angle_at requires points distinct from the vertex")
    c = float(np.dot(u1, u2) / (n1 * n2))
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


@dataclass(frozen=True)
class Segment:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", as_point(self.a))
        object.__setattr__(self, "b", as_point(self.b))
        if distance(self.a, self.b) <= TOL_GEOM:
            raise ValueError("zero-length segment")

    @property
    def length(self) -> float:
        return distance(self.a, self.b)


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not (self.radius > 0):
            raise ValueError("ball radius must be positive")


@dataclass(frozen=True)
class EmbeddedForest:
    """Straight-segment forest: indexed vertices, undirected edges, terminal marks.

    ``terminals`` are the vertices allowed to have degree 1 or 2 (and the
    instance points the forest is meant to connect); every other vertex of a
    locally minimal tree has degree exactly 3.  Clipping introduces boundary
    vertices, which are marked as terminals of the clipped forest.
    """

    vertices: np.ndarray          # (n, d)
    edges: tuple[tuple[int, int], ...]
    terminals: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2:
            v = v.reshape(0, 2) if v.size == 0 else np.atleast_2d(v)
        object.__setattr__(self, "vertices", v)
        norm_edges = tuple(sorted((min(i, j), max(i, j)) for i, j in self.edges))
        object.__setattr__(self, "edges", norm_edges)
        object.__setattr__(self, "terminals", frozenset(self.terminals))

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def degree(self, i: int) -> int:
        return sum(1 for a, b in self.edges if a == i or b == i)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_vertices, dtype=int)
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def neighbors(self, i: int) -> list[int]:
        out = []
        for a, b in self.edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return out

    def components(self) -> list[set[int]]:
        parent = list(range(self.n_vertices))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in self.edges:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
        comps: dict[int, set[int]] = {}
        for i in range(self.n_vertices):
            comps.setdefault(find(i), set()).add(i)
        return list(comps.values())

    def is_acyclic(self) -> bool:
        return len(self.edges) + len(self.components()) == self.n_vertices

    def is_tree(self) -> bool:
        return self.n_vertices > 0 and self.is_acyclic() and len(self.components()) == 1

    def validate(self, require_tree: bool = False) -> None:
        """Raise ValueError on any structural invariant violation."""
        v = self.vertices
        if not np.all(np.isfinite(v)):
            raise ValueError("forest has non-finite vertex coordinates")
        if v.shape[0] and v.shape[1] < 2:
            raise ValueError("forest dimension must be >= 2")
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if not (0 <= i < self.n_vertices and 0 <= j < self.n_vertices):
                raise ValueError(f"edge ({i},{j}) references a missing vertex")
            if np.linalg.norm(v[i] - v[j]) <= TOL_GEOM:
                raise ValueError(f"zero-length edge ({i},{j})")
        # pairwise-distinct vertex coordinates, but only among used vertices
        used = sorted({i for e in self.edges for i in e} | set(self.terminals))
        for ai in range(len(used)):
            for bi in range(ai + 1, len(used)):
                if np.linalg.norm(v[used[ai]] - v[used[bi]]) <= TOL_GEOM:
                    raise ValueError(
                        f"vertices {used[ai]} and {used[bi]} coincide within tolerance"
                    )
        if not self.is_acyclic():
            raise ValueError("forest contains a cycle")
        if require_tree and not self.is_tree():
            raise ValueError("forest is not a single tree")
        deg = self.degrees()
        for i in range(self.n_vertices):
            if i in self.terminals:
                if deg[i] > 3:
                    raise ValueError(f"terminal {i} has degree {deg[i]} > 3")
            elif deg[i] not in (0, 3):
                raise ValueError(f"non-terminal vertex {i} has degree {deg[i]} != 3")

    def edge_vectors(self) -> np.ndarray:
        if not self.edges:
            return np.zeros((0, self.dim if self.n_vertices else 2))
        idx = np.asarray(self.edges)
        return self.vertices[idx[:, 1]] - self.vertices[idx[:, 0]]

    def segments(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(self.vertices[i], self.vertices[j]) for i, j in self.edges]


def forest_length(f: EmbeddedForest) -> float:
    """Total length (one-dimensional measure of the segment union)."""
    vecs = f.edge_vectors()
    if vecs.size == 0:
        return 0.0
    return float(np.linalg.norm(vecs, axis=1).sum())


def _segment_ball_interval(a: np.ndarray, b: np.ndarray, x: np.ndarray, r: float):
    """Parameter interval [t0, t1] of {a + t(b-a)} inside the closed ball, or None."""
    d = b - a
    m = a - x
    dd = float(np.dot(d, d))
    q = float(np.dot(m, d))
    c = float(np.dot(m, m)) - r * r
    disc = q * q - dd * c
    if disc < 0.0:
        return None
    sq = np.sqrt(disc)
    t0 = (-q - sq) / dd
    t1 = (-q + sq) / dd
    t0 = max(t0, 0.0)
    t1 = min(t1, 1.0)
    if t1 <= t0:
        return None
    return t0, t1


def clip_to_ball(f: EmbeddedForest, ball: Ball) -> EmbeddedForest:
    """Intersect every segment with the closed ball; boundary cuts become new
    terminal-marked vertices."""
    x, r = ball.center, ball.radius
    new_vertices: list[np.ndarray] = []
    new_edges: list[tuple[int, int]] = []
    new_terminals: set[int] = set()
    index_of_old: dict[int, int] = {}

    def vertex_for(old_idx, point, is_cut):
        if old_idx is not None and old_idx in index_of_old:
            return index_of_old[old_idx]
        new_vertices.append(np.array(point, dtype=float))
        k = len(new_vertices) - 1
        if old_idx is not None:
            index_of_old[old_idx] = k
            if old_idx in f.terminals:
                new_terminals.add(k)
        if is_cut:
            new_terminals.add(k)
        return k

    for i, j in f.edges:
        a, b = f.vertices[i], f.vertices[j]
        hit = _segment_ball_interval(a, b, x, r)
        if hit is None:
            continue
        t0, t1 = hit
        seg_len = np.linalg.norm(b - a)
        if (t1 - t0) * seg_len <= TOL_GEOM:
            continue  # tangency or speck: measure zero, dropped
        p0 = a + t0 * (b - a)
        p1 = a + t1 * (b - a)
        k0 = vertex_for(i if t0 == 0.0 else None, p0, t0 > 0.0)
        k1 = vertex_for(j if t1 == 1.0 else None, p1, t1 < 1.0)
        new_edges.append((k0, k1))

    if not new_vertices:
        return EmbeddedForest(np.zeros((0, f.dim if f.n_vertices else 2)), ())
    return EmbeddedForest(np.array(new_vertices), tuple(new_edges), frozenset(new_terminals))


def _monotone_pieces(a: np.ndarray, b: np.ndarray, x: np.ndarray):
    """Split dist(., x) along [a, b] at its interior minimum.

    Yields (t_lo, t_hi, f_lo, f_hi) per monotone piece, f being the distance
    at the piece's parameter endpoints.
    """
    d = b - a
    dd = float(np.dot(d, d))
    fa = float(np.linalg.norm(a - x))
    fb = float(np.linalg.norm(b - x))
    if dd == 0.0:
        return
    tstar = float(np.dot(x - a, d) / dd)
    if 0.0 < tstar < 1.0:
        fstar = float(np.linalg.norm(a + tstar * d - x))
        yield (0.0, tstar, fa, fstar)
        yield (tstar, 1.0, fstar, fb)
    else:
        yield (0.0, 1.0, fa, fb)


def coarea_integral(f: EmbeddedForest, x) -> float:
    """Exact value of the integral over r of the sphere-crossing count.

    Computed per segment as the total radius range swept by each monotone
    piece of the distance-to-x function; always <= forest_length(f), with
    equality iff every segment's line passes through x.
    """
    x = as_point(x)
    total = 0.0
    for a, b in f.segments():
        for _, _, flo, fhi in _monotone_pieces(a, b, x):
            total += abs(fhi - flo)
    return total


def coarea_integral_range(f: EmbeddedForest, x, r_lo: float, r_hi: float) -> float:
    """Integral of the sphere-crossing count over radii [r_lo, r_hi] only."""
    x = as_point(x)
    total = 0.0
    for a, b in f.segments():
        for _, _, flo, fhi in _monotone_pieces(a, b, x):
            lo, hi = min(flo, fhi), max(flo, fhi)
            total += max(0.0, min(hi, r_hi) - max(lo, r_lo))
    return total


def sphere_crossings(f: EmbeddedForest, x, r: float) -> int:
    """Number of points of the forest at distance exactly r from x.

    Counted with a TOL_GEOM band; a vertex shared by several edges (or a
    tangency point) counts once.
    """
    if not (r > 0):
        raise ValueError("radius must be positive")
    x = as_point(x)
    points: list[np.ndarray] = []
    for a, b in f.segments():
        d = b - a
        for tlo, thi, flo, fhi in _monotone_pieces(a, b, x, ):
            lo, hi = min(flo, fhi), max(flo, fhi)
            if not (lo - TOL_GEOM <= r <= hi + TOL_GEOM):
                continue
            # solve |a + t d - x| = r inside [tlo, thi]
            m = a - x
            dd = float(np.dot(d, d))
            q = float(np.dot(m, d))
            c = float(np.dot(m, m)) - r * r
            disc = q * q - dd * c
            if disc < 0.0:
                disc = 0.0
            sq = np.sqrt(disc)
            for t in ((-q - sq) / dd, (-q + sq) / dd):
                if tlo - TOL_GEOM <= t <= thi + TOL_GEOM:
                    points.append(a + t * d)
    # dedupe coincident crossing points (shared vertices, tangencies)
    out: list[np.ndarray] = []
    for p in points:
        if not any(np.linalg.norm(p - q) <= 10 * TOL_GEOM for q in out):
            out.append(p)
    return len(out)


def convex_hull_contains(points: Iterable, q, tol: float = TOL_GEOM) -> bool:
    """True iff q is a convex combination of the given points, within tol.

    Solved as a nonnegative least-squares feasibility problem on the affine
    system; robust in any dimension including degenerate hulls.
    """
    pts = np.array([as_point(p) for p in points], dtype=float)
    if pts.size == 0:
        raise ValueError("convex_hull_contains requires a nonempty point list")
    q = as_point(q)
    if pts.shape[1] != q.size:
        raise ValueError("dimension mismatch between hull points and query")
    scale = max(1.0, float(np.abs(pts).max()))
    a = np.vstack([pts.T / scale, np.ones((1, pts.shape[0]))])
    b = np.concatenate([q / scale, [1.0]])
    _, resid = nnls(a, b)
    return bool(resid <= 10 * tol)
