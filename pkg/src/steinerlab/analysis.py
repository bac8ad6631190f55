"""Quantitative audits: the planar length formula, direction sums, ball
profiles, regularity bounds, the coarea inequality, competitor exchanges,
and the planar branched-component bounds.

Radius grids always include every critical radius (vertex distances and
perpendicular feet), so profiles are exact piecewise descriptions rather
than samples; the audited inequalities can then never fail from sampling
error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    TOL_GEOM,
    TOL_LEN,
    Ball,
    EmbeddedForest,
    clip_to_ball,
    coarea_integral,
    coarea_integral_range,
    forest_length,
    sphere_crossings,
)
from .solver import Instance

SEGMENT_MERGE_ANGLE = 1e-9
COCIRCULAR_BRANCHED_FACTOR = 4.0 * np.pi / 3.0 + 1.0   # 5.188...
SQRT3 = float(np.sqrt(3.0))


@dataclass
class Verdict:
    name: str
    measured: float
    bound: float
    passed: bool
    info: dict = field(default_factory=dict)


def _require_planar_full(tree: EmbeddedForest):
    if tree.dim != 2:
        raise ValueError("planar audit requires d = 2")
    if not tree.edges:
        raise ValueError("empty tree")
    for k in tree.terminals:
        if tree.degree(k) != 1:
            raise ValueError("tree is not full: terminal degree != 1")


def _terminal_directions(tree: EmbeddedForest) -> list[tuple[complex, complex]]:
    """(terminal position, outward unit edge direction) as complex pairs."""
    out = []
    for k in sorted(tree.terminals):
        (nb,) = tree.neighbors(k)
        vec = tree.vertices[k] - tree.vertices[nb]
        vec = vec / np.linalg.norm(vec)
        out.append((complex(*tree.vertices[k]), complex(*vec)))
    return out


def maxwell_length(tree: EmbeddedForest) -> tuple[float, float]:
    """Length of a full planar locally minimal tree as the real part of
    sum conj(c_k) p_k over terminals; the imaginary part is the residual."""
    _require_planar_full(tree)
    total = sum(np.conj(c) * p for p, c in _terminal_directions(tree))
    return float(total.real), float(abs(total.imag))


def windrose_sum(tree: EmbeddedForest) -> np.ndarray:
    """Sum of outward terminal directions; ~0 for locally minimal full
    trees because length is translation invariant."""
    _require_planar_full(tree)
    total = sum(c for _, c in _terminal_directions(tree))
    return np.array([total.real, total.imag])


@dataclass
class RegularityProfile:
    center: np.ndarray
    scale: float
    radii: np.ndarray
    lengths: np.ndarray      # L_r: length of the tree inside B_r
    crossings: np.ndarray    # t_r: points of the tree on the sphere of radius r
    tree: EmbeddedForest
    instance: Instance


def _critical_radii(tree: EmbeddedForest, x: np.ndarray, s: float) -> list[float]:
    crit = []
    for v in range(tree.n_vertices):
        r = float(np.linalg.norm(tree.vertices[v] - x))
        if 0 < r <= s:
            crit.append(r)
    for a, b in tree.segments():
        d = b - a
        dd = float(np.dot(d, d))
        if dd == 0:
            continue
        t = float(np.dot(x - a, d) / dd)
        if 0.0 < t < 1.0:
            r = float(np.linalg.norm(a + t * d - x))
            if 0 < r <= s:
                crit.append(r)
    return crit


def ball_profile(
    tree: EmbeddedForest,
    inst: Instance,
    x,
    s: float,
    samples: int = 32,
) -> RegularityProfile:
    """L_r and t_r on a grid containing all critical radii in (0, s]."""
    x = np.asarray(x, dtype=float)
    if s <= 0:
        raise ValueError("scale must be positive")
    dmin = float(np.linalg.norm(inst.terminals - x, axis=1).min())
    if dmin < s - TOL_GEOM:
        raise ValueError("open ball contains a terminal of the instance")
    radii = set(np.linspace(s / samples, s, samples).tolist())
    radii.update(_critical_radii(tree, x, s))
    grid = np.array(sorted(radii))
    lengths = np.array([forest_length(clip_to_ball(tree, Ball(x, r))) for r in grid])
    crossings = np.array([sphere_crossings(tree, x, r) for r in grid])
    if lengths.size and (np.diff(lengths) < -TOL_LEN).any():
        raise AssertionError("ball profile is not monotone: geometry bug")
    return RegularityProfile(x, float(s), grid, lengths, crossings, tree, inst)


def check_main_bound(profile: RegularityProfile, d: int, rho: float) -> Verdict:
    """d > 2: length in the rho-scaled ball against (64 d / (1 - rho))^(d-2)
    (measured relative to the scale).  d = 2: the circle-exchange bound
    2 pi r instead."""
    if not (0 < rho < 1):
        raise ValueError("rho must be in (0, 1)")
    x, s = profile.center, profile.scale
    r = rho * s
    measured_abs = forest_length(clip_to_ball(profile.tree, Ball(x, r)))
    if d == 2:
        bound = 2.0 * np.pi * r
        return Verdict("planar-circle-bound", measured_abs, bound,
                       measured_abs <= bound + TOL_LEN, {"r": r})
    bound = (64.0 * d / (1.0 - rho)) ** (d - 2)
    measured = measured_abs / s
    return Verdict("ball-length-bound", measured, bound,
                   measured <= bound + TOL_LEN, {"rho": rho, "scale": s})


def count_segments_in_ball(
    tree: EmbeddedForest, x, r: float, d: int | None = None, rho: float | None = None
) -> Verdict:
    """Maximal-segment count of the clipped forest (collinear joins merged),
    with the (64 d / (1 - rho))^(d-1) audit when d > 2 and rho are given."""
    x = np.asarray(x, dtype=float)
    clipped = clip_to_ball(tree, Ball(x, r))
    count = _maximal_segments(clipped)
    if d is not None and rho is not None and d > 2:
        bound = (64.0 * d / (1.0 - rho)) ** (d - 1)
        return Verdict("segment-count-bound", float(count), bound, count <= bound,
                       {"r": r})
    return Verdict("segment-count", float(count), float("inf"), True, {"r": r})


def _maximal_segments(f: EmbeddedForest) -> int:
    if not f.edges:
        return 0
    parent = {e: e for e in f.edges}

    def find(e):
        while parent[e] != e:
            parent[e] = parent[parent[e]]
            e = parent[e]
        return e

    incident: dict[int, list[tuple[int, int]]] = {}
    for e in f.edges:
        incident.setdefault(e[0], []).append(e)
        incident.setdefault(e[1], []).append(e)
    for v, edges_at in incident.items():
        if len(edges_at) != 2:
            continue
        (a1, b1), (a2, b2) = edges_at
        u1 = f.vertices[b1 if a1 == v else a1] - f.vertices[v]
        u2 = f.vertices[b2 if a2 == v else a2] - f.vertices[v]
        u1 = u1 / np.linalg.norm(u1)
        u2 = u2 / np.linalg.norm(u2)
        angle = float(np.arccos(np.clip(np.dot(u1, u2), -1.0, 1.0)))
        if abs(angle - np.pi) < SEGMENT_MERGE_ANGLE:
            ra, rb = find(edges_at[0]), find(edges_at[1])
            if ra != rb:
                parent[ra] = rb
    return len({find(e) for e in f.edges})


def coarea_audit(tree: EmbeddedForest, x) -> Verdict:
    """Length dominates the integral of the sphere-crossing count."""
    integral = coarea_integral(tree, x)
    length = forest_length(tree)
    return Verdict("coarea", integral, length + TOL_LEN, integral <= length + TOL_LEN)


def profile_growth_audit(profile: RegularityProfile) -> Verdict:
    """L_R >= L_rho + integral of t_r over [rho, R] on every grid cell,
    with the integral computed exactly from the monotone pieces."""
    worst = 0.0
    x = profile.center
    for i in range(len(profile.radii) - 1):
        r0, r1 = profile.radii[i], profile.radii[i + 1]
        gain = profile.lengths[i + 1] - profile.lengths[i]
        integral = coarea_integral_range(profile.tree, x, r0, r1)
        worst = max(worst, integral - gain)
    return Verdict("profile-growth", worst, TOL_LEN, worst <= TOL_LEN)


def _on_segment_interval(a, b, p, tol):
    """Parameter of p along [a, b] when p lies on the segment, else None."""
    d = b - a
    dd = float(np.dot(d, d))
    t = float(np.dot(p - a, d) / dd)
    if t < -tol or t > 1 + tol:
        return None
    if np.linalg.norm(a + t * d - p) > 10 * tol:
        return None
    return min(max(t, 0.0), 1.0)


def subtract_subforest(tree: EmbeddedForest, sub: EmbeddedForest) -> EmbeddedForest:
    """The closure of tree minus sub: every sub edge must lie inside some
    tree edge; leftover pieces become their own segments."""
    vertices: list[np.ndarray] = []
    edges: list[tuple[int, int]] = []

    def add_vertex(p):
        vertices.append(np.asarray(p, dtype=float))
        return len(vertices) - 1

    for a, b in tree.segments():
        seg_len = float(np.linalg.norm(b - a))
        intervals = []
        for c, dpt in sub.segments():
            t0 = _on_segment_interval(a, b, c, TOL_GEOM)
            t1 = _on_segment_interval(a, b, dpt, TOL_GEOM)
            if t0 is not None and t1 is not None:
                intervals.append((min(t0, t1), max(t0, t1)))
        intervals.sort()
        cursor = 0.0
        for lo, hi in intervals:
            if lo - cursor > TOL_GEOM / seg_len:
                i0 = add_vertex(a + cursor * (b - a))
                i1 = add_vertex(a + lo * (b - a))
                edges.append((i0, i1))
            cursor = max(cursor, hi)
        if 1.0 - cursor > TOL_GEOM / seg_len:
            i0 = add_vertex(a + cursor * (b - a))
            i1 = add_vertex(b)
            edges.append((i0, i1))
    if not vertices:
        return EmbeddedForest(np.zeros((0, tree.dim)), ())
    return EmbeddedForest(np.array(vertices), tuple(edges))


def _connected_with(points_groups: list[np.ndarray], edge_groups: list[list[tuple[int, int]]]):
    """Union-find connectivity over several vertex arrays: coincident
    vertices (within tolerance) are identified, edges join endpoints."""
    offsets = []
    total = 0
    for pts in points_groups:
        offsets.append(total)
        total += len(pts)
    allpts = np.vstack([p for p in points_groups if len(p)]) if total else np.zeros((0, 2))
    parent = list(range(total))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj

    for g, edges in enumerate(edge_groups):
        for a, b in edges:
            union(offsets[g] + a, offsets[g] + b)
    for i in range(total):
        for j in range(i + 1, total):
            if np.linalg.norm(allpts[i] - allpts[j]) <= 10 * TOL_GEOM:
                union(i, j)
    roots = {find(i) for i in range(total)}
    return len(roots) <= 1


def exchange_audit(
    tree: EmbeddedForest, inst: Instance, sub: EmbeddedForest, competitor: EmbeddedForest
) -> Verdict:
    """Competitor exchange: removing sub from an optimal tree and adding the
    competitor must keep everything connected, and then the removed length
    cannot exceed the added length.

    The competitor must meet the remainder at shared vertex coordinates
    (clip cut points, terminals); raises when the exchanged set is
    disconnected."""
    remainder = subtract_subforest(tree, sub)
    groups = [remainder.vertices, competitor.vertices, inst.terminals]
    edges = [list(remainder.edges), list(competitor.edges), []]
    if not _connected_with(groups, edges):
        raise ValueError("competitor exchange leaves a disconnected set")
    removed = forest_length(sub)
    added = forest_length(competitor)
    return Verdict("exchange", removed, added + TOL_LEN, removed <= added + TOL_LEN)


def circle_competitor(x, r: float, through: np.ndarray | None = None, filler: int = 256) -> EmbeddedForest:
    """Inscribed closed polygon hugging the circle of radius r around x,
    passing through the given boundary points; its length is always below
    2 pi r.  (Not a forest in the acyclic sense: it is a competitor set.)"""
    x = np.asarray(x, dtype=float)
    angles = set()
    if through is not None and len(through):
        for p in np.asarray(through, dtype=float):
            angles.add(float(np.arctan2(p[1] - x[1], p[0] - x[0])))
    angles.update(np.linspace(-np.pi, np.pi, filler, endpoint=False).tolist())
    ang = np.array(sorted(angles))
    pts = x[None, :] + r * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    edges = [(i, (i + 1) % len(pts)) for i in range(len(pts))]
    return EmbeddedForest(pts, tuple(edges))


@dataclass
class BranchedComponentsVerdict:
    n_branched: int
    count_ok: bool
    total_branched_length: float
    length_bound: float
    length_ok: bool
    full_component_floors: list[Verdict]
    floors_ok: bool
    passed: bool


def planar_branched_components_audit(
    tree: EmbeddedForest, inst: Instance, x, r: float, tol: float = 1e-9
) -> BranchedComponentsVerdict:
    """Inside a terminal-free disk: at most two branched components, their
    total length at most (4 pi / 3 + 1) r, and every full clipped component
    with >= 3 boundary points at least sqrt(3) r long."""
    if inst.d != 2 or tree.dim != 2:
        raise ValueError("planar audit requires d = 2")
    x = np.asarray(x, dtype=float)
    dmin = float(np.linalg.norm(inst.terminals - x, axis=1).min())
    if dmin < r - TOL_GEOM:
        raise ValueError("open ball contains a terminal of the instance")
    clipped = clip_to_ball(tree, Ball(x, r))
    comps = [c for c in clipped.components() if any(True for _ in c)]
    deg = clipped.degrees()
    branched = []
    for comp in comps:
        if len(comp) < 2:
            continue
        if any(deg[v] >= 3 for v in comp):
            branched.append(comp)
    total = 0.0
    for comp in branched:
        total += sum(
            float(np.linalg.norm(clipped.vertices[a] - clipped.vertices[b]))
            for a, b in clipped.edges
            if a in comp
        )
    bound = COCIRCULAR_BRANCHED_FACTOR * r
    floors = []
    for comp in branched:
        boundary = [
            v
            for v in comp
            if abs(np.linalg.norm(clipped.vertices[v] - x) - r) <= 10 * TOL_GEOM
        ]
        leaves = [v for v in comp if deg[v] == 1]
        if len(boundary) >= 3 and all(v in boundary for v in leaves):
            clen = sum(
                float(np.linalg.norm(clipped.vertices[a] - clipped.vertices[b]))
                for a, b in clipped.edges
                if a in comp
            )
            floors.append(
                Verdict("full-component-floor", clen, SQRT3 * r - tol,
                        clen >= SQRT3 * r - tol, {"boundary_points": len(boundary)})
            )
    count_ok = len(branched) <= 2
    length_ok = total <= bound + TOL_LEN
    floors_ok = all(v.passed for v in floors)
    return BranchedComponentsVerdict(
        n_branched=len(branched),
        count_ok=count_ok,
        total_branched_length=total,
        length_bound=bound,
        length_ok=length_ok,
        full_component_floors=floors,
        floors_ok=floors_ok,
        passed=count_ok and length_ok and floors_ok,
    )
