"""Exact planar solver for a fixed full topology.

Two terminals sharing a branch point merge into the apex of an equilateral
triangle, reducing the instance by one terminal while preserving the optimal
length; unwinding the merges places each branch point at the second
intersection of the reconstruction segment with the circumcircle of the
merge triangle.  Both apex orientations are explored per merge with
backtracking, so a topology is reported unrealizable (None) exactly when no
orientation survives reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import TOL_GEOM, EmbeddedForest, forest_length
from .opt import FixedTopologyResult
from .topology import MELZAK_N_MAX, FullTopology


@dataclass(frozen=True)
class MergeRecord:
    pair: tuple[int, int]        # merged leaf ids
    branch: int                  # branch vertex the pair hung on
    pseudo: int                  # id of the replacement pseudo-terminal
    apex: complex                # its position
    orientation: int             # +1 apex left of pair[0]->pair[1], -1 right


@dataclass(frozen=True)
class MelzakTrace:
    merges: tuple[MergeRecord, ...]   # in merge order
    final_pair: tuple[int, int]
    final_length: float               # distance of the two-point reduction


def melzak_third_point(p1, p2, orientation: int):
    """Apex of the equilateral triangle on the requested side of p1->p2
    (+1 = left/counterclockwise, -1 = right/clockwise)."""
    z1 = complex(p1[0], p1[1])
    z2 = complex(p2[0], p2[1])
    if abs(z2 - z1) <= TOL_GEOM:
        raise ValueError("coincident points have no equilateral apex")
    if orientation not in (+1, -1):
        raise ValueError("orientation must be +1 or -1")
    apex = _apex(z1, z2, orientation)
    return np.array([apex.real, apex.imag])


def _apex(z1: complex, z2: complex, orientation: int) -> complex:
    return z1 + (z2 - z1) * complex(0.5, orientation * np.sqrt(3.0) / 2.0)


def _reconstruct_branch(r: complex, p1: complex, p2: complex, v: complex):
    """Branch position on segment [r, v]: the second circumcircle crossing.

    None when the crossing parameter leaves [0, 1] or lands on the apex side
    of the chord (where the meeting angle would be pi/3 instead of 2pi/3)."""
    center = (r + p1 + p2) / 3.0
    dv = v - r
    a = dv.real * dv.real + dv.imag * dv.imag
    if a <= TOL_GEOM * TOL_GEOM:
        return None
    rc = r - center
    b = 2.0 * (dv.real * rc.real + dv.imag * rc.imag)
    t = -b / a
    if t < -TOL_GEOM or t > 1.0 + TOL_GEOM:
        return None
    q = r + t * dv
    chord = p2 - p1
    side_q = chord.real * (q - p1).imag - chord.imag * (q - p1).real
    side_r = chord.real * (r - p1).imag - chord.imag * (r - p1).real
    if side_q * side_r >= 0.0:
        return None
    return q


def solve_full_planar(P: np.ndarray, t: FullTopology) -> FixedTopologyResult | None:
    """Exact tree for a full topology over planar terminals, or None when
    the topology has no full locally minimal realization."""
    P = np.asarray(P, dtype=float)
    n = t.n
    if P.shape != (n, 2):
        raise ValueError("solve_full_planar needs planar terminals matching the topology")
    if n > MELZAK_N_MAX:
        raise ValueError(f"n = {n} exceeds the planar solver cap {MELZAK_N_MAX}")

    if n == 2:
        if np.linalg.norm(P[0] - P[1]) <= TOL_GEOM:
            return None
        forest = EmbeddedForest(P.copy(), ((0, 1),), frozenset({0, 1}))
        res = FixedTopologyResult(
            tree=forest, length=forest_length(forest), converged=True, iterations=0,
            max_branch_move_last_iter=0.0, topology=t,
            branch_positions=np.zeros((0, 2)),
        )
        res.melzak_trace = MelzakTrace((), (0, 1), res.length)
        return res

    pos0 = {k: complex(P[k, 0], P[k, 1]) for k in range(n)}
    adj0: dict[int, set[int]] = {v: set() for v in range(t.n_vertices)}
    for a, b in t.edges:
        adj0[a].add(b)
        adj0[b].add(a)

    def pick_cherry(adjacency, leaves):
        best = None
        for q in adjacency:
            if q in leaves:
                continue
            leaf_nbrs = sorted(u for u in adjacency[q] if u in leaves)
            if len(leaf_nbrs) >= 2:
                key = (leaf_nbrs[0], leaf_nbrs[1], q)
                if best is None or key < best:
                    best = key
        return best

    def dfs(adjacency, positions, leaves):
        """Returns (branch positions, merge records, final pair) or None."""
        if len(leaves) == 2:
            a, b = sorted(leaves)
            dist = abs(positions[a] - positions[b])
            if dist <= TOL_GEOM:
                return None
            return {}, [], (a, b, dist)
        cherry = pick_cherry(adjacency, leaves)
        if cherry is None:
            return None
        p1, p2, q = cherry
        (third,) = [u for u in adjacency[q] if u not in (p1, p2)]
        r = max(adjacency) + 1
        for orientation in (+1, -1):
            apex = _apex(positions[p1], positions[p2], orientation)
            new_adj = {v: set(s) for v, s in adjacency.items() if v not in (p1, p2, q)}
            new_adj[r] = {third}
            new_adj[third] = (new_adj[third] - {q}) | {r}
            new_pos = dict(positions)
            new_pos[r] = apex
            for gone in (p1, p2):
                new_pos.pop(gone, None)
            sub = dfs(new_adj, new_pos, (leaves - {p1, p2}) | {r})
            if sub is None:
                continue
            bpos, recs, fin = sub
            third_pos = bpos.get(third, new_pos.get(third))
            qpos = _reconstruct_branch(apex, positions[p1], positions[p2], third_pos)
            if qpos is None:
                continue
            rec = MergeRecord((p1, p2), q, r, apex, orientation)
            return {**bpos, q: qpos}, [rec, *recs], fin
        return None

    out = dfs(adj0, pos0, set(range(n)))
    if out is None:
        return None
    bpos, recs, (fa, fb, fdist) = out
    if len(bpos) != t.n_internal:
        return None

    coords = np.zeros((t.n_vertices, 2))
    coords[:n] = P
    for s in range(n, t.n_vertices):
        coords[s] = [bpos[s].real, bpos[s].imag]
    for a, b in t.edges:
        if np.linalg.norm(coords[a] - coords[b]) <= TOL_GEOM:
            return None
    forest = EmbeddedForest(coords, t.edges, frozenset(range(n)))
    try:
        forest.validate(require_tree=True)
    except ValueError:
        return None
    res = FixedTopologyResult(
        tree=forest, length=forest_length(forest), converged=True, iterations=0,
        max_branch_move_last_iter=0.0, topology=t,
        branch_positions=coords[n:].copy(),
    )
    res.melzak_trace = MelzakTrace(tuple(recs), (fa, fb), fdist)
    return res
