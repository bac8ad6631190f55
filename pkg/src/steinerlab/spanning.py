"""Minimum spanning trees and the ratio/lower-bound bookkeeping built on them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import TOL_LEN, EmbeddedForest, forest_length

SQRT3 = float(np.sqrt(3.0))


@dataclass
class MstResult:
    tree: EmbeddedForest
    length: float
    insertion_order: tuple[int, ...]   # vertices in the order Prim added them


def prim_mst(points: np.ndarray, start: int = 0) -> MstResult:
    """Dense O(n^2) Prim; ties broken by smaller vertex index for
    determinism."""
    P = np.asarray(points, dtype=float)
    n = P.shape[0]
    if n < 1:
        raise ValueError("prim_mst needs at least one point")
    if n == 1:
        return MstResult(EmbeddedForest(P.copy(), (), frozenset({0})), 0.0, (0,))
    in_tree = np.zeros(n, dtype=bool)
    in_tree[start] = True
    dist = np.linalg.norm(P - P[start], axis=1)
    parent = np.full(n, start)
    order = [start]
    edges = []
    total = 0.0
    for _ in range(n - 1):
        best = min(
            (j for j in range(n) if not in_tree[j]),
            key=lambda j: (dist[j], j),
        )
        in_tree[best] = True
        order.append(best)
        edges.append((int(min(parent[best], best)), int(max(parent[best], best))))
        total += float(dist[best])
        newd = np.linalg.norm(P - P[best], axis=1)
        closer = ~in_tree & (newd < dist)
        dist[closer] = newd[closer]
        parent[closer] = best
    tree = EmbeddedForest(P.copy(), tuple(edges), frozenset(range(n)))
    return MstResult(tree, float(forest_length(tree)), tuple(int(v) for v in order))


class RatioBoundError(AssertionError):
    """The computed spanning ratio violated [1, sqrt(3)]: a solver bug."""


def steiner_ratio(mst_length: float, smt_length: float, tol: float = TOL_LEN) -> float:
    """MST length over minimal tree length; always within [1, sqrt(3)]."""
    if smt_length <= 0:
        raise ValueError("minimal tree length must be positive")
    ratio = mst_length / smt_length
    if ratio < 1.0 - tol or ratio > SQRT3 + tol:
        raise RatioBoundError(
            f"spanning ratio {ratio!r} outside [1, sqrt(3)] -- solver bug"
        )
    return ratio


@dataclass
class HypercubeReport:
    d: int
    n: int
    mst_length: float              # measured by Prim
    mst_formula: float             # 2 (2^d - 1)
    smt_lower_bound: float         # (2/sqrt(3)) (2^d - 1)
    unit_ball_density: float       # 2 (2^d - 1) / sqrt(3 d)
    note: str


def hypercube_instance(d: int):
    """The 2^d corners of {-1, 1}^d plus the lower-bound report.

    Exact solving is only feasible for d <= 3 under the default topology cap
    (n = 2^d); the report itself is valid for any small d."""
    if d < 2:
        raise ValueError("need d >= 2")
    if d > 12:
        raise ValueError("hypercube generator capped at d = 12")
    corners = np.array(
        [[1.0 if (k >> i) & 1 else -1.0 for i in range(d)] for k in range(2**d)]
    )
    mst = prim_mst(corners)
    formula = 2.0 * (2**d - 1)
    lower = (2.0 / SQRT3) * (2**d - 1)
    density = 2.0 * (2**d - 1) / np.sqrt(3.0 * d)
    note = (
        "lower bound is informational for d = 2 (the exact optimum is shorter)"
        if d == 2
        else "lower bound applies (d > 2)"
    )
    from .solver import Instance

    inst = Instance(corners)
    report = HypercubeReport(d, 2**d, mst.length, formula, lower, float(density), note)
    return inst, report
