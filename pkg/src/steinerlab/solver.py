"""Exact Steiner-minimal-tree orchestration.

Every full topology is minimized over its contraction family (the planar
merge solver when it applies, convex relocation otherwise) and the shortest
result wins, with ties broken by canonical code.  The per-family audit trail
feeds the stability probe: a terminal shift below gap/(5n) provably keeps
the winner inside its contraction family.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    TOL_GEOM,
    TOL_LEN,
    EmbeddedForest,
    convex_hull_contains,
    forest_length,
)
from .melzak import solve_full_planar
from .opt import (
    MERGE_TOL_FACTOR,
    TOL_DEFAULT,
    FixedTopologyResult,
    LocalMinimalityReport,
    collapse_to_forest,
    minimize_families,
    validate_local_minimality,
)
from .spanning import SQRT3, prim_mst
from .topology import N_MAX_DEFAULT, FullTopology, enumerate_full

TIE_FACTOR = 1e-12


@dataclass(frozen=True)
class Instance:
    """Ambient dimension d and the ordered terminal set A."""

    terminals: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.terminals, dtype=float)
        if P.ndim != 2 or P.shape[0] < 2 or P.shape[1] < 2:
            raise ValueError("instance needs >= 2 terminals in dimension >= 2")
        if not np.all(np.isfinite(P)):
            raise ValueError("terminal coordinates must be finite")
        diff = P[:, None, :] - P[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        if dist.min() <= TOL_GEOM:
            raise ValueError("terminals must be pairwise distinct")
        object.__setattr__(self, "terminals", P)

    @property
    def n(self) -> int:
        return self.terminals.shape[0]

    @property
    def d(self) -> int:
        return self.terminals.shape[1]

    @property
    def diameter(self) -> float:
        diff = self.terminals[:, None, :] - self.terminals[None, :, :]
        return float(np.sqrt((diff * diff).sum(axis=2)).max())


@dataclass
class FamilyRecord:
    """Audit entry for one contraction family D(T)."""

    code: str
    length: float
    method: str          # "melzak" | "relocation" | "bound"
    exact: bool          # True when length is the family minimum, not a bound
    realization: str     # "full" | "contracted{...}" | "branch-merged" | "skipped"


@dataclass
class SteinerSolution:
    tree: EmbeddedForest
    length: float
    topology_code: str
    family_member: str
    audit: list[FamilyRecord]
    method: str
    instance: Instance

    def exact_gap_outside_family(self) -> tuple[float | None, bool]:
        """(gap to the best family other than the winner's, is_exact).

        The gap is None for single-family instances.  is_exact is False when
        the runner-up value is only a bound (pruned or unrefined family)."""
        others = [r for r in self.audit if r.code != self.topology_code]
        if not others:
            return None, True
        best = min(others, key=lambda r: r.length)
        return best.length - self.length, best.exact


def _family_lower_bound(P: np.ndarray, t: FullTopology, floor: float) -> float:
    """Sound lower bound on the family minimum: per-branch cherry spans are
    edge-disjoint paths, so their straight distances add up."""
    bound = floor
    cherry_sum = 0.0
    for s in range(t.n, t.n_vertices):
        terms = [u for u in t.neighbors(s) if u < t.n]
        if len(terms) >= 2:
            best = 0.0
            for i in range(len(terms)):
                for j in range(i + 1, len(terms)):
                    best = max(best, float(np.linalg.norm(P[terms[i]] - P[terms[j]])))
            cherry_sum += best
    return max(bound, cherry_sum)


def solve(
    inst: Instance,
    n_max: int = N_MAX_DEFAULT,
    tol: float = TOL_DEFAULT,
    exact_audit: bool = False,
    prune: bool | None = None,
    audit_prune: bool = False,
) -> SteinerSolution:
    """Minimum over all full-topology families of the fixed-topology
    minimum; deterministic, ties broken by canonical code.

    ``exact_audit`` refines every family to its exact minimum (needed for
    gap measurements); the default refines only near-optimal families.
    ``prune`` skips families whose sound lower bound exceeds the incumbent
    (defaults to on for n >= 9); ``audit_prune`` re-evaluates pruned
    families and asserts the optimum is unchanged."""
    P = inst.terminals
    n, d = P.shape
    if prune is None:
        prune = n >= 9
    topologies = enumerate_full(n, n_max=n_max)
    codes = [t.code() for t in topologies]
    diam = inst.diameter
    tie_tol = TIE_FACTOR * diam

    if n == 2:
        tree = EmbeddedForest(P.copy(), ((0, 1),), frozenset({0, 1}))
        rec = FamilyRecord(codes[0], forest_length(tree), "melzak", True, "full")
        return SteinerSolution(tree, rec.length, codes[0], "full", [rec], "segment", inst)

    mst_len = prim_mst(P).length
    floor = max(
        float(np.linalg.norm(P[i] - P[j]))
        for i in range(n)
        for j in range(i + 1, n)
    )
    floor = max(floor, mst_len / SQRT3)

    results: dict[int, FixedTopologyResult] = {}
    lengths = np.full(len(topologies), np.inf)
    methods = ["pending"] * len(topologies)
    exact = np.zeros(len(topologies), dtype=bool)

    bounds = np.array(
        [_family_lower_bound(P, t, floor) for t in topologies]
    ) if prune else np.zeros(len(topologies))
    order = np.argsort(bounds, kind="stable") if prune else np.arange(len(topologies))

    incumbent = mst_len + tie_tol  # the spanning tree is a competitor
    skipped: list[int] = []

    if d == 2:
        for i in order:
            if prune and bounds[i] > incumbent:
                skipped.append(int(i))
                lengths[i] = bounds[i]
                methods[i] = "bound"
                continue
            res = solve_full_planar(P, topologies[i])
            if res is not None:
                results[i] = res
                lengths[i] = res.length
                methods[i] = "melzak"
                exact[i] = True
                incumbent = min(incumbent, res.length + tie_tol)

    unresolved = []
    for i in range(len(topologies)):
        if methods[i] != "pending":
            continue
        if prune and bounds[i] > incumbent:
            skipped.append(i)
            lengths[i] = bounds[i]
            methods[i] = "bound"
        else:
            unresolved.append(i)

    if unresolved:
        margin = None if exact_audit else 2e-2 * diam
        sweep = minimize_families(P, [topologies[i] for i in unresolved], tol=tol,
                                  refine_margin=margin)
        for k, i in enumerate(unresolved):
            lengths[i] = sweep.lengths[k]
            methods[i] = "relocation"
            exact[i] = bool(sweep.refined[k]) if sweep.refined is not None else True
            forest, contraction, merges = collapse_to_forest(
                P, topologies[i], sweep.positions[k], MERGE_TOL_FACTOR * diam
            )
            results[i] = FixedTopologyResult(
                tree=forest, length=forest_length(forest),
                converged=bool(sweep.converged[k]), iterations=sweep.sweeps,
                max_branch_move_last_iter=float("nan"), topology=topologies[i],
                branch_positions=sweep.positions[k],
                realized_contraction=contraction, steiner_cluster_merges=merges,
            )

    best = None
    for i in range(len(topologies)):
        if methods[i] == "bound":
            continue
        if best is None or lengths[i] < lengths[best] - tie_tol:
            best = i
    if best is None:
        raise RuntimeError("no family evaluated; pruning bug")

    if audit_prune and skipped:
        for i in skipped:
            res = _evaluate_family(P, topologies[i], tol)
            assert res.length >= lengths[best] - tie_tol, (
                f"pruned family {codes[i]} beats the optimum: {res.length} < {lengths[best]}"
            )

    win = results[best]
    member = _describe_realization(win)
    audit = [
        FamilyRecord(codes[i], float(lengths[i]), methods[i],
                     bool(exact[i]) if methods[i] != "bound" else False,
                     _describe_realization(results[i]) if i in results else "skipped")
        for i in range(len(topologies))
    ]
    audit.sort(key=lambda r: (r.length, r.code))
    win.tree.validate(require_tree=True)
    return SteinerSolution(
        tree=win.tree,
        length=float(lengths[best]),
        topology_code=codes[best],
        family_member=member,
        audit=audit,
        method=methods[best],
        instance=inst,
    )


def _evaluate_family(P, t: FullTopology, tol: float) -> FixedTopologyResult:
    if P.shape[1] == 2:
        res = solve_full_planar(P, t)
        if res is not None:
            return res
    from .opt import minimize_topology

    return minimize_topology(P, t, tol=tol)


def _describe_realization(res: FixedTopologyResult) -> str:
    if res.is_full_realization:
        return "full"
    parts = []
    if res.realized_contraction:
        parts.append("contracted{" + ",".join(map(str, sorted(res.realized_contraction))) + "}")
    if res.steiner_cluster_merges:
        parts.append("branch-merged" + str(tuple(res.steiner_cluster_merges)))
    return "+".join(parts)


@dataclass
class StabilityReport:
    shift: float
    trials: int
    retained: int
    retention_rate: float
    gap: float | None            # length gap to the best family outside D(T)
    gap_exact: bool
    threshold: float | None      # gap / (5 n)
    guaranteed: bool             # shift < threshold: retention must be 100%
    base_code: str
    failures: list[int] = field(default_factory=list)


def stability_probe(
    inst: Instance,
    shift: float,
    trials: int,
    seed: int,
    n_max: int = N_MAX_DEFAULT,
) -> StabilityReport:
    """Re-solve under random terminal shifts smaller than ``shift`` and
    report whether the winning contraction family survives.  When shift is
    below gap/(5n) the survival is a theorem, and the report must show 100%
    retention."""
    if shift <= 0:
        raise ValueError("shift must be positive")
    base = solve(inst, n_max=n_max, exact_audit=True, prune=False)
    gap, gap_exact = base.exact_gap_outside_family()
    threshold = None if gap is None else gap / (5.0 * inst.n)
    guaranteed = gap is None or (gap_exact and gap > 0 and shift < threshold)
    rng = np.random.default_rng(seed)
    retained = 0
    failures = []
    for trial in range(trials):
        delta = rng.standard_normal(inst.terminals.shape)
        norms = np.linalg.norm(delta, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        radii = shift * rng.uniform(0.0, 1.0, size=(inst.n, 1)) ** (1.0 / inst.d)
        moved = inst.terminals + delta / norms * radii * (1 - 1e-12)
        sol = solve(Instance(moved), n_max=n_max)
        if sol.topology_code == base.topology_code:
            retained += 1
        else:
            failures.append(trial)
    return StabilityReport(
        shift=shift,
        trials=trials,
        retained=retained,
        retention_rate=retained / trials if trials else 1.0,
        gap=gap,
        gap_exact=gap_exact,
        threshold=threshold,
        guaranteed=guaranteed,
        base_code=base.topology_code,
        failures=failures,
    )


@dataclass
class SolutionValidation:
    connected: bool
    acyclic: bool
    all_terminals_present: bool
    hull_ok: bool
    hull_failures: list[int]
    local_minimality: LocalMinimalityReport
    maxwell_residual: float | None
    maxwell_ok: bool
    passed: bool


def validate_solution(sol: SteinerSolution, inst: Instance) -> SolutionValidation:
    """Aggregated verdicts: connectivity, acyclicity, hull containment,
    local minimality, and the planar length-formula residual for full
    trees."""
    tree = sol.tree
    connected = tree.is_tree()
    acyclic = tree.is_acyclic()
    terms_present = len(tree.terminals) == inst.n and all(
        any(np.linalg.norm(tree.vertices[k] - p) <= TOL_GEOM for k in tree.terminals)
        for p in inst.terminals
    )
    hull_failures = [
        v for v in range(tree.n_vertices)
        if not convex_hull_contains(inst.terminals, tree.vertices[v])
    ]
    lm = validate_local_minimality(tree)
    maxwell_residual = None
    maxwell_ok = True
    if inst.d == 2 and all(tree.degree(k) == 1 for k in tree.terminals):
        from .analysis import maxwell_length

        value, residual = maxwell_length(tree)
        maxwell_residual = residual
        maxwell_ok = abs(value - forest_length(tree)) <= 1e-8 and residual <= 1e-8
    passed = (
        connected
        and acyclic
        and terms_present
        and not hull_failures
        and lm.passed
        and maxwell_ok
    )
    return SolutionValidation(
        connected, acyclic, terms_present, not hull_failures, hull_failures,
        lm, maxwell_residual, maxwell_ok, passed,
    )
