"""Stage-by-stage constructor of a full tree on the unit circle whose
branch points accumulate at four points.

Stage 0 is the minimal tree of the rectangle with corners at the four
primitive 12th roots of unity scaled to arguments +-pi/6, +-5pi/6; its five
segments use three fixed directions (horizontal and +-60 degrees).  Each
stage slides an auxiliary copy of the corners along the circle by a small
arc eps (alternating sense), rebuilds the minimal tree of the shifted
terminals by straight-line cascade (every branch point is the intersection
of two fixed-direction lines, which keeps the tree exactly parallel), and
re-attaches the original corner through a regular tripod whose apex sits on
the old leaf edge; the third tripod ray meets the circle at a fresh terminal
z with |x - z| < sqrt(2 eps).  Terminals therefore grow by 4 per stage and
pile up at the four corners, which are the accumulation points xi with
xi^6 = -1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import TOL_GEOM, EmbeddedForest, forest_length
from .opt import validate_local_minimality
from .solver import Instance, solve
from .topology import N_MAX_DEFAULT, FullTopology, MELZAK_N_MAX

EPS_CAP = 1e-3
MAX_STAGES = 12
DIRECTION_TOL = 1e-7
CANONICAL_LINES = (1.0 + 0.0j, np.exp(1j * np.pi / 3.0), np.exp(2j * np.pi / 3.0))


class StageError(RuntimeError):
    """A structural assertion failed while advancing a stage."""


def _cross(p: complex, q: complex) -> float:
    return p.real * q.imag - p.imag * q.real


def _line_intersect(a: complex, u: complex, b: complex, v: complex) -> complex:
    den = _cross(u, v)
    if abs(den) < 1e-14:
        raise StageError("degenerate cascade: parallel construction lines")
    t = _cross(b - a, v) / den
    return a + t * u


def _ray_circle_exit(p: complex, r: complex) -> complex:
    """First unit-circle point on the ray p + tau r, tau > 0 (p inside)."""
    pr = p.real * r.real + p.imag * r.imag
    disc = pr * pr + 1.0 - abs(p) ** 2
    if disc < 0:
        raise StageError("tripod ray misses the circle")
    tau = -pr + np.sqrt(disc)
    if tau <= TOL_GEOM:
        raise StageError("tripod ray exits the circle immediately")
    return p + tau * r


# corner transforms applied to the upper-right frame, in terminal order
_CORNER_MAPS = (
    lambda w: w,                     # upper right
    lambda w: -np.conj(w),           # upper left
    lambda w: -w,                    # lower left
    lambda w: np.conj(w),            # lower right
)


@dataclass
class PathologyStage:
    j: int
    tree: EmbeddedForest
    length: float
    eps: float                           # shift used to reach this stage (0 at stage 0)
    eps_history: tuple[float, ...]
    corners: np.ndarray                  # the four fixed corner terminals
    shifted_corners: np.ndarray | None   # auxiliary rectangle of this stage
    new_terminals: np.ndarray | None     # the four z terminals added
    tripod_branches: np.ndarray | None   # the four tripod apexes added
    delta_estimate: float | None = None  # gap to the best family outside D(T_j)
    delta_exact: bool = False
    # construction state in the upper-right frame
    _chain: tuple[complex, ...] = field(default=(), repr=False)
    _chain_dirs: tuple[complex, ...] = field(default=(), repr=False)   # toward the corner
    _zs: tuple[complex, ...] = field(default=(), repr=False)
    _z_dirs: tuple[complex, ...] = field(default=(), repr=False)       # tripod ray to z
    _spine: complex = field(default=0.0, repr=False)
    _spine_dir: complex = field(default=0.0, repr=False)               # from chain root toward spine

    @property
    def n_terminals(self) -> int:
        return len(self.tree.terminals)

    @property
    def n_branches(self) -> int:
        return self.tree.n_vertices - self.n_terminals

    def terminal_coordinates(self) -> np.ndarray:
        return self.tree.vertices[: self.n_terminals]

    def topology(self) -> FullTopology:
        """Abstract full topology of the stage tree (terminals first)."""
        return FullTopology(self.n_terminals, self.tree.edges)


def _assemble(j, chain, zs, spine) -> tuple[EmbeddedForest, np.ndarray]:
    """Build the four-fold symmetric tree from the upper-right frame."""
    x_ur = np.exp(1j * np.pi / 6.0)
    n_term = 4 * (j + 1)
    n_branch = 4 * j + 2
    coords = np.zeros((n_term + n_branch, 2))

    def put(idx, w):
        coords[idx] = [w.real, w.imag]

    for c, mp in enumerate(_CORNER_MAPS):
        put(c, mp(x_ur))
    for l in range(j):
        for c, mp in enumerate(_CORNER_MAPS):
            put(4 + 4 * l + c, mp(zs[l]))
    base = n_term
    put(base, spine)            # s+
    put(base + 1, -spine)       # s-
    for l in range(j):
        for c, mp in enumerate(_CORNER_MAPS):
            put(base + 2 + 4 * l + c, mp(chain[l]))

    def t_id(l, c):
        return base + 2 + 4 * l + c

    def z_id(l, c):
        return 4 + 4 * l + c

    edges = [(base, base + 1)]
    side = {0: base, 3: base, 1: base + 1, 2: base + 1}   # corner -> spine end
    for c in range(4):
        prev = side[c]
        for l in range(j):
            edges.append((prev, t_id(l, c)))
            edges.append((t_id(l, c), z_id(l, c)))
            prev = t_id(l, c)
        edges.append((prev, c))
    forest = EmbeddedForest(coords, tuple(edges), frozenset(range(n_term)))
    return forest, coords


def build_stage0() -> PathologyStage:
    """Minimal tree of the base rectangle: branch points (+-1/sqrt(3), 0),
    length 2 sqrt(3), edges meeting the circle at pi/3."""
    spine = complex(1.0 / np.sqrt(3.0), 0.0)
    forest, coords = _assemble(0, (), (), spine)
    forest.validate(require_tree=True)
    x_ur = np.exp(1j * np.pi / 6.0)
    return PathologyStage(
        j=0,
        tree=forest,
        length=forest_length(forest),
        eps=0.0,
        eps_history=(),
        corners=coords[:4].copy(),
        shifted_corners=None,
        new_terminals=None,
        tripod_branches=None,
        _chain=(),
        _chain_dirs=(),
        _zs=(),
        _z_dirs=(),
        _spine=spine,
        _spine_dir=(spine - x_ur) / abs(spine - x_ur),
    )


def _canonical_line_check(tree: EmbeddedForest, tol: float = DIRECTION_TOL) -> float:
    """Largest angular deviation of any edge from the three fixed lines."""
    worst = 0.0
    for a, b in tree.segments():
        vec = complex(b[0] - a[0], b[1] - a[1])
        vec /= abs(vec)
        dev = min(
            abs(np.angle(vec / line)) % np.pi if abs(np.angle(vec / line)) % np.pi < np.pi / 2
            else np.pi - abs(np.angle(vec / line)) % np.pi
            for line in CANONICAL_LINES
        )
        worst = max(worst, dev)
    if worst > tol:
        raise StageError(f"edge direction deviates {worst:.2e} rad from the fixed lines")
    return worst


def advance(stage: PathologyStage, eps: float) -> PathologyStage:
    """One construction step: shift the auxiliary corners by arc eps into
    the wide angle, rebuild the parallel tree exactly, insert the corner
    tripod, and add the new circle terminal."""
    if eps <= 0:
        raise ValueError("shift must be positive")
    if eps > EPS_CAP:
        raise ValueError(f"shift {eps} exceeds the cap {EPS_CAP}")
    if stage.delta_estimate is not None and eps > stage.delta_estimate**2 / 64.0:
        raise ValueError(
            f"shift {eps} violates the admissibility bound delta^2/64 = "
            f"{stage.delta_estimate**2 / 64.0:.3e}"
        )
    if stage.j + 1 > MAX_STAGES:
        raise ValueError(f"stage cap {MAX_STAGES} reached")

    j = stage.j
    x = np.exp(1j * np.pi / 6.0)
    chain = list(stage._chain)
    chain_dirs = list(stage._chain_dirs)
    zs = list(stage._zs)
    z_dirs = list(stage._z_dirs)

    # the current leaf line decides the shift sense: the corner moves into
    # the angle of size 2 pi / 3 between its edge and the circle
    leaf_dir = chain_dirs[-1] if chain else -stage._spine_dir
    leaf_line = _line_of(leaf_dir)
    if leaf_line == 1:
        sigma = +1          # leaf on the 60-degree line: shift counterclockwise
    elif leaf_line == 0:
        sigma = -1          # leaf horizontal: shift clockwise
    else:
        raise StageError("corner leaf edge left the expected alternation")
    x_shift = np.exp(1j * (np.pi / 6.0 + sigma * eps))

    # cascade: rebuild every branch point as the intersection of its two
    # fixed-direction lines, from the leaf back to the spine
    new_chain = list(chain)
    anchor = x_shift
    for l in range(j - 1, -1, -1):
        line_dir = chain_dirs[l]
        new_chain[l] = _line_intersect(anchor, line_dir, zs[l], z_dirs[l])
        anchor = new_chain[l]
    if j:
        spine_new = _line_intersect(anchor, stage._spine_dir, 0.0, 1.0 + 0j)
    else:
        spine_new = _line_intersect(x_shift, stage._spine_dir, 0.0, 1.0 + 0j)
    if spine_new.real <= TOL_GEOM:
        raise StageError("cascade pushed the spine through the origin")
    spine_new = complex(spine_new.real, 0.0)

    # the shifted leaf edge [x_shift -> y]
    y = new_chain[j - 1] if j else spine_new
    u_leaf = (y - x_shift) / abs(y - x_shift)
    new_leg_line = CANONICAL_LINES[0] if _line_of(u_leaf) == 1 else CANONICAL_LINES[1]
    t_new = _line_intersect(x_shift, u_leaf, x, new_leg_line)

    seg_len = abs(y - x_shift)
    tau = ((t_new - x_shift) / u_leaf).real
    if not (TOL_GEOM < tau < seg_len - TOL_GEOM):
        raise StageError(
            f"tripod apex leaves the shifted leaf edge (tau={tau:.3e}, len={seg_len:.3e})"
        )
    r_y = u_leaf
    r_x = (x - t_new) / abs(x - t_new)
    r_z = -(r_y + r_x)
    if abs(abs(r_z) - 1.0) > 1e-9:
        raise StageError("tripod rays are not at mutual 2 pi / 3 angles")
    r_z /= abs(r_z)
    z_new = _ray_circle_exit(t_new, r_z)
    if abs(x - z_new) >= np.sqrt(2.0 * eps):
        raise StageError(
            f"|x z| = {abs(x - z_new):.3e} >= sqrt(2 eps) = {np.sqrt(2 * eps):.3e}"
        )

    new_chain.append(t_new)
    chain_dirs.append(r_x)
    zs.append(z_new)
    z_dirs.append(r_z)

    forest, coords = _assemble(j + 1, tuple(new_chain), tuple(zs), spine_new)
    forest.validate(require_tree=True)
    _canonical_line_check(forest)
    lm = validate_local_minimality(forest, tol_angle=1e-9)
    if not lm.passed:
        raise StageError("stage tree is not locally minimal: construction bug")
    new_length = forest_length(forest)
    if not (stage.length < new_length < stage.length + 4.0 * np.sqrt(2.0 * eps)):
        raise StageError(
            f"length increment {new_length - stage.length:.3e} outside "
            f"(0, 4 sqrt(2 eps) = {4 * np.sqrt(2 * eps):.3e})"
        )

    shifted = np.array([[mp(x_shift).real, mp(x_shift).imag] for mp in _CORNER_MAPS])
    new_terms = np.array([[mp(z_new).real, mp(z_new).imag] for mp in _CORNER_MAPS])
    new_tripods = np.array([[mp(t_new).real, mp(t_new).imag] for mp in _CORNER_MAPS])
    return PathologyStage(
        j=j + 1,
        tree=forest,
        length=new_length,
        eps=eps,
        eps_history=stage.eps_history + (eps,),
        corners=stage.corners,
        shifted_corners=shifted,
        new_terminals=new_terms,
        tripod_branches=new_tripods,
        _chain=tuple(new_chain),
        _chain_dirs=tuple(chain_dirs),
        _zs=tuple(zs),
        _z_dirs=tuple(z_dirs),
        _spine=spine_new,
        _spine_dir=stage._spine_dir,
    )


def _line_of(direction: complex) -> int:
    """Index 0/1/2 of the canonical line the direction lies on."""
    for i, line in enumerate(CANONICAL_LINES):
        ang = np.angle(direction / line) % np.pi
        if ang < 1e-9 or np.pi - ang < 1e-9:
            return i
    raise StageError(f"direction {direction} is not on a canonical line")


@dataclass
class CertificationReport:
    j: int
    mode: str                 # "exact" | "heuristic"
    optimal: bool | None      # solver agreement (exact mode)
    length_gap: float | None  # |solver optimum - constructed length|
    family_match: bool | None
    delta: float | None       # measured (exact) or estimated gap
    delta_exact: bool
    locally_minimal: bool
    directions_ok: bool
    counts_ok: bool
    passed: bool


def certify_stage(
    stage: PathologyStage,
    n_max: int = N_MAX_DEFAULT,
    calibration_c: float | None = None,
) -> CertificationReport:
    """Exact mode (small stages): the solver confirms optimality and
    measures the gap to the best family outside D(T_j).  Heuristic mode:
    structural validation only, with the gap estimated as c * eps."""
    n = stage.n_terminals
    lm = validate_local_minimality(stage.tree, tol_angle=1e-9)
    try:
        _canonical_line_check(stage.tree)
        directions_ok = True
    except StageError:
        directions_ok = False
    counts_ok = (
        n == 4 * (stage.j + 1)
        and stage.n_branches == 4 * stage.j + 2
        and all(stage.tree.degree(k) == 1 for k in stage.tree.terminals)
    )

    if n <= n_max:
        inst = Instance(stage.terminal_coordinates())
        sol = solve(inst, n_max=n_max, exact_audit=True, prune=False)
        gap, gap_exact = sol.exact_gap_outside_family()
        length_gap = abs(sol.length - stage.length)
        family_match = sol.topology_code == stage.topology().code()
        optimal = length_gap <= 1e-9 and family_match
        delta = gap
        passed = bool(optimal and lm.passed and directions_ok and counts_ok
                      and (delta is None or delta > 0))
        stage.delta_estimate = delta
        stage.delta_exact = bool(gap_exact)
        return CertificationReport(
            stage.j, "exact", optimal, length_gap, family_match,
            delta, bool(gap_exact), lm.passed, directions_ok, counts_ok, passed,
        )

    delta = None if calibration_c is None or stage.eps == 0 else calibration_c * stage.eps
    stage.delta_estimate = delta
    stage.delta_exact = False
    passed = lm.passed and directions_ok and counts_ok
    return CertificationReport(
        stage.j, "heuristic", None, None, None,
        delta, False, lm.passed, directions_ok, counts_ok, passed,
    )


@dataclass
class ClusterReport:
    limits: np.ndarray            # (4, 2) accumulation-point estimates
    sixth_power_residuals: np.ndarray   # |xi^6 + 1| per limit
    per_stage_radii: np.ndarray   # (4, J) distance of stage-l additions to the limit
    radii_shrink: bool            # geometric decay of the per-stage radii
    n_clusters: int
    outside_points: int           # points not assigned to any cluster (spine)
    passed: bool


def accumulation_report(stages: list[PathologyStage], tol: float = 1e-6) -> ClusterReport:
    """Cluster all terminals and branch points of the final stage around
    the four persistent corner terminals and verify the accumulation
    geometry: exactly 4 limits, each satisfying xi^6 = -1 (one edge
    direction already lies on the real axis), radii shrinking geometrically.
    """
    if len(stages) < 3:
        raise ValueError("need at least 3 stages to measure accumulation")
    last = stages[-1]
    corners = last.corners
    J = last.j
    pts = last.tree.vertices
    # assign every vertex to the nearest corner when within the capture
    # radius; the two spine points stay outside
    capture = 0.45
    assigned = [[] for _ in range(4)]
    outside = 0
    for v in range(pts.shape[0]):
        dists = np.linalg.norm(corners - pts[v], axis=1)
        c = int(np.argmin(dists))
        if dists[c] <= capture:
            assigned[c].append(v)
        else:
            outside += 1
    n_clusters = sum(1 for a in assigned if len(a) >= 3)

    limits = corners.copy()
    residuals = np.array([
        abs(complex(xi[0], xi[1]) ** 6 + 1.0) for xi in limits
    ])

    radii = np.zeros((4, J))
    for l, st in enumerate(stages[1:], start=0):
        if st.new_terminals is None:
            continue
        for c in range(4):
            rz = np.linalg.norm(st.new_terminals[c] - corners[c])
            rt = np.linalg.norm(st.tripod_branches[c] - corners[c])
            radii[c, st.j - 1] = max(rz, rt)
    shrink = True
    for c in range(4):
        seq = radii[c][radii[c] > 0]
        if len(seq) >= 2 and not np.all(seq[1:] <= 0.9 * seq[:-1]):
            shrink = False
    passed = n_clusters == 4 and bool((residuals <= tol).all()) and shrink
    return ClusterReport(
        limits=limits,
        sixth_power_residuals=residuals,
        per_stage_radii=radii,
        radii_shrink=shrink,
        n_clusters=n_clusters,
        outside_points=outside,
        passed=passed,
    )


@dataclass
class ConstructionRun:
    stages: list[PathologyStage]
    certifications: list[CertificationReport]
    cluster_report: ClusterReport | None


def run_construction(
    n_stages: int,
    eps1: float = 1e-3,
    n_max: int = N_MAX_DEFAULT,
    certify: bool = True,
) -> ConstructionRun:
    """Drive the construction through the default shift schedule
    eps_{j+1} = min(eps_j / 16, delta_j^2 / 64), certifying each stage
    exactly while the terminal count allows and heuristically afterwards."""
    if n_stages > MAX_STAGES:
        raise ValueError(f"stage count {n_stages} exceeds the cap {MAX_STAGES}")
    stages = [build_stage0()]
    certs = []
    calibration: float | None = None
    if certify:
        rep = certify_stage(stages[0], n_max=n_max)
        certs.append(rep)
        if not rep.passed:
            raise StageError("stage 0 failed certification")
    else:
        stages[0].delta_estimate = 4.0 - 2.0 * np.sqrt(3.0)
        stages[0].delta_exact = False

    eps = eps1
    for j in range(1, n_stages + 1):
        prev = stages[-1]
        if prev.delta_estimate is not None:
            eps = min(eps, prev.delta_estimate**2 / 64.0)
        if eps <= 0 or not np.isfinite(eps):
            raise StageError(f"shift schedule collapsed at stage {j}")
        nxt = advance(prev, eps)
        stages.append(nxt)
        if certify:
            rep = certify_stage(nxt, n_max=n_max, calibration_c=calibration)
            certs.append(rep)
            if rep.mode == "exact":
                if not rep.passed:
                    raise StageError(f"stage {j} failed exact certification")
                if nxt.eps > 0 and rep.delta is not None:
                    calibration = rep.delta / nxt.eps
            elif not rep.passed:
                raise StageError(f"stage {j} failed structural certification")
        eps = eps / 16.0
    cluster = accumulation_report(stages) if len(stages) >= 3 else None
    return ConstructionRun(stages, certs, cluster)
