"""Fixed-topology length minimization in R^d.

For a full topology T on n terminals the tree length L(y_1, ..., y_{n-2}) is
a convex function of the branch positions, so it has a unique minimum value.
We find it by iteratively relocating every branch point to the weighted
average of its neighbors (weights 1/edge length), the stationarity condition
of the smoothed objective sum sqrt(len^2 + eta^2), with the smoothing level
eta decreasing geometrically.  All branch points of a topology move at once
through one small SPD solve, and thousands of topologies of one instance
iterate together as a numpy batch.

Coincidence degenerations need care: when the minimum lies on the boundary
where a branch point merges with a terminal or another branch point, plain
relocation crawls (separation ~ 1/sweeps) and the merged pair makes the
solve near-singular.  Merges are therefore made explicit: the absorbed node
is substituted away (its edge slot becomes a zero self-loop and its position
mirrors the survivor), either automatically once a pair collapses below the
coincidence scale, or through a contraction probe that re-minimizes the
quotient and keeps it only when the family value does not increase.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import EmbeddedForest, forest_length
from .topology import FullTopology

ETA_START_FACTOR = 1e-3
ETA_FINAL_FACTOR = 1e-14
TOL_DEFAULT = 1e-12
MERGE_TOL_FACTOR = 1e-7
TOL_ANGLE = 1e-6
TOL_GRAD = 1e-8
SWEEP_CAP = 10**6
# Stalled coincidences park near 1e-4 of the diameter within the sweep
# budget; edges below PROBE_EDGE_FACTOR are candidates for a contraction
# probe, edges below TIE_FACTOR are fused outright (value-safe: collapsing
# a flat-valley pair at separation s changes the length by O(s^3)).
PROBE_EDGE_FACTOR = 2e-3
TIE_FACTOR = 1e-8


def _diameter(P: np.ndarray) -> float:
    diff = P[:, None, :] - P[None, :, :]
    return float(np.sqrt((diff * diff).sum(axis=2)).max())


def _eta_schedule(diam: float, start_factor: float = ETA_START_FACTOR) -> list[float]:
    # coarse continuation: relocation tolerates 100x smoothing jumps, and
    # accuracy at the floor is governed by the final sweeps anyway
    levels = []
    eta = start_factor * diam
    floor = ETA_FINAL_FACTOR * diam
    while eta > floor * 1.0000001:
        levels.append(eta)
        eta *= 0.01
    levels.append(floor)
    return levels


class _EdgeBatch:
    """Vectorized relocation engine over a batch of trees with shared
    terminals.

    Nodes 0..n-1 are the pinned terminals, nodes n..n+m-1 the free branch
    points.  ``edges`` has shape (B, E, 2) of node ids; an edge between two
    terminals contributes a fixed length, a zero self-loop contributes
    nothing.  ``mirror`` (B, m) marks absorbed branch points: entry >= 0 is
    the node id whose position the branch point copies (chains allowed).
    """

    def __init__(self, P: np.ndarray, m: int, edges: np.ndarray, mirror: np.ndarray | None = None):
        self.P = np.asarray(P, dtype=float)
        self.n, self.d = self.P.shape
        self.m = m
        self.edges = np.asarray(edges, dtype=np.int64)
        self.B, self.E, _ = self.edges.shape
        self.mirror = (
            np.full((self.B, m), -1, dtype=np.int64) if mirror is None else mirror
        )
        self._build_index()

    def _build_index(self):
        n, m, B, E = self.n, self.m, self.B, self.E
        u = self.edges[:, :, 0]
        v = self.edges[:, :, 1]
        live = u != v
        fu = (u >= n) & live
        fv = (v >= n) & live
        bu = u - n
        bv = v - n
        rows = np.arange(B, dtype=np.int64)[:, None] * np.ones((1, E), dtype=np.int64)
        base_a = rows * (m * m)
        base_r = rows * m

        self._u, self._v = u, v
        self._fu, self._fv = fu, fv
        self._both = fu & fv
        self._diag_u = np.where(fu, base_a + bu * (m + 1), 0)
        self._diag_v = np.where(fv, base_a + bv * (m + 1), 0)
        self._off_uv = np.where(self._both, base_a + bu * m + bv, 0)
        self._off_vu = np.where(self._both, base_a + bv * m + bu, 0)
        self._mask_rhs_u = fu & ~fv
        self._mask_rhs_v = fv & ~fu
        self._rhs_u = np.where(self._mask_rhs_u, base_r + bu, 0)
        self._rhs_v = np.where(self._mask_rhs_v, base_r + bv, 0)
        self._size_a = B * m * m
        self._size_r = B * m
        self._term_u = np.where(~fu & live, u, 0)   # terminal endpoint ids
        self._term_v = np.where(~fv & live, v, 0)
        # rows with no live edge at all get an identity equation
        freedeg = np.zeros((B, m))
        for arr, mask in ((bu, fu), (bv, fv)):
            flat = np.bincount(
                (rows * m + np.where(mask, arr, 0)).ravel(),
                weights=mask.ravel().astype(float),
                minlength=B * m,
            )
            freedeg += flat.reshape(B, m)
        self._orphan = freedeg == 0

        # resolve mirror chains once; they are static for this batch
        if (self.mirror >= 0).any():
            root = self.mirror.copy()
            for _ in range(m):
                follow = root >= n
                if not follow.any():
                    break
                nxt = np.where(
                    follow,
                    self.mirror[np.arange(B)[:, None], np.where(follow, root - n, 0)],
                    -1,
                )
                root = np.where(follow & (nxt >= 0), nxt, root)
                if not ((root >= n) & (nxt >= 0)).any():
                    break
            slave = self.mirror >= 0
            self._slave_rows, self._slave_cols = np.where(slave)
            r = root[self._slave_rows, self._slave_cols]
            self._slave_pinned = r < n
            self._slave_root = r
        else:
            self._slave_rows = None

    def enforce_mirrors(self, Y: np.ndarray) -> np.ndarray:
        if self._slave_rows is None:
            return Y
        rows, cols, roots = self._slave_rows, self._slave_cols, self._slave_root
        pin = self._slave_pinned
        if pin.any():
            Y[rows[pin], cols[pin]] = self.P[roots[pin]]
        freem = ~pin
        if freem.any():
            Y[rows[freem], cols[freem]] = Y[rows[freem], roots[freem] - self.n]
        return Y

    def positions(self, Y: np.ndarray) -> np.ndarray:
        Pb = np.broadcast_to(self.P[None], (Y.shape[0], self.n, self.d))
        return np.concatenate([Pb, Y], axis=1)

    def edge_lengths(self, Y: np.ndarray) -> np.ndarray:
        pos = self.positions(Y)
        rows = np.arange(Y.shape[0])[:, None]
        pu = pos[rows, self._u]
        pv = pos[rows, self._v]
        return np.linalg.norm(pu - pv, axis=2)

    def lengths(self, Y: np.ndarray) -> np.ndarray:
        return self.edge_lengths(Y).sum(axis=1)

    def _assemble(self, w):
        B, m, d = self.B, self.m, self.d
        wa_u = np.where(self._fu, w, 0.0)
        wa_v = np.where(self._fv, w, 0.0)
        woff = np.where(self._both, w, 0.0)
        a_flat = np.bincount(self._diag_u.ravel(), weights=wa_u.ravel(), minlength=self._size_a)
        a_flat += np.bincount(self._diag_v.ravel(), weights=wa_v.ravel(), minlength=self._size_a)
        a_flat -= np.bincount(self._off_uv.ravel(), weights=woff.ravel(), minlength=self._size_a)
        a_flat -= np.bincount(self._off_vu.ravel(), weights=woff.ravel(), minlength=self._size_a)
        A = a_flat.reshape(B, m, m)
        A[:, np.arange(m), np.arange(m)] += self._orphan.astype(float)

        rhs = np.zeros((B, m, d))
        w_ru = np.where(self._mask_rhs_u, w, 0.0)
        w_rv = np.where(self._mask_rhs_v, w, 0.0)
        pu = self.P[self._term_v]
        pv = self.P[self._term_u]
        for k in range(d):
            flat = np.bincount(
                self._rhs_u.ravel(), weights=(w_ru * pu[:, :, k]).ravel(), minlength=self._size_r
            )
            flat += np.bincount(
                self._rhs_v.ravel(), weights=(w_rv * pv[:, :, k]).ravel(), minlength=self._size_r
            )
            rhs[:, :, k] = flat.reshape(B, m)
        return A, rhs

    def relocate(self, Y: np.ndarray, eta: float) -> np.ndarray:
        ln = self.edge_lengths(Y)
        w = 1.0 / np.sqrt(ln * ln + eta * eta)
        A, rhs = self._assemble(w)
        dg = np.einsum("bii->bi", A)
        ds = 1.0 / np.sqrt(np.maximum(dg, 1e-300))
        A = A * ds[:, :, None] * ds[:, None, :]
        rhs = rhs * ds[:, :, None]
        out = np.linalg.solve(A, rhs) * ds[:, :, None]
        return self.enforce_mirrors(out)

    def harmonic_init(self) -> np.ndarray:
        """Minimize the sum of squared edge lengths (one linear solve):
        relocation with unit weights."""
        A, rhs = self._assemble(np.ones((self.B, self.E)))
        return self.enforce_mirrors(np.linalg.solve(A, rhs))


def _run_level(batch: _EdgeBatch, Y, eta, threshold, maxit):
    """Iterate one smoothing level, compacting the working set as items
    settle.  Returns (Y, last_move, sweeps); last_move stays inf for rows
    that never iterated."""
    B = Y.shape[0]
    last_move = np.full(B, np.inf)
    sweeps = 0
    ids = np.arange(B)
    sub = batch
    active = np.ones(B, dtype=bool)
    for _ in range(maxit):
        if not active.any():
            break
        Ynew = sub.relocate(Y[ids], eta)
        move = np.linalg.norm(Ynew - Y[ids], axis=2).max(axis=1)
        Y[ids] = Ynew
        last_move[ids] = move
        sweeps += 1
        active = move >= threshold
        if active.any() and active.mean() < 0.5:
            ids = ids[active]
            sub = _EdgeBatch(batch.P, batch.m, batch.edges[ids], batch.mirror[ids])
            active = np.ones(ids.size, dtype=bool)
    return Y, last_move, sweeps


def _rewire(edges_row: np.ndarray, slot: int, n: int) -> tuple[np.ndarray, int, int]:
    """Contract the edge in the given slot: the absorbed free endpoint is
    replaced by the survivor everywhere, the slot itself becoming a zero
    self-loop.  Returns (new_row, absorbed_node, survivor_node)."""
    out = edges_row.copy()
    a, b = int(out[slot, 0]), int(out[slot, 1])
    if a >= n and b >= n:
        survivor, gone = min(a, b), max(a, b)
    elif a >= n:
        survivor, gone = b, a
    else:
        survivor, gone = a, b
    out[out == gone] = survivor
    return out, gone, survivor


def _auto_tie(batch: _EdgeBatch, Y, edges, mirror, tied, diam):
    """Fuse edges that collapsed below the coincidence scale."""
    n = batch.n
    ln = batch.edge_lengths(Y)
    u, v = edges[:, :, 0], edges[:, :, 1]
    cand = (~tied) & (u != v) & ((u >= n) | (v >= n)) & (ln < TIE_FACTOR * diam)
    changed = np.where(cand.any(axis=1))[0]
    for b in changed:
        for slot in np.where(cand[b])[0]:
            a_, b_ = int(edges[b, slot, 0]), int(edges[b, slot, 1])
            if a_ == b_:
                continue  # an earlier fuse this round already rewired it
            edges[b], gone, survivor = _rewire(edges[b], int(slot), n)
            mirror[b, gone - n] = survivor
            tied[b, slot] = True
    return changed


def _descend(P, m, edges, mirror, tied, Y, diam, tol, start_factor=ETA_START_FACTOR,
             final_maxit=250, level_maxit=60):
    """Run the smoothing schedule with auto-tie sweeps at level boundaries.

    Mutates ``edges``/``mirror``/``tied`` in place; returns
    (Y, last_move, sweeps)."""
    B = Y.shape[0]
    last_move = np.full(B, np.inf)
    sweeps = 0
    batch = _EdgeBatch(P, m, edges, mirror)
    Y = batch.enforce_mirrors(Y)
    levels = _eta_schedule(diam, start_factor)
    for li, eta in enumerate(levels):
        final = li == len(levels) - 1
        threshold = tol * diam if final else max(0.05 * eta, tol * diam)
        maxit = final_maxit if final else level_maxit
        Y, mv, s = _run_level(batch, Y, eta, threshold, maxit)
        last_move = np.where(np.isfinite(mv), mv, last_move)
        sweeps += s
        changed = _auto_tie(batch, Y, edges, mirror, tied, diam)
        if changed.size:
            batch = _EdgeBatch(P, m, edges, mirror)
            Y = batch.enforce_mirrors(Y)
            if final:
                Y, mv, s = _run_level(batch, Y, eta, threshold, final_maxit)
                last_move = np.where(np.isfinite(mv), mv, last_move)
                sweeps += s
    return Y, last_move, sweeps


def _newton_polish(P, edges_row, mirror_row, Y_row, maxit=60):
    """Damped Newton on the exact length of one item.

    Relocation crawls when an edge is genuinely short (rate ~ 1 - len), so
    stragglers get second-order treatment.  Mirrored nodes stay slaved to
    their root; returns (Y_row, grad_norm)."""
    n, d = P.shape
    m = Y_row.shape[0]

    def resolve(v):
        hops = 0
        while v >= n and mirror_row[v - n] >= 0 and hops <= m:
            v = mirror_row[v - n]
            hops += 1
        return v

    live = sorted({resolve(n + i) for i in range(m) if resolve(n + i) >= n})
    if not live:
        return Y_row, 0.0
    idx = {v: k for k, v in enumerate(live)}
    nv = len(live)
    pairs = []
    for a, b in edges_row:
        ra, rb = resolve(int(a)), resolve(int(b))
        if ra != rb:
            pairs.append((ra, rb))

    def unpack(x):
        return x.reshape(nv, d)

    def fval(x):
        Yl = unpack(x)
        tot = 0.0
        for ra, rb in pairs:
            pa = P[ra] if ra < n else Yl[idx[ra]]
            pb = P[rb] if rb < n else Yl[idx[rb]]
            tot += float(np.linalg.norm(pa - pb))
        return tot

    x = np.concatenate([Y_row[v - n] for v in live]).astype(float)
    lam = 1e-9
    f = fval(x)
    g = np.zeros(nv * d)
    for _ in range(maxit):
        Yl = unpack(x)
        g[:] = 0.0
        H = np.zeros((nv * d, nv * d))
        for ra, rb in pairs:
            pa = P[ra] if ra < n else Yl[idx[ra]]
            pb = P[rb] if rb < n else Yl[idx[rb]]
            z = pa - pb
            ln = float(np.linalg.norm(z))
            if ln < 1e-300:
                continue
            u = z / ln
            blk = (np.eye(d) - np.outer(u, u)) / ln
            if ra >= n:
                ka = idx[ra] * d
                g[ka : ka + d] += u
                H[ka : ka + d, ka : ka + d] += blk
            if rb >= n:
                kb = idx[rb] * d
                g[kb : kb + d] -= u
                H[kb : kb + d, kb : kb + d] += blk
            if ra >= n and rb >= n:
                ka, kb = idx[ra] * d, idx[rb] * d
                H[ka : ka + d, kb : kb + d] -= blk
                H[kb : kb + d, ka : ka + d] -= blk
        gn = float(np.linalg.norm(g))
        if gn < 1e-13:
            break
        stepped = False
        for _ in range(40):
            try:
                delta = np.linalg.solve(H + lam * np.eye(nv * d), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            fnew = fval(x + delta)
            if fnew <= f:
                x = x + delta
                f = fnew
                lam = max(lam / 3, 1e-12)
                stepped = True
                break
            lam *= 10
        if not stepped:
            break
    Yl = unpack(x)
    for s in range(m):
        r = resolve(n + s)
        Y_row[s] = P[r] if r < n else Yl[idx[r]]
    return Y_row, float(np.linalg.norm(g))


@dataclass
class FamilySweep:
    """Results of minimizing many topologies over one terminal set."""

    lengths: np.ndarray        # (B,) family minimum values
    positions: np.ndarray      # (B, m, d) branch coordinates (merges coincide)
    converged: np.ndarray      # (B,) bool
    sweeps: int
    refined: np.ndarray | None = None   # (B,) bool: received full treatment


def _stall_candidates(batch: _EdgeBatch, Y, tied, diam):
    """Per item, the slot of the shortest probe-worthy edge, or -1."""
    ln = batch.edge_lengths(Y)
    n = batch.n
    u, v = batch.edges[:, :, 0], batch.edges[:, :, 1]
    eligible = (~tied) & (u != v) & ((u >= n) | (v >= n))
    window = (ln > TIE_FACTOR * diam) & (ln < PROBE_EDGE_FACTOR * diam)
    ok = eligible & window
    masked = np.where(ok, ln, np.inf)
    idx = masked.argmin(axis=1)
    idx[~ok.any(axis=1)] = -1
    return idx


def minimize_families(
    P: np.ndarray,
    topologies: list[FullTopology],
    tol: float = TOL_DEFAULT,
    refine_margin: float | None = None,
    chunk: int = 40_000,
) -> FamilySweep:
    """Family minima for every listed topology of one instance.

    Stalled coincidences are resolved by contraction probes, and stragglers
    get a Newton polish, so reported values are family minima even when they
    are attained by degenerate members.  With ``refine_margin`` set, only
    families whose first-pass value lies within that margin of the incumbent
    receive the expensive treatment; the rest keep their first-pass upper
    bound (accurate to ~1e-5 of the diameter), which never changes which
    family wins."""
    P = np.asarray(P, dtype=float)
    n, d = P.shape
    B = len(topologies)
    m = max(0, n - 2)
    if m == 0:
        L = float(np.linalg.norm(P[0] - P[1]))
        return FamilySweep(np.full(B, L), np.zeros((B, 0, d)), np.ones(B, bool), 0)
    lengths = np.zeros(B)
    positions = np.zeros((B, m, d))
    converged = np.zeros(B, bool)
    refined = np.zeros(B, bool)
    sweeps = 0
    for lo in range(0, B, chunk):
        hi = min(B, lo + chunk)
        ed = np.array([t.edges for t in topologies[lo:hi]], dtype=np.int64)
        vals, Y, conv, ref, s = _minimize_edges(P, m, ed, tol, refine_margin)
        lengths[lo:hi] = vals
        positions[lo:hi] = Y
        converged[lo:hi] = conv
        refined[lo:hi] = ref
        sweeps += s
    out = FamilySweep(lengths, positions, converged, sweeps)
    out.refined = refined
    return out


def _minimize_edges(P, m, edges, tol, refine_margin=None):
    n, d = P.shape
    B = edges.shape[0]
    diam = _diameter(P)
    edges = edges.copy()
    mirror = np.full((B, m), -1, dtype=np.int64)
    tied = np.zeros(edges.shape[:2], dtype=bool)
    Y = _EdgeBatch(P, m, edges, mirror).harmonic_init()
    Y, last_move, sweeps = _descend(P, m, edges, mirror, tied, Y, diam, tol)
    batch = _EdgeBatch(P, m, edges, mirror)
    values = batch.lengths(Y)
    accept_tol = 1e-11 * max(diam, 1.0)

    if refine_margin is None:
        in_scope = np.ones(B, dtype=bool)
    else:
        in_scope = values <= values.min() + refine_margin

    def polish(b):
        Yb, gn = _newton_polish(P, edges[b], mirror[b], Y[b].copy())
        Lb = float(_EdgeBatch(P, m, edges[b : b + 1], mirror[b : b + 1]).lengths(Yb[None])[0])
        if Lb <= values[b]:
            values[b] = Lb
            Y[b] = Yb
        return gn

    # contraction-probe rounds: stalled items crawl toward a coincidence at
    # rate 1/sweeps, so test the collapse directly against the polished
    # uncontracted value and keep whichever configuration is shorter
    polished = np.zeros(B, dtype=bool)
    tried: dict[int, set[int]] = {}
    for _ in range(2 * m + 2):
        cand = _stall_candidates(batch, Y, tied, diam)
        todo = [
            b for b in range(B)
            if in_scope[b] and cand[b] >= 0 and cand[b] not in tried.get(b, set())
        ]
        if not todo:
            break
        for b in todo:
            if not polished[b]:
                polish(b)
                polished[b] = True
        todo = np.array(todo)
        slots = cand[todo]
        sub_edges = []
        sub_mirror = mirror[todo].copy()
        for i, (b, s) in enumerate(zip(todo, slots)):
            row, gone, survivor = _rewire(edges[b], int(s), n)
            sub_edges.append(row)
            sub_mirror[i, gone - n] = survivor
        sub_edges = np.stack(sub_edges)
        sub_tied = tied[todo].copy()
        sub_tied[np.arange(todo.size), slots] = True
        subY = Y[todo].copy()
        subY, sub_move, s2 = _descend(P, m, sub_edges, sub_mirror, sub_tied, subY, diam,
                                      tol, start_factor=1e-7, final_maxit=600, level_maxit=60)
        sweeps += s2
        new_vals = _EdgeBatch(P, m, sub_edges, sub_mirror).lengths(subY)
        for i, b in enumerate(todo):
            Ysub, _ = _newton_polish(P, sub_edges[i], sub_mirror[i], subY[i].copy())
            Lsub = float(
                _EdgeBatch(P, m, sub_edges[i : i + 1], sub_mirror[i : i + 1]).lengths(Ysub[None])[0]
            )
            if Lsub > new_vals[i]:
                Ysub, Lsub = subY[i], float(new_vals[i])
            if Lsub <= values[b] + accept_tol:
                values[b] = Lsub
                Y[b] = Ysub
                edges[b] = sub_edges[i]
                mirror[b] = sub_mirror[i]
                tied[b] = sub_tied[i]
                last_move[b] = sub_move[i]
                tried.pop(int(b), None)
            else:
                tried.setdefault(int(b), set()).add(int(slots[i]))
        batch = _EdgeBatch(P, m, edges, mirror)

    converged = last_move < 10 * tol * diam
    for b in np.where(~converged & in_scope)[0]:
        gn = polish(b)
        converged[b] = gn < 1e-9
    return values, Y, converged, in_scope, sweeps


@dataclass
class FixedTopologyResult:
    tree: EmbeddedForest
    length: float
    converged: bool
    iterations: int
    max_branch_move_last_iter: float
    topology: FullTopology
    branch_positions: np.ndarray               # raw converged positions (m, d)
    realized_contraction: frozenset[int] = field(default_factory=frozenset)
    steiner_cluster_merges: tuple[tuple[int, ...], ...] = ()
    melzak_trace: object | None = None         # set by the planar solver

    @property
    def is_full_realization(self) -> bool:
        return not self.realized_contraction and not self.steiner_cluster_merges


def collapse_to_forest(
    P: np.ndarray, t: FullTopology, Y: np.ndarray, merge_tol: float
) -> tuple[EmbeddedForest, frozenset[int], tuple[tuple[int, ...], ...]]:
    """Embed the converged topology, merging branch points that landed on
    terminals or on each other (the family degeneration) into one vertex."""
    n, d = P.shape
    m = t.n_internal
    rep = list(range(n + m))

    def find(x):
        while rep[x] != x:
            rep[x] = rep[rep[x]]
            x = rep[x]
        return x

    pos = np.vstack([P, Y.reshape(m, d)]) if m else P.copy()
    for s in range(n, n + m):
        dists = np.linalg.norm(pos - pos[s], axis=1)
        dists[s] = np.inf
        o = int(np.argmin(dists))
        if dists[o] < merge_tol:
            ra, rb = find(s), find(o)
            if ra != rb:
                if rb < n:
                    rep[ra] = rb
                elif ra < n:
                    rep[rb] = ra
                else:
                    rep[max(ra, rb)] = min(ra, rb)

    contraction: set[int] = set()
    steiner_merges: list[tuple[int, ...]] = []
    clusters: dict[int, list[int]] = {}
    for s in range(n, n + m):
        r = find(s)
        if r != s:
            clusters.setdefault(r, []).append(s)
    for r, members in clusters.items():
        if r < n:
            contraction.add(r)
            if len(members) > 1:
                steiner_merges.append(tuple(sorted(members)))
        else:
            steiner_merges.append(tuple(sorted({r, *members})))

    keep = [v for v in range(n + m) if find(v) == v]
    new_index = {v: i for i, v in enumerate(keep)}
    vertices = pos[keep]
    edges = set()
    for a, b in t.edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            ia, ib = new_index[ra], new_index[rb]
            edges.add((min(ia, ib), max(ia, ib)))
    terminals = frozenset(new_index[v] for v in range(n))
    forest = EmbeddedForest(vertices, tuple(sorted(edges)), terminals)
    return forest, frozenset(contraction), tuple(sorted(steiner_merges))


def minimize_topology(
    P: np.ndarray, t: FullTopology, tol: float = TOL_DEFAULT
) -> FixedTopologyResult:
    """Branch positions within tol of the unique minimum of the convex
    length function for topology t over the terminals P; coincidence merges
    (the family degeneration) are detected and reported via vertex marks."""
    P = np.asarray(P, dtype=float)
    if P.shape[0] != t.n:
        raise ValueError(f"topology has {t.n} terminals, instance has {P.shape[0]}")
    if P.shape[1] < 2:
        raise ValueError("dimension must be >= 2")
    sweep = minimize_families(P, [t], tol=tol)
    Y = sweep.positions[0]
    diam = _diameter(P)
    forest, contraction, merges = collapse_to_forest(P, t, Y, MERGE_TOL_FACTOR * diam)
    return FixedTopologyResult(
        tree=forest,
        length=forest_length(forest),
        converged=bool(sweep.converged[0]),
        iterations=sweep.sweeps,
        max_branch_move_last_iter=float("nan"),
        topology=t,
        branch_positions=Y,
        realized_contraction=contraction,
        steiner_cluster_merges=merges,
    )


def stationarity_report(P: np.ndarray, t: FullTopology, Y: np.ndarray, merge_tol: float):
    """Subdifferential residuals at a candidate minimum.

    Free branch points must have unit edge directions summing to ~0; a
    cluster merged onto a terminal satisfies the subgradient condition
    |sum of outside unit directions| <= 1.
    Returns (free_residuals, merged_residuals) keyed by vertex id.
    """
    n, d = P.shape
    m = t.n_internal
    pos = np.vstack([P, Y.reshape(m, d)]) if m else P
    anchor_of: dict[int, int] = {}
    for s in range(n, n + m):
        dists = np.linalg.norm(pos - pos[s], axis=1)
        dists[s] = np.inf
        o = int(np.argmin(dists))
        anchor_of[s] = o if dists[o] < merge_tol else s

    def root(v):
        seen = set()
        while v >= n and anchor_of.get(v, v) != v and v not in seen:
            seen.add(v)
            v = anchor_of[v]
        return v

    groups: dict[int, set[int]] = {}
    for s in range(n, n + m):
        groups.setdefault(root(s), set()).add(s)
    free_residuals: dict[int, float] = {}
    merged_residuals: dict[int, float] = {}
    for anchor, members in groups.items():
        inside = set(members) | {anchor}
        total = np.zeros(d)
        for a, b in t.edges:
            ain, bin_ = a in inside, b in inside
            if ain == bin_:
                continue
            uu, vv = (a, b) if ain else (b, a)
            vec = pos[vv] - pos[uu]
            nv = np.linalg.norm(vec)
            if nv > 0:
                total += vec / nv
        if anchor < n or len(members) > 1:
            merged_residuals[anchor] = float(np.linalg.norm(total))
        else:
            free_residuals[anchor] = float(np.linalg.norm(total))
    return free_residuals, merged_residuals


@dataclass
class VertexVerdict:
    index: int
    degree: int
    degree_ok: bool
    min_pairwise_angle: float
    angles_ok: bool
    branch_angle_deviation: float
    coplanarity_residual: float
    ok: bool


@dataclass
class LocalMinimalityReport:
    vertices: list[VertexVerdict]
    passed: bool


def validate_local_minimality(
    tree: EmbeddedForest, tol_angle: float = TOL_ANGLE
) -> LocalMinimalityReport:
    """Per-vertex verdicts: degree <= 3, pairwise angles >= 2pi/3, exact
    2pi/3 angles and coplanarity at degree-3 vertices.  Verdicts, not
    exceptions."""
    two_thirds_pi = 2.0 * np.pi / 3.0
    out = []
    passed = True
    for v in range(tree.n_vertices):
        nbrs = tree.neighbors(v)
        deg = len(nbrs)
        if deg == 0:
            continue
        degree_ok = deg <= 3
        units = []
        for u in nbrs:
            vec = tree.vertices[u] - tree.vertices[v]
            units.append(vec / np.linalg.norm(vec))
        min_angle = np.pi if deg < 2 else min(
            float(np.arccos(np.clip(np.dot(units[i], units[j]), -1, 1)))
            for i in range(deg)
            for j in range(i + 1, deg)
        )
        angles_ok = deg < 2 or min_angle >= two_thirds_pi - tol_angle
        branch_dev = 0.0
        coplanarity = 0.0
        if deg == 3:
            angles = [
                float(np.arccos(np.clip(np.dot(units[i], units[j]), -1, 1)))
                for i in range(3)
                for j in range(i + 1, 3)
            ]
            branch_dev = max(abs(a - two_thirds_pi) for a in angles)
            angles_ok = angles_ok and branch_dev <= tol_angle
            if tree.dim > 2:
                coplanarity = float(np.linalg.svd(np.array(units), compute_uv=False)[-1])
                angles_ok = angles_ok and coplanarity <= tol_angle
        ok = degree_ok and angles_ok
        passed = passed and ok
        out.append(
            VertexVerdict(v, deg, degree_ok, min_angle, angles_ok, branch_dev, coplanarity, ok)
        )
    return LocalMinimalityReport(out, passed)
