"""Abstract full Steiner topologies, their enumeration, and contraction families.

A full topology on n labeled terminals (ids 0..n-1) has max(0, n-2) internal
vertices of degree 3 (ids n..2n-3).  Contraction families collect the
topologies reachable by contracting terminal-internal edges with pairwise
distinct ends; they partition the non-degenerate topologies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

N_MAX_DEFAULT = 10
MELZAK_N_MAX = 12


def _degrees(edges, n_vertices):
    deg = [0] * n_vertices
    for a, b in edges:
        deg[a] += 1
        deg[b] += 1
    return deg


def _is_tree(edges, n_vertices):
    if n_vertices == 0:
        return False
    parent = list(range(n_vertices))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    merged = 0
    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[ra] = rb
        merged += 1
    return merged == n_vertices - 1


@dataclass(frozen=True)
class FullTopology:
    """Tree on n terminal leaves (degree 1) and n-2 internal vertices (degree 3)."""

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("a topology needs at least 2 terminals")
        norm = tuple(sorted((min(a, b), max(a, b)) for a, b in self.edges))
        object.__setattr__(self, "edges", norm)
        nv = self.n_vertices
        if not _is_tree(norm, nv):
            raise ValueError("edge set is not a tree")
        deg = _degrees(norm, nv)
        for t in range(self.n):
            if deg[t] != 1:
                raise ValueError(f"terminal {t} has degree {deg[t]}, expected 1")
        for s in range(self.n, nv):
            if deg[s] != 3:
                raise ValueError(f"internal vertex {s} has degree {deg[s]}, expected 3")

    @property
    def n_internal(self) -> int:
        return max(0, self.n - 2)

    @property
    def n_vertices(self) -> int:
        return self.n + self.n_internal

    def neighbors(self, v: int) -> list[int]:
        out = []
        for a, b in self.edges:
            if a == v:
                out.append(b)
            elif b == v:
                out.append(a)
        return out

    def steiner_neighbor(self, t: int) -> int:
        """The unique vertex adjacent to terminal t."""
        (nb,) = self.neighbors(t)
        return nb

    def code(self) -> str:
        return canonical_code(self)


def _tree_code(n: int, edges, n_vertices: int) -> str:
    """Canonical code of a tree with fixed terminal labels 0..n-1 and
    anonymous internal vertices; equal iff isomorphic under internal
    relabeling.  Rooted at terminal 0, children sorted recursively."""
    adj: dict[int, list[int]] = {v: [] for v in range(n_vertices)}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)

    def enc(v: int, parent: int) -> str:
        kids = sorted(enc(u, v) for u in adj[v] if u != parent)
        label = f"t{v}" if v < n else "s"
        return label + ("(" + ",".join(kids) + ")" if kids else "")

    if not adj[0]:
        raise ValueError("terminal 0 is isolated")
    return f"{n}:" + enc(0, -1)


def canonical_code(t: FullTopology) -> str:
    """Deduplication / tie-break key: equal for isomorphic topologies
    (terminal labels fixed, internal labels free), distinct otherwise."""
    return _tree_code(t.n, t.edges, t.n_vertices)


def enumerate_full(n: int, n_max: int = N_MAX_DEFAULT) -> list[FullTopology]:
    """All distinct full topologies on n labeled terminals, in canonical-code
    order; there are (2n-5)!! of them for n >= 3 and one for n = 2."""
    if n < 2:
        raise ValueError("need n >= 2 terminals")
    if n > n_max:
        raise ValueError(f"n = {n} exceeds the enumeration cap n_max = {n_max}")
    current: list[tuple[tuple[int, int], ...]] = [((0, 1),)]
    for k in range(3, n + 1):
        # terminals 0..k-1, internal k..2k-3; previous internal ids shift by +1
        nxt = []
        for edges in current:
            shifted = tuple(
                (a if a < k - 1 else a + 1, b if b < k - 1 else b + 1) for a, b in edges
            )
            w = 2 * k - 3
            new_t = k - 1
            for idx, (a, b) in enumerate(shifted):
                split = shifted[:idx] + shifted[idx + 1 :] + ((a, w), (b, w), (new_t, w))
                nxt.append(split)
        current = nxt
    tops = [FullTopology(n, e) for e in current]
    tops.sort(key=canonical_code)
    return tops


@dataclass(frozen=True)
class ContractedTopology:
    """A member of D(base): some terminal-internal edges contracted.

    ``contracted`` holds the terminal ids whose unique edge is contracted;
    admissibility requires their internal endpoints to be pairwise distinct,
    so no terminal ever exceeds degree 2 in the result.
    """

    base: FullTopology
    contracted: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "contracted", frozenset(self.contracted))
        seen = set()
        for t in self.contracted:
            if not (0 <= t < self.base.n):
                raise ValueError(f"{t} is not a terminal of the base topology")
            s = self.base.steiner_neighbor(t)
            if s < self.base.n:
                raise ValueError("n = 2 topology has no contractible edges")
            if s in seen:
                raise ValueError("contracted edges must have pairwise distinct ends")
            seen.add(s)

    def quotient_edges(self) -> tuple[tuple[int, int], ...]:
        """Edges of the contracted abstract tree; merged internal vertices
        take their terminal's identity, remaining internal ids are compacted
        to n..n+k-1."""
        base = self.base
        target = {base.steiner_neighbor(t): t for t in self.contracted}
        remaining = [s for s in range(base.n, base.n_vertices) if s not in target]
        relabel = {s: base.n + i for i, s in enumerate(remaining)}

        def m(v: int) -> int:
            if v in target:
                return target[v]
            if v in relabel:
                return relabel[v]
            return v

        out = []
        for a, b in base.edges:
            ma, mb = m(a), m(b)
            if ma != mb:
                out.append((min(ma, mb), max(ma, mb)))
        return tuple(sorted(out))

    def n_internal(self) -> int:
        return self.base.n_internal - len(self.contracted)

    def code(self) -> str:
        return _tree_code(self.base.n, self.quotient_edges(), self.base.n + self.n_internal())


def contract_family(t: FullTopology) -> list[ContractedTopology]:
    """All members of D(t), the uncontracted topology included."""
    stars = {term: t.steiner_neighbor(term) for term in range(t.n)}
    terms = list(range(t.n))
    family = [ContractedTopology(t, frozenset())]
    if t.n_internal == 0:
        return family
    for size in range(1, t.n + 1):
        for subset in combinations(terms, size):
            ends = [stars[x] for x in subset]
            if len(set(ends)) == len(ends):
                family.append(ContractedTopology(t, frozenset(subset)))
    return family


def expand_to_full(n: int, edges) -> FullTopology:
    """The unique full topology whose family contains the given abstract tree.

    The input tree has terminals 0..n-1 of degree 1 or 2 (degree 3 is the
    degenerate case and is rejected) and internal vertices of degree 3 under
    any labels >= n.  Every degree-2 terminal is split off onto a new
    internal vertex.
    """
    edges = [(min(a, b), max(a, b)) for a, b in edges]
    verts = sorted({v for e in edges for v in e})
    if verts and verts[0] < 0:
        raise ValueError("negative vertex id")
    n_vertices = (max(verts) + 1) if verts else 0
    if not _is_tree(edges, n_vertices) or n_vertices < n:
        raise ValueError("input is not a tree on the stated terminals")
    deg = _degrees(edges, n_vertices)
    for t in range(n):
        if deg[t] == 0:
            raise ValueError(f"terminal {t} is missing from the tree")
        if deg[t] >= 3:
            raise ValueError(f"terminal {t} has degree {deg[t]}: degenerate topology")
    for v in range(n, n_vertices):
        if deg[v] not in (0, 3):
            raise ValueError(f"internal vertex {v} has degree {deg[v]}, expected 3")

    next_id = n_vertices
    edges = list(edges)
    changed = True
    while changed:
        changed = False
        deg_map: dict[int, list[int]] = {}
        for a, b in edges:
            deg_map.setdefault(a, []).append(b)
            deg_map.setdefault(b, []).append(a)
        for t in range(n):
            nbrs = deg_map.get(t, [])
            if len(nbrs) == 2:
                w = next_id
                next_id += 1
                y, z = nbrs
                edges = [e for e in edges if e not in ((min(t, y), max(t, y)), (min(t, z), max(t, z)))]
                edges += [(t, w), (min(y, w), max(y, w)), (min(z, w), max(z, w))]
                changed = True
                break

    internal = sorted({v for e in edges for v in e if v >= n})
    relabel = {s: n + i for i, s in enumerate(internal)}
    final = tuple(
        (a if a < n else relabel[a], b if b < n else relabel[b]) for a, b in edges
    )
    return FullTopology(n, final)
