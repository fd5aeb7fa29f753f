"""Graph families and the chains built on them.

Vertex labelling conventions
----------------------------
* ``cycle(n)``: vertex ``i`` is ``i mod n``.
* ``torus(n, d)``: coordinates ``(c_0, ..., c_{d-1})`` in lexicographic order,
  index ``sum_i c_i n^(d-1-i)`` (``numpy.ravel_multi_index``).
* ``hypercube(d)``: vertex ``v`` has coordinate ``i`` equal to bit ``i`` of ``v``.
* ``dary_tree_ball(d, radius)``: breadth-first order from the root; the root
  has ``d`` children, every other vertex ``d - 1``.
* Wreath products encode ``(lamps, marker)`` as
  ``sum_v lamps[v] * h^v + marker * h^|G|`` (little-endian lamps in base
  ``h = |H|``, marker as the most significant digit).
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import product
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse
from scipy.sparse.csgraph import connected_components, shortest_path

from ._errors import ConstructionError, SizeCapError
from .chain_core import FiniteChain

DEFAULT_STATE_CAP = 2 ** 20


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph stored as sorted neighbour tuples."""

    adjacency: tuple[tuple[int, ...], ...]
    labels: tuple | None = None
    vertex_transitive: bool = False
    name: str = ""

    def __post_init__(self):
        n = len(self.adjacency)
        for u, nbrs in enumerate(self.adjacency):
            for v in nbrs:
                if not 0 <= v < n or v == u:
                    raise ConstructionError(f"bad edge {u}-{v}")
                if u not in self.adjacency[v]:
                    raise ConstructionError(f"edge {u}-{v} is not symmetric")

    @property
    def n_vertices(self) -> int:
        return len(self.adjacency)

    @property
    def degree(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency])

    @property
    def max_degree(self) -> int:
        return int(self.degree.max())

    def is_regular(self) -> bool:
        deg = self.degree
        return bool(np.all(deg == deg[0]))

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u, nbrs in enumerate(self.adjacency) for v in nbrs if u < v]

    def adjacency_matrix(self) -> scipy.sparse.csr_array:
        e = np.array(self.edges(), dtype=int).reshape(-1, 2)
        n = self.n_vertices
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        return scipy.sparse.csr_array((np.ones(rows.size), (rows, cols)), shape=(n, n))

    def is_connected(self) -> bool:
        if self.n_vertices == 0:
            return False
        return connected_components(self.adjacency_matrix(), directed=False)[0] == 1

    def distances(self) -> np.ndarray:
        """All-pairs graph distance (``inf`` across components)."""
        return shortest_path(self.adjacency_matrix(), unweighted=True, directed=False)

    def diameter(self) -> int:
        return int(self.distances().max())

    def to_edge_list(self) -> str:
        """One ``"u v"`` line per edge, 0-based, ``u < v``."""
        return "".join(f"{u} {v}\n" for u, v in self.edges())

    @classmethod
    def from_edge_list(cls, text: str, n_vertices: int | None = None, name: str = "") -> "Graph":
        pairs = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                u, v = (int(tok) for tok in line.split())
                pairs.append((u, v))
        n = n_vertices if n_vertices is not None else 1 + max((max(p) for p in pairs), default=-1)
        return cls.from_edges(n, pairs, name=name)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], labels=None,
                   vertex_transitive: bool = False, name: str = "") -> "Graph":
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            if u == v:
                raise ConstructionError("self-loops are not allowed")
            nbrs[u].add(v)
            nbrs[v].add(u)
        return cls(tuple(tuple(sorted(s)) for s in nbrs), None if labels is None else tuple(labels),
                   vertex_transitive, name)


def cycle(n: int) -> Graph:
    if n < 3:
        raise ConstructionError("cycle needs n >= 3")
    return Graph.from_edges(n, ((i, (i + 1) % n) for i in range(n)),
                            vertex_transitive=True, name=f"C_{n}")


def torus(n: int, d: int) -> Graph:
    if n < 3 or d < 1:
        raise ConstructionError("torus needs n >= 3 and d >= 1")
    shape = (n,) * d
    coords = list(product(range(n), repeat=d))
    edges = []
    for idx, c in enumerate(coords):
        for i in range(d):
            nb = list(c)
            nb[i] = (nb[i] + 1) % n
            edges.append((idx, int(np.ravel_multi_index(nb, shape))))
    return Graph.from_edges(n ** d, edges, labels=coords, vertex_transitive=True,
                            name=f"Z_{n}^{d}")


def hypercube(d: int) -> Graph:
    if d < 1:
        raise ConstructionError("hypercube needs d >= 1")
    n = 1 << d
    edges = [(v, v ^ (1 << i)) for v in range(n) for i in range(d) if v < v ^ (1 << i)]
    return Graph.from_edges(n, edges, vertex_transitive=True, name=f"H_{d}")


def complete(n: int) -> Graph:
    if n < 2:
        raise ConstructionError("complete graph needs n >= 2")
    return Graph.from_edges(n, ((u, v) for u in range(n) for v in range(u + 1, n)),
                            vertex_transitive=True, name=f"K_{n}")


def dary_tree_ball(d: int, radius: int) -> Graph:
    """Ball of the given radius around the root of the ``d``-regular tree."""
    if d < 2 or radius < 0:
        raise ConstructionError("tree ball needs d >= 2 and radius >= 0")
    edges = []
    depth = [0]
    frontier = [0]
    for r in range(radius):
        nxt = []
        for v in frontier:
            for _ in range(d if r == 0 else d - 1):
                w = len(depth)
                depth.append(r + 1)
                edges.append((v, w))
                nxt.append(w)
        frontier = nxt
    return Graph.from_edges(len(depth), edges, labels=depth, name=f"Pi_{d}(r={radius})")


def cayley_graph(generators: Sequence[Hashable], compose: Callable, identity: Hashable,
                 radius: int | None = None, max_vertices: int = DEFAULT_STATE_CAP) -> Graph:
    """Right Cayley graph ``x ~ x s`` enumerated breadth-first from ``identity``.

    With ``radius=None`` the whole (finite) group is enumerated; otherwise the
    ball of that radius is returned with the edges it contains.  Labels are
    the group elements in discovery order.
    """
    gens = list(dict.fromkeys(generators))
    for s in gens:
        if not any(compose(s, t) == identity for t in gens):
            raise ConstructionError(f"generating set is not symmetric: no inverse for {s!r}")
    if any(s == identity for s in gens):
        raise ConstructionError("identity may not be a generator")
    index = {identity: 0}
    elems = [identity]
    dist = [0]
    edges = []
    queue = deque([identity])
    while queue:
        x = queue.popleft()
        i = index[x]
        for s in gens:
            y = compose(x, s)
            j = index.get(y)
            if j is None:
                if radius is not None and dist[i] >= radius:
                    continue
                if len(elems) >= max_vertices:
                    raise SizeCapError("Cayley graph exceeds the vertex cap")
                j = index[y] = len(elems)
                elems.append(y)
                dist.append(dist[i] + 1)
                queue.append(y)
            if i < j:
                edges.append((i, j))
    return Graph.from_edges(len(elems), edges, labels=elems,
                            vertex_transitive=radius is None, name="Cayley")


def _require_connected(g: Graph) -> None:
    if not g.is_connected():
        raise ConstructionError("graph is not connected")


def lazy_srw(g: Graph) -> FiniteChain:
    """Lazy simple random walk: hold with 1/2, else move to a uniform neighbour."""
    _require_connected(g)
    deg = g.degree.astype(float)
    P = np.zeros((g.n_vertices, g.n_vertices))
    for u, nbrs in enumerate(g.adjacency):
        P[u, list(nbrs)] = 0.5 / deg[u]
        P[u, u] = 0.5
    return FiniteChain.from_matrix(P, pi=deg / deg.sum(), labels=g.labels,
                                   transitive=g.vertex_transitive, meta={"graph": g.name, "lazy": True})


def simple_random_walk(g: Graph) -> FiniteChain:
    """Non-lazy simple random walk (may be periodic)."""
    _require_connected(g)
    deg = g.degree.astype(float)
    P = np.zeros((g.n_vertices, g.n_vertices))
    for u, nbrs in enumerate(g.adjacency):
        P[u, list(nbrs)] = 1.0 / deg[u]
    return FiniteChain.from_matrix(P, pi=deg / deg.sum(), labels=g.labels,
                                   transitive=g.vertex_transitive, meta={"graph": g.name, "lazy": False})


def refresh_chain(h: int = 2) -> FiniteChain:
    """Lamp chain that resamples a uniform value each step (``Z_2`` lamps for ``h=2``)."""
    return FiniteChain.from_matrix(np.full((h, h), 1.0 / h), pi=np.full(h, 1.0 / h), transitive=True)


def encode_lamp_state(lamps: Sequence[int], marker: int, h: int = 2) -> int:
    code = 0
    for v in reversed(range(len(lamps))):
        code = code * h + int(lamps[v])
    return code + marker * h ** len(lamps)


def decode_lamp_state(state: int, n_vertices: int, h: int = 2) -> tuple[tuple[int, ...], int]:
    marker, code = divmod(int(state), h ** n_vertices)
    lamps = []
    for _ in range(n_vertices):
        code, r = divmod(code, h)
        lamps.append(r)
    return tuple(lamps), marker


def generalized_lamplighter_chain(g: Graph, lamp: FiniteChain,
                                  cap: int = DEFAULT_STATE_CAP) -> FiniteChain:
    """Walk on ``H wr G``: refresh the departure machine with the lamp chain,
    move by the lazy walk on ``G``, refresh the arrival machine.

    When the move holds in place the machine at the marker is refreshed twice.
    """
    if not lamp.reversible:
        raise ConstructionError("lamp chain must be reversible")
    base = lazy_srw(g)
    n = g.n_vertices
    h = lamp.n_states
    n_configs = h ** n
    if n_configs * n > cap:
        raise SizeCapError(f"|H|^|G| * |G| = {n_configs * n} exceeds cap {cap}")
    Q = lamp.dense()
    Pg = base.dense()
    codes = np.arange(n_configs)
    powers = h ** np.arange(n)
    rows, cols, vals = [], [], []
    for x in range(n):
        digit_x = (codes // powers[x]) % h
        for y in np.flatnonzero(Pg[x]):
            digit_y = (codes // powers[y]) % h
            for a in range(h):
                p_a = Q[digit_x, a]
                after_x = codes + (a - digit_x) * powers[x]
                cur_y = a if y == x else digit_y
                for b in range(h):
                    p = Pg[x, y] * p_a * Q[cur_y, b]
                    keep = p > 0
                    if not keep.any():
                        continue
                    target = after_x + (b - cur_y) * powers[y]
                    rows.append(codes[keep] + x * n_configs)
                    cols.append(target[keep] + y * n_configs)
                    vals.append(p[keep])
    size = n_configs * n
    P = scipy.sparse.csr_array((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                               shape=(size, size))
    lamp_pi = np.ones(n_configs)
    for v in range(n):
        lamp_pi *= lamp.pi[(codes // powers[v]) % h]
    pi = np.concatenate([base.pi[x] * lamp_pi for x in range(n)])
    chain = FiniteChain.from_matrix(P, pi=pi, transitive=g.vertex_transitive and lamp.transitive,
                                    meta={"graph": g.name, "lamp_states": h, "base_vertices": n})
    if not chain.reversible:
        raise ConstructionError("wreath chain failed the detailed-balance check")
    return chain


def lamplighter_chain(g: Graph, cap: int = DEFAULT_STATE_CAP) -> FiniteChain:
    """``Z_2 wr G`` walk: randomize the lamp at the marker, move lazily, randomize again."""
    return generalized_lamplighter_chain(g, refresh_chain(2), cap=cap)
