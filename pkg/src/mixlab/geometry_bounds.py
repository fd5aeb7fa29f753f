"""Dirichlet forms and diameter-type bounds for walks on transitive graphs.

Inner products here are unweighted sums over states.  Transitive graphs
have uniform stationary law, so this differs from the ``pi``-weighted
product only by the factor ``|V|``, which cancels in every ratio below.

Infinite lattices are handled on padded finite boxes: a box of side ``k``
evolved for ``h`` steps is embedded with ``h`` cells of padding on every
side, so no mass reaches the truncation and no wraparound occurs.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import floor, log, log2, sqrt

import numpy as np
from scipy.stats import binom

from ._errors import HorizonError, UnsupportedError
from .chain_core import FiniteChain, deviations_at
from .graph_builders import Graph, lazy_srw
from .reporting import Table
from .spectral_metrics import spectrum, t_mix

DEFAULT_HORIZON = 2 ** 12


def _powers_applied(chain: FiniteChain, f: np.ndarray, n: int) -> np.ndarray:
    g = np.asarray(f, dtype=float)
    for _ in range(n):
        g = np.asarray(chain.apply(g))
    return g


def dirichlet_form(chain: FiniteChain, f, n: int) -> float:
    """``Q_n(f) = <(I - P^n) f, f>`` in the counting inner product."""
    if n < 0:
        raise ValueError("n must be >= 0")
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError("f must be finite")
    return float(np.dot(f - _powers_applied(chain, f, n), f))


def dirichlet_forms(chain: FiniteChain, f, n_max: int) -> np.ndarray:
    """``Q_0 .. Q_{n_max}`` with one matrix-vector product per step."""
    f = np.asarray(f, dtype=float)
    out = np.empty(n_max + 1)
    g = f.copy()
    ff = float(f @ f)
    for n in range(n_max + 1):
        out[n] = ff - float(g @ f)
        g = np.asarray(chain.apply(g))
    return out


def second_eigenfunction(chain: FiniteChain) -> tuple[float, np.ndarray]:
    """``(lambda_2, f)`` with ``P f = lambda_2 f`` and ``||f||_2 = 1`` (uniform ``pi`` only)."""
    if not np.allclose(chain.pi, chain.pi[0]):
        raise UnsupportedError("counting inner product requires uniform stationary law")
    w, V = np.linalg.eigh(0.5 * (chain.dense() + chain.dense().T))
    f = V[:, -2]
    return float(w[-2]), f / np.linalg.norm(f)


@dataclass(frozen=True)
class DirichletReport:
    table: Table
    lambda2: float
    t_rel: float
    degree: int

    @property
    def ok(self) -> bool:
        return bool(np.all(self.table.column("ok")))


def distance_moment_check(chain: FiniteChain, graph: Graph, n_grid=None, root: int = 0,
                          tol: float = 1e-12) -> DirichletReport:
    """Exact ``E[rho(X_0, X_n)^2]`` against ``n/(2d)`` and ``(1/d) Q_n/Q_1``.

    ``d`` is the graph degree.  ``n_grid`` defaults to ``1..floor(t_rel)``;
    the ``n/(2d)`` bound is only asserted for ``n <= t_rel``.
    """
    if not graph.vertex_transitive:
        raise UnsupportedError("distance-moment bound needs a vertex-transitive graph")
    d = int(graph.max_degree)
    lam, f = second_eigenfunction(chain)
    t_rel = 1.0 / (1.0 - lam)
    grid = sorted(set(int(n) for n in (n_grid if n_grid is not None else range(1, int(floor(t_rel)) + 1))))
    rho2 = graph.distances()[root].astype(float) ** 2
    Q = dirichlet_forms(chain, f, max(grid))
    rows = []
    for n in grid:
        law = deviations_at(chain, n, [root])[0] + chain.pi
        m2 = float(law @ rho2)
        lemma = Q[n] / Q[1] / d
        thm = n / (2 * d)
        ok = m2 >= lemma - tol and (n > t_rel or m2 >= thm - tol)
        rows.append({"n": n, "E_rho2": m2, "lemma_bound": lemma, "theorem_bound": thm,
                     "Q_n": float(Q[n]), "ratio": float(Q[n] / Q[1]), "in_range": n <= t_rel, "ok": bool(ok)})
    return DirichletReport(Table.from_rows(rows), lam, t_rel, d)


@dataclass(frozen=True)
class DiameterBound:
    t_rel: float
    t_mix: int
    bound: float
    mix_bound: float

    @property
    def margin(self) -> float:
        return self.bound - self.t_rel

    @property
    def ok(self) -> bool:
        return self.t_rel <= self.bound and self.t_mix <= self.mix_bound

    def __iter__(self):
        return iter((self.t_rel, self.bound, self.margin))


def corollary_trel_diam(graph: Graph, chain: FiniteChain | None = None) -> DiameterBound:
    """Lazy-walk ``t_rel`` and ``t_mix`` against ``2 d diam^2`` and ``2 d diam^2 log|G|``."""
    if not graph.vertex_transitive:
        raise UnsupportedError("bound stated for transitive graphs")
    chain = chain or lazy_srw(graph)
    d = int(graph.max_degree)
    bound = 2.0 * d * graph.diameter() ** 2
    return DiameterBound(spectrum(chain).t_rel, t_mix(chain), bound, bound * log(graph.n_vertices))


def second_difference_check(chain: FiniteChain, f, j_max: int = 20, tol: float = 1e-12) -> Table:
    """``|Delta_j - Delta_{j-1}| <= ||(I - P) f||^2`` for ``1 <= j <= j_max``."""
    Q = dirichlet_forms(chain, f, j_max + 1)
    delta = np.diff(Q)
    f = np.asarray(f, dtype=float)
    g = f - np.asarray(chain.apply(f))
    bound = float(g @ g)
    rows = [{"j": j, "second_difference": float(abs(delta[j] - delta[j - 1])), "bound": bound,
             "ok": bool(abs(delta[j] - delta[j - 1]) <= bound + tol)} for j in range(1, j_max + 1)]
    return Table.from_rows(rows)


# lattice boxes

def line_autocorrelations(k: int, horizon: int, lazy: bool = False) -> np.ndarray:
    """``c_m = <P^m g, g>`` on ``Z`` for ``g = 1_[0,k) / sqrt(k)``, ``m = 0..horizon``."""
    size = k + 2 * horizon + 2
    g = np.zeros(size)
    g[horizon + 1:horizon + 1 + k] = 1.0 / sqrt(k)
    cur = g.copy()
    out = np.empty(horizon + 1)
    for m in range(horizon + 1):
        out[m] = cur @ g
        nxt = np.zeros_like(cur)
        nxt[1:] += 0.5 * cur[:-1]
        nxt[:-1] += 0.5 * cur[1:]
        cur = 0.5 * (cur + nxt) if lazy else nxt
    return out


def box_autocorrelations(k: int, d: int, horizon: int, lazy: bool = False) -> np.ndarray:
    """``c_j = <P^j f, f>`` for SRW on ``Z^d`` and ``f`` the normalized box indicator.

    The walk picks a coordinate uniformly, so ``P`` is the mean of commuting
    line operators and ``c_j`` splits as a binomial sum over how many steps
    land in the first coordinate.
    """
    c1 = line_autocorrelations(k, horizon)
    c = c1.copy()
    for dim in range(2, d + 1):
        p = 1.0 / dim
        nxt = np.empty(horizon + 1)
        for j in range(horizon + 1):
            a = np.arange(j + 1)
            nxt[j] = float(np.dot(binom.pmf(a, j, p), c1[a] * c[j - a]))
        c = nxt
    if lazy:
        c = np.array([float(np.dot(binom.pmf(np.arange(j + 1), j, 0.5), c[:j + 1])) for j in range(horizon + 1)])
    return c


def box_boundary_ratio(k: int, d: int) -> float:
    """``|edge boundary| / |A|`` for the box of side ``k`` in ``Z^d``: ``2d/k``."""
    return 2.0 * d * k ** (d - 1) / k ** d


@dataclass(frozen=True)
class FolnerResult:
    k: int
    d: int
    theta: float
    delta_k: float
    ell: int
    m: int
    ratio: float
    bound: float
    energy: float
    form: float
    autocorrelations: np.ndarray

    @property
    def ok(self) -> bool:
        return self.ratio <= self.bound and self.theta ** 2 <= self.delta_k

    def __iter__(self):
        return iter((self.theta, self.ratio))


def folner_ratio(k: int, d: int = 2, horizon: int = DEFAULT_HORIZON, lazy: bool = False) -> FolnerResult:
    """Build ``phi = sum_{i < 2^m} P^i f`` from the box ``f`` and return its energy ratio.

    ``theta = ||P f - f||``; ``ell`` is fixed by ``2^ell theta <= 1/2 <=
    2^(ell+1) theta`` and ``m >= ell`` is the first index with
    ``2 a_m - a_{m+1} >= 1/(8 theta)`` where ``a_m = <phi_{2^m}, f>``.  The
    returned ratio ``||(I-P) phi||^2 / <phi, (I-P) phi>`` should not exceed
    ``32 theta``.
    """
    if k < 1:
        raise ValueError("box side must be >= 1")
    c = box_autocorrelations(k, d, horizon, lazy)
    theta = sqrt(max(1.0 - 2.0 * c[1] + c[2], 0.0))
    if not 0 < theta < 0.5:
        raise ValueError(f"theta={theta} outside (0, 1/2); enlarge the box")
    ell = int(floor(log2(0.5 / theta)))
    partial = np.concatenate([[0.0], np.cumsum(c)])  # partial[K] = sum_{i<K} c_i
    m = ell
    while True:
        if 2 ** (m + 1) > horizon:
            raise HorizonError(f"no admissible m <= {m - 1} within horizon {horizon} (theta={theta:.4g})")
        a_m, a_next = partial[2 ** m], partial[2 ** (m + 1)]
        if 2 * a_m - a_next >= 1.0 / (8 * theta):
            break
        m += 1
    K = 2 ** m
    energy = 1.0 - 2.0 * c[K] + c[2 * K]
    form = 2 * a_m - a_next
    return FolnerResult(k, d, theta, box_boundary_ratio(k, d), ell, m, energy / form, 32 * theta,
                        energy, form, c)


def distance_bound_check(folner: FolnerResult, n_max: int = 10, tol: float = 1e-12) -> Table:
    """``E[rho^2] >= n/d - (n^2/2d) ||(I-P) phi||^2 / Q_1(phi)`` on ``Z^d``.

    For the non-lazy walk ``E[rho(X_0, X_n)^2]`` is computed exactly from the
    lattice law (``rho`` is the ``l1`` distance).
    """
    from .group_walks import exact_distribution, zd_model

    d = folner.d
    model = zd_model(d)
    r = folner.ratio
    rows = []
    for n in range(1, n_max + 1):
        m2 = exact_distribution(model, n).moment(2)
        rhs = n / d - n * n / (2 * d) * r
        rows.append({"n": n, "E_rho2": m2, "bound": rhs, "ok": bool(m2 >= rhs - tol)})
    return Table.from_rows(rows)
