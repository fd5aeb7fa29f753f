"""Mixing-time functionals: spectra, t_mix, t_sep, hitting and cover times.

Logarithms are natural throughout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from scipy.sparse.csgraph import breadth_first_order

from ._errors import ConvergenceError, SizeCapError, UnsupportedError
from .chain_core import FiniteChain, distance_curve, evolve_deviations, _sep_rows, _tv_rows
from .graph_builders import Graph, lazy_srw
from .reporting import Table

EIG_TOL = 1e-10
DENSE_EIG_LIMIT = 4000
LANCZOS_NCV = 40
BOTTOM_TOL = 1e-8
EXACT_COVER_LIMIT = 14
DEFAULT_T_CAP = 10 ** 6


@dataclass(frozen=True)
class SpectralSummary:
    """Eigenvalues of a reversible chain in decreasing order.

    ``complete`` is False when only the extreme eigenvalues of a large sparse
    chain were computed.
    """

    eigenvalues: np.ndarray
    lambda2: float
    lambda_star: float
    complete: bool = True

    @property
    def t_rel(self) -> float:
        gap = 1.0 - self.lambda2
        return np.inf if gap <= 0 else 1.0 / gap

    @property
    def spectral_gap(self) -> float:
        return 1.0 - self.lambda2


def _symmetrized(chain: FiniteChain):
    r = np.sqrt(chain.pi)
    if chain.is_sparse:
        S = scipy.sparse.diags_array(r) @ chain.P @ scipy.sparse.diags_array(1.0 / r)
        return (S + S.T) * 0.5
    S = r[:, None] * chain.P / r[None, :]
    return (S + S.T) * 0.5


def spectrum(chain: FiniteChain) -> SpectralSummary:
    """Spectrum of ``D^{1/2} P D^{-1/2}`` with ``D = diag(pi)``.

    Dense symmetric solver up to a few thousand states, Lanczos (extreme
    eigenvalues only) above that.
    """
    if not chain.reversible:
        raise UnsupportedError("spectra are only computed for reversible chains")
    if np.any(chain.pi <= 0):
        raise UnsupportedError("stationary law must be strictly positive")
    n = chain.n_states
    if n == 1:
        return SpectralSummary(np.array([1.0]), -np.inf, 0.0)
    S = _symmetrized(chain)
    if n <= DENSE_EIG_LIMIT:
        dense = S.toarray() if scipy.sparse.issparse(S) else S
        ev = scipy.linalg.eigh(dense, eigvals_only=True)[::-1]
        return SpectralSummary(ev, float(ev[1]), float(max(abs(ev[1]), abs(ev[-1]))))
    # a wide Krylov basis copes with the repeated eigenvalues of symmetric chains
    top = np.sort(scipy.sparse.linalg.eigsh(S, k=3, which="LA", return_eigenvectors=False, ncv=LANCZOS_NCV))[::-1]
    # the bottom end only enters lambda_*, and is often a large degenerate cluster
    try:
        bottom = scipy.sparse.linalg.eigsh(S, k=1, which="SA", return_eigenvectors=False,
                                           ncv=LANCZOS_NCV, tol=BOTTOM_TOL)
    except scipy.sparse.linalg.ArpackNoConvergence as err:
        raise ConvergenceError(f"smallest eigenvalue did not converge: {err}") from err
    ev = np.concatenate([top, bottom])
    return SpectralSummary(ev, float(ev[1]), float(max(abs(ev[1]), abs(ev[-1]))), complete=False)


def relaxation_time(chain: FiniteChain) -> float:
    return spectrum(chain).t_rel


def lamplighter_lambda2(g: Graph) -> float:
    """Second eigenvalue of the ``Z_2 wr G`` walk without building it.

    On functions ``chi_A(f) u(x)`` with ``chi_A`` the parity of the lamps in
    ``A`` the wreath walk acts as the base lazy walk killed on ``A``, so the
    spectrum is the union over ``A`` of the spectra of ``P`` restricted to
    ``G \\ A`` (padded with zeros).  The Perron root is monotone in the
    retained set, so only ``A = {}`` and singletons matter for ``lambda_2``.
    """
    P = lazy_srw(g).dense()
    pi = lazy_srw(g).pi
    r = np.sqrt(pi)
    S = r[:, None] * P / r[None, :]
    ev = np.sort(scipy.linalg.eigvalsh((S + S.T) / 2))[::-1]
    best = ev[1]
    n = g.n_vertices
    for v in range(n):
        keep = np.delete(np.arange(n), v)
        sub = S[np.ix_(keep, keep)]
        best = max(best, scipy.linalg.eigvalsh((sub + sub.T) / 2).max())
    return float(best)


def lamplighter_relaxation_time(g: Graph) -> float:
    return 1.0 / (1.0 - lamplighter_lambda2(g))


def _scan(chain: FiniteChain, eps: float, t_cap: int, rows_metric, starts=None) -> int:
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    for t, D in enumerate(evolve_deviations(chain, starts)):
        if rows_metric(D).max() <= eps:
            return t
        if t >= t_cap:
            raise ConvergenceError(f"distance still above {eps} after {t_cap} steps")
    raise AssertionError("unreachable")


def t_mix(chain: FiniteChain, eps: float = 0.25, t_cap: int = DEFAULT_T_CAP, starts=None) -> int:
    """Smallest ``t >= 0`` with ``d(t) <= eps`` (forward scan from ``t = 0``)."""
    return _scan(chain, eps, t_cap, _tv_rows, starts)


def t_sep(chain: FiniteChain, eps: float = 0.25, t_cap: int = DEFAULT_T_CAP, starts=None) -> int:
    """Smallest ``t >= 0`` with ``s(t) <= eps``."""
    if np.any(chain.pi <= 0):
        raise ValueError("separation needs a strictly positive stationary law")
    return _scan(chain, eps, t_cap, lambda D: _sep_rows(D, chain.pi), starts)


@dataclass(frozen=True)
class HittingTable:
    """``table[x, y] = E_x[tau_y]``."""

    table: np.ndarray

    @property
    def t_hit(self) -> float:
        return float(self.table.max())


def _support_graph(chain: FiniteChain):
    return scipy.sparse.csr_array(chain.P) if chain.is_sparse else scipy.sparse.csr_array(chain.P > 0)


def expected_hitting_time(chain: FiniteChain, targets) -> np.ndarray:
    """``E_x[tau_A]`` for every ``x`` by solving ``(I - P) h = 1`` off ``A``."""
    targets = np.atleast_1d(np.asarray(targets, dtype=int))
    n = chain.n_states
    in_a = np.zeros(n, dtype=bool)
    in_a[targets] = True
    reach = np.zeros(n, dtype=bool)
    rev = _support_graph(chain).T.tocsr()
    for a in targets:
        reach[breadth_first_order(rev, a, directed=True, return_predecessors=False)] = True
    if not reach.all():
        raise ValueError("some states cannot reach the target set (singular system)")
    rest = np.flatnonzero(~in_a)
    h = np.zeros(n)
    if rest.size:
        P = chain.dense()
        A = np.eye(rest.size) - P[np.ix_(rest, rest)]
        h[rest] = scipy.linalg.lu_solve(scipy.linalg.lu_factor(A), np.ones(rest.size))
    return h


def hitting_times(chain: FiniteChain) -> HittingTable:
    n = chain.n_states
    table = np.empty((n, n))
    for y in range(n):
        table[:, y] = expected_hitting_time(chain, [y])
    return HittingTable(table)


def _full_mask(n: int) -> int:
    return (1 << n) - 1


def cover_time_exact(chain: FiniteChain) -> np.ndarray:
    """``E_x[tau_cov]`` for every start, solved on (position, visited set).

    Visited sets only grow, so the system is solved one set at a time in
    decreasing order of size, each block an ``|V| x |V|`` dense solve.
    """
    n = chain.n_states
    if n > EXACT_COVER_LIMIT:
        raise SizeCapError(f"exact cover time limited to {EXACT_COVER_LIMIT} states, got {n}")
    P = chain.dense()
    full = _full_mask(n)
    H = np.zeros((full + 1, n))
    masks = sorted(range(1, full), key=lambda m: -bin(m).count("1"))
    for V in masks:
        inside = [v for v in range(n) if V >> v & 1]
        outside = [v for v in range(n) if not V >> v & 1]
        rhs = np.ones(len(inside))
        for y in outside:
            rhs += P[inside, y] * H[V | 1 << y, y]
        A = np.eye(len(inside)) - P[np.ix_(inside, inside)]
        H[V, inside] = np.linalg.solve(A, rhs)
    return np.array([H[1 << x, x] for x in range(n)]) if n > 1 else np.zeros(1)


def cover_time_tail(chain: FiniteChain, x0: int, t_max: int) -> np.ndarray:
    """``P_{x0}[tau_cov > t]`` for ``t = 0..t_max`` by evolving the law on
    (position, visited set)."""
    n = chain.n_states
    if n > EXACT_COVER_LIMIT:
        raise SizeCapError(f"exact cover tail limited to {EXACT_COVER_LIMIT} states, got {n}")
    P = chain.dense()
    full = _full_mask(n)
    masks = np.arange(full + 1)
    dist = np.zeros((full + 1, n))
    dist[1 << x0, x0] = 1.0
    tail = np.empty(t_max + 1)
    for t in range(t_max + 1):
        tail[t] = 1.0 - dist[full].sum()
        if t == t_max:
            break
        new = np.zeros_like(dist)
        for y in range(n):
            new[:, y] += np.bincount(masks | 1 << y, weights=dist @ P[:, y], minlength=full + 1)
        dist = new
    return np.clip(tail, 0.0, 1.0)


def cover_time_samples(chain: FiniteChain, start: int, samples: int, seed: int,
                       t_cap: int = 10 ** 7) -> np.ndarray:
    """Seeded i.i.d. cover times from ``start``."""
    n = chain.n_states
    if n > 62:
        raise SizeCapError("Monte Carlo cover time uses 64-bit visit masks (n <= 62)")
    rng = np.random.default_rng(seed)
    cum = np.cumsum(chain.dense(), axis=1)
    cum[:, -1] = 1.0
    full = _full_mask(n)
    pos = np.full(samples, start, dtype=np.int64)
    seen = np.full(samples, 1 << start, dtype=np.int64)
    out = np.zeros(samples, dtype=np.int64)
    alive = np.flatnonzero(seen != full)
    t = 0
    while alive.size:
        t += 1
        if t > t_cap:
            raise ConvergenceError("cover time simulation hit the step cap")
        u = rng.random(alive.size)
        nxt = (cum[pos[alive]] < u[:, None]).sum(axis=1)
        pos[alive] = nxt
        seen[alive] |= np.left_shift(1, nxt)
        done = seen[alive] == full
        out[alive[done]] = t
        alive = alive[~done]
    return out


def cover_time(chain: FiniteChain, method: str = "exact", samples: int = 10_000,
               seed: int = 0) -> tuple[float, float]:
    """``t_cov = max_x E_x[tau_cov]`` and its standard error (0 when exact)."""
    if method == "exact":
        return float(cover_time_exact(chain).max()), 0.0
    if method != "monte_carlo":
        raise ValueError(f"unknown method {method!r}")
    best = (-np.inf, 0.0)
    for i, x in enumerate(chain.default_starts()):
        s = cover_time_samples(chain, int(x), samples, seed + i)
        est = (float(s.mean()), float(s.std(ddof=1) / np.sqrt(samples)))
        best = max(best, est)
    return best


def spectral_inequality_report(chain: FiniteChain, t_max: int, tol: float = EIG_TOL) -> Table:
    """Check ``d_x <= s_x <= lambda_*^t / pi_min`` and ``lambda_2^t <= 2 d(t)``
    for ``t = 1..t_max`` and track ``d(t)^(1/t)`` against ``lambda_*``."""
    spec = spectrum(chain)
    pi_min = float(chain.pi.min())
    lam_star = spec.lambda_star
    rows = []
    for t, D in enumerate(evolve_deviations(chain)):
        if t == 0:
            continue
        d_x = _tv_rows(D)
        s_x = _sep_rows(D, chain.pi)
        d, s = float(d_x.max()), float(s_x.max())
        upper = lam_star ** t / pi_min
        lower = abs(spec.lambda2) ** t
        ok = bool(np.all(d_x <= s_x + tol) and s <= upper + tol and lower <= 2 * d + tol)
        root = d ** (1.0 / t) if d > 0 else 0.0
        rows.append({"t": t, "d": d, "s": s, "lambda_star_pow_over_pi_min": upper,
                     "abs_lambda2_pow": lower, "d_root": root, "gap_to_lambda_star": abs(root - lam_star),
                     "ok": ok})
        if t == t_max:
            break
    return Table.from_rows(rows)


@dataclass(frozen=True)
class ShortRangeViolation:
    x: int
    t: int
    lhs: float
    rhs: float


def short_range_check(chain: FiniteChain, max_degree: int, t_max: int,
                      tol: float = 1e-12) -> list[ShortRangeViolation]:
    """``|P^t(x, x) - pi(x)| <= sqrt(2) Delta^{5/2} / sqrt(t)`` for ``t = 1..t_max``."""
    out = []
    idx = np.arange(chain.n_states)
    for t, D in enumerate(evolve_deviations(chain, idx)):
        if t == 0:
            continue
        rhs = np.sqrt(2.0) * max_degree ** 2.5 / np.sqrt(t)
        lhs = np.abs(D[idx, idx])
        for x in np.flatnonzero(lhs > rhs + tol):
            out.append(ShortRangeViolation(int(x), t, float(lhs[x]), float(rhs)))
        if t == t_max:
            break
    return out


def mixing_curve_table(chain: FiniteChain, t_max: int) -> Table:
    curve = distance_curve(chain, t_max)
    return Table({"t": list(curve.t), "d": list(curve.d), "s": list(curve.s)})
