"""Probability vectors, couplings and finite Markov chains.

Distances to stationarity are computed by pushing the deviation rows
``P^t(x, .) - pi`` forward one matrix-vector product at a time.  After every
step the component along ``pi`` is projected out again; the exact deviation
always sums to zero, so this only removes rounding error and keeps the
relative accuracy of tiny distances (``d(t) ~ 1e-60`` is still meaningful).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Iterator, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from scipy.spatial.distance import pdist

from ._errors import ConstructionError, DimensionError

PROB_TOL = 1e-12
POWER_TOL = 1e-10


def as_distribution(weights, tol: float = PROB_TOL) -> np.ndarray:
    """Validate ``weights`` as a probability vector and return a float copy."""
    w = np.array(weights, dtype=float).ravel()
    if w.size == 0:
        raise ValueError("empty distribution")
    if np.any(w < -tol) or not np.all(np.isfinite(w)):
        raise ValueError("distribution has negative or non-finite weights")
    if abs(w.sum() - 1.0) > tol:
        raise ValueError(f"distribution sums to {w.sum()!r}, not 1")
    w[w < 0] = 0.0
    w.setflags(write=False)
    return w


def _pair(mu, nu) -> tuple[np.ndarray, np.ndarray]:
    mu = as_distribution(mu)
    nu = as_distribution(nu)
    if mu.shape != nu.shape:
        raise DimensionError(f"index sets differ: {mu.size} vs {nu.size} states")
    return mu, nu


def tv_distance(mu, nu) -> float:
    """Total variation distance ``0.5 * sum |mu(x) - nu(x)|``."""
    mu, nu = _pair(mu, nu)
    return 0.5 * float(np.abs(mu - nu).sum())


def tv_positive_part(mu, nu) -> float:
    """TV distance as the mass excess of ``mu`` over ``nu`` where it is positive."""
    mu, nu = _pair(mu, nu)
    diff = mu - nu
    return float(diff[diff > 0].sum())


def tv_max_over_sets(mu, nu) -> tuple[float, np.ndarray]:
    """TV distance as ``max_A |mu(A) - nu(A)|``.

    The maximum is attained at ``B = {x : mu(x) >= nu(x)}`` or its complement;
    both candidates are evaluated and the maximizing set is returned as a
    boolean mask.
    """
    mu, nu = _pair(mu, nu)
    B = mu >= nu
    on_b = abs(mu[B].sum() - nu[B].sum())
    off_b = abs(mu[~B].sum() - nu[~B].sum())
    if on_b >= off_b:
        return float(on_b), B
    return float(off_b), ~B


@dataclass(frozen=True)
class Coupling:
    """Joint law ``q`` on ``S x S`` with row marginal ``mu`` and column marginal ``nu``."""

    q: np.ndarray

    @property
    def row_marginal(self) -> np.ndarray:
        return self.q.sum(axis=1)

    @property
    def col_marginal(self) -> np.ndarray:
        return self.q.sum(axis=0)

    @property
    def mismatch_probability(self) -> float:
        """``P[X != Y]`` under the coupling."""
        return float(1.0 - np.trace(self.q))

    def check(self, mu, nu, tol: float = PROB_TOL) -> None:
        """Raise ``ValueError`` unless ``q`` is a valid coupling of ``mu`` and ``nu``."""
        mu, nu = _pair(mu, nu)
        if self.q.shape != (mu.size, mu.size):
            raise DimensionError("coupling shape does not match the marginals")
        if np.any(self.q < -tol):
            raise ValueError("coupling has negative entries")
        if np.max(np.abs(self.row_marginal - mu)) > tol:
            raise ValueError("row marginal differs from mu")
        if np.max(np.abs(self.col_marginal - nu)) > tol:
            raise ValueError("column marginal differs from nu")


def optimal_coupling(mu, nu) -> Coupling:
    """Coupling that attains ``P[X != Y] = ||mu - nu||_TV``.

    The diagonal carries ``min(mu(x), nu(x))``.  The leftover mass of ``mu``
    (on ``mu > nu``) and of ``nu`` (on ``nu > mu``) is joined as an
    independent product, normalized by ``1 - sum_z q(z, z)``; when ``mu == nu``
    that normalizer is zero and the off-diagonal block is empty.
    """
    mu, nu = _pair(mu, nu)
    diag = np.minimum(mu, nu)
    q = np.diag(diag)
    excess = np.clip(mu - nu, 0.0, None)
    deficit = np.clip(nu - mu, 0.0, None)
    rest = 1.0 - diag.sum()
    if rest > 0 and excess.any():
        q += np.outer(excess, deficit) / rest
    return Coupling(q)


def stationary_distribution(P) -> np.ndarray:
    """Solve ``pi (P - I) = 0`` with ``sum(pi) = 1`` by LU with partial pivoting.

    The normalization replaces the last equation of the singular system.
    """
    n = P.shape[0]
    if scipy.sparse.issparse(P):
        A = (scipy.sparse.csr_array(P).T - scipy.sparse.eye_array(n)).tolil()
        A[n - 1, :] = np.ones(n)
        b = np.zeros(n)
        b[-1] = 1.0
        pi = scipy.sparse.linalg.splu(A.tocsc()).solve(b)
    else:
        A = np.asarray(P, dtype=float).T - np.eye(n)
        A[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        pi = scipy.linalg.lu_solve(scipy.linalg.lu_factor(A), b)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def stationary_by_power_iteration(P, tol: float = 1e-13, maxiter: int = 1_000_000) -> np.ndarray:
    """Stationary vector by iterating ``pi <- pi P`` from the uniform vector.

    Used to cross-check :func:`stationary_distribution`; only converges for
    aperiodic chains.
    """
    n = P.shape[0]
    pi = np.full(n, 1.0 / n)
    for _ in range(maxiter):
        nxt = np.asarray(pi @ P).ravel()
        if np.abs(nxt - pi).sum() < tol:
            return nxt / nxt.sum()
        pi = nxt
    raise RuntimeError("power iteration did not converge")


def _detailed_balance_defect(P, pi) -> float:
    if scipy.sparse.issparse(P):
        F = scipy.sparse.diags_array(pi) @ scipy.sparse.csr_array(P)
        D = abs(F - F.T)
        return float(D.max()) if D.nnz else 0.0
    F = pi[:, None] * np.asarray(P)
    return float(np.max(np.abs(F - F.T)))


@dataclass(frozen=True)
class FiniteChain:
    """Row-stochastic transition matrix with its stationary law.

    ``P`` is a dense ``ndarray`` or a scipy sparse array (wreath products).
    ``transitive`` records that the chain looks the same from every start, so
    worst-case distance functionals may be evaluated from state 0 alone.
    """

    P: np.ndarray
    pi: np.ndarray
    reversible: bool
    labels: tuple | None = None
    transitive: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_matrix(cls, P, pi=None, labels: Sequence | None = None,
                    transitive: bool = False, meta: dict | None = None) -> "FiniteChain":
        if scipy.sparse.issparse(P):
            P = scipy.sparse.csr_array(P, dtype=float)
            P.sum_duplicates()
            rows = np.asarray(P.sum(axis=1)).ravel()
            lo = P.data.min() if P.nnz else 0.0
            hi = P.data.max() if P.nnz else 0.0
        else:
            P = np.array(P, dtype=float)
            if P.ndim != 2 or P.shape[0] != P.shape[1]:
                raise DimensionError("transition matrix must be square")
            rows = P.sum(axis=1)
            lo, hi = P.min(), P.max()
            P.setflags(write=False)
        n = P.shape[0]
        if lo < -PROB_TOL or hi > 1 + PROB_TOL:
            raise ConstructionError("transition probabilities outside [0, 1]")
        if np.max(np.abs(rows - 1.0)) > PROB_TOL:
            raise ConstructionError("transition matrix rows do not sum to 1")
        if pi is None:
            pi = stationary_distribution(P)
        pi = np.array(pi, dtype=float).ravel()
        if pi.size != n:
            raise DimensionError("stationary vector has the wrong length")
        if abs(pi.sum() - 1) > PROB_TOL or np.any(pi < -PROB_TOL):
            raise ConstructionError("stationary vector is not a distribution")
        if np.max(np.abs(np.asarray(pi @ P).ravel() - pi)) > POWER_TOL:
            raise ConstructionError("pi P != pi")
        pi.setflags(write=False)
        reversible = _detailed_balance_defect(P, pi) <= POWER_TOL
        if labels is not None:
            labels = tuple(labels)
            if len(labels) != n:
                raise DimensionError("one label per state required")
        return cls(P, pi, reversible, labels, transitive, dict(meta or {}))

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    @property
    def is_sparse(self) -> bool:
        return scipy.sparse.issparse(self.P)

    def dense(self) -> np.ndarray:
        """Dense copy of ``P``."""
        return self.P.toarray() if self.is_sparse else np.array(self.P)

    def step(self, rows: np.ndarray) -> np.ndarray:
        """Right-multiply row vector(s) by ``P``."""
        return np.asarray(rows @ self.P)

    def apply(self, f: np.ndarray) -> np.ndarray:
        """``(P f)(x) = sum_y P(x, y) f(y)``."""
        return np.asarray(self.P @ f)

    def default_starts(self) -> np.ndarray:
        return np.array([0]) if self.transitive else np.arange(self.n_states)


def _check_t(t) -> int:
    if int(t) != t or t < 0:
        raise ValueError(f"step count must be a nonnegative integer, got {t!r}")
    return int(t)


def evolve_deviations(chain: FiniteChain, starts=None) -> Iterator[np.ndarray]:
    """Yield ``D_t[i] = P^t(starts[i], .) - pi`` for ``t = 0, 1, 2, ...``."""
    starts = chain.default_starts() if starts is None else np.atleast_1d(starts)
    pi = chain.pi
    D = -np.tile(pi, (starts.size, 1))
    D[np.arange(starts.size), starts] += 1.0
    while True:
        yield D
        D = chain.step(D)
        D -= D.sum(axis=1, keepdims=True) * pi


def deviations_at(chain: FiniteChain, t: int, starts=None) -> np.ndarray:
    t = _check_t(t)
    for s, D in enumerate(evolve_deviations(chain, starts)):
        if s == t:
            return D
    raise AssertionError("unreachable")


def _tv_rows(D: np.ndarray) -> np.ndarray:
    return 0.5 * np.abs(D).sum(axis=1)


def _sep_rows(D: np.ndarray, pi: np.ndarray) -> np.ndarray:
    return np.max(-D / pi, axis=1)


def dist_from_stationarity(chain: FiniteChain, t: int, starts=None) -> tuple[float, np.ndarray]:
    """``d(t)`` and the vector of ``d_x(t) = ||P^t(x, .) - pi||_TV``.

    ``starts`` restricts the maximum to a subset of initial states (all
    states by default, state 0 only for transitive chains).
    """
    per_state = _tv_rows(deviations_at(chain, t, starts))
    return float(per_state.max()), per_state


def separation_distance(chain: FiniteChain, t: int, starts=None) -> tuple[float, np.ndarray]:
    """``s(t)`` and the vector of ``s_x(t) = max_y (1 - P^t(x, y) / pi(y))``."""
    if np.any(chain.pi <= 0):
        raise ValueError("separation distance needs a strictly positive stationary law")
    per_state = _sep_rows(deviations_at(chain, t, starts), chain.pi)
    return float(per_state.max()), per_state


def dbar(chain: FiniteChain, t: int) -> float:
    """``max_{x,y} ||P^t(x, .) - P^t(y, .)||_TV`` over all ordered pairs."""
    D = deviations_at(chain, t, np.arange(chain.n_states))
    if chain.n_states < 2:
        return 0.0
    return 0.5 * float(pdist(D, metric="cityblock").max())


@dataclass(frozen=True)
class DistanceCurve:
    """``d(t)`` and ``s(t)`` for ``t = 0..t_max`` (worst case over starts)."""

    t: np.ndarray
    d: np.ndarray
    s: np.ndarray


def distance_curve(chain: FiniteChain, t_max: int, starts=None) -> DistanceCurve:
    t_max = _check_t(t_max)
    d = np.empty(t_max + 1)
    s = np.empty(t_max + 1)
    for t, D in enumerate(evolve_deviations(chain, starts)):
        d[t] = _tv_rows(D).max()
        s[t] = _sep_rows(D, chain.pi).max()
        if t == t_max:
            break
    return DistanceCurve(np.arange(t_max + 1), d, s)


def binomial_tv_gap(n: int) -> float:
    """``||Bin(n, 1/2) - Bin(n + 1, 1/2)||_TV = 2^{-n-1} C(n, floor(n/2))``."""
    n = _check_t(n)
    return float(Fraction(comb(n, n // 2), 2 ** (n + 1)))
