"""Long-range transition estimates through Chebyshev functional calculus.

For a reversible ``P`` with spectrum in ``[-1, 1]``,
``P^t = sum_k P(S_t = k) Q_|k|(P)`` where ``S_t`` is simple random walk on
``Z`` and ``Q_k`` are Chebyshev polynomials.  Since ``Q_k(P)`` is supported on
pairs at graph distance at most ``k`` and contracts the ``pi``-norm, this
yields ``p^t(x,y) <= 2 sqrt(pi(y)/pi(x)) P(S_t >= rho)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb, exp, lgamma, log, sqrt

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .chain_core import FiniteChain
from .reporting import Table

EXACT_T_MAX = 30
LOGSPACE_TOL = 1e-8


@dataclass(frozen=True)
class ChebyshevTable:
    """Integer monomial coefficients; ``coefficients[k][j]`` multiplies ``xi**j`` in ``Q_k``."""

    coefficients: tuple

    @classmethod
    def build(cls, k_max: int) -> "ChebyshevTable":
        if k_max < 0:
            raise ValueError("k_max must be >= 0")
        rows = [[1], [0, 1]]
        for k in range(1, k_max):
            nxt = [0] * (k + 2)
            for j, c in enumerate(rows[k]):
                nxt[j + 1] += 2 * c
            for j, c in enumerate(rows[k - 1]):
                nxt[j] -= c
            rows.append(nxt)
        return cls(tuple(tuple(r) for r in rows[:k_max + 1]))

    @property
    def k_max(self) -> int:
        return len(self.coefficients) - 1

    def evaluate(self, k: int, xi):
        """Horner evaluation of ``Q_k`` (exact for Fraction/int input)."""
        acc = 0
        for c in reversed(self.coefficients[k]):
            acc = acc * xi + c
        return acc


def chebyshev_apply(chain: FiniteChain, k: int) -> np.ndarray:
    """``Q_k(P)`` as a dense matrix via ``Q_{j+1} = 2 P Q_j - Q_{j-1}``."""
    return chebyshev_sequence(chain, k)[k]


def chebyshev_sequence(chain: FiniteChain, k_max: int) -> list[np.ndarray]:
    if k_max < 0:
        raise ValueError("k must be >= 0")
    P = chain.dense()
    Q = [np.eye(P.shape[0]), P.copy()]
    for _ in range(1, k_max):
        Q.append(2.0 * P @ Q[-1] - Q[-2])
    return Q[:k_max + 1]


def srw_law(t: int) -> dict[int, Fraction]:
    """Exact law of simple random walk on ``Z`` after ``t`` steps."""
    return {2 * j - t: Fraction(comb(t, j), 2 ** t) for j in range(t + 1)}


def _srw_abs_weights(t: int, logspace: bool) -> np.ndarray:
    """``w[m] = P(|S_t| = m)`` for ``m = 0..t``."""
    w = np.zeros(t + 1)
    for j in range(t + 1):
        k = abs(2 * j - t)
        if logspace:
            w[k] += exp(lgamma(t + 1) - lgamma(j + 1) - lgamma(t - j + 1) - t * log(2.0))
        else:
            w[k] += comb(t, j) / 2.0 ** t
    return w


def binomial_mixture_identity_check(chain: FiniteChain, t: int, logspace: bool | None = None) -> float:
    """Max abs deviation between ``P^t`` and the Chebyshev mixture.

    For ``t <= 30`` the weights are exact binomial ratios; beyond that log-gamma
    weights are used and the expected tolerance is ``1e-8`` instead of ``1e-10``.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    logspace = t > EXACT_T_MAX if logspace is None else logspace
    P = chain.dense()
    Pt = np.linalg.matrix_power(P, t)
    w = _srw_abs_weights(t, logspace)
    Q = chebyshev_sequence(chain, max(t, 1))
    mix = sum(w[m] * Q[m] for m in range(t + 1))
    return float(np.max(np.abs(Pt - mix)))


def support_distances(chain: FiniteChain) -> np.ndarray:
    """Graph distance on the support of ``P`` (``inf`` when unreachable)."""
    A = chain.dense() > 0
    np.fill_diagonal(A, False)
    return shortest_path(A.astype(float), method="D", unweighted=True, directed=True)


def srw_upper_tail(t: int, R) -> np.ndarray:
    """``P(S_t >= R)`` elementwise for integer ``R`` (float)."""
    R = np.asarray(R)
    law = np.array([comb(t, j) / 2.0 ** t for j in range(t + 1)])
    tail = np.concatenate([np.cumsum(law[::-1])[::-1], [0.0]])  # tail[j] = P(J >= j)
    j = np.ceil((R + t) / 2.0)
    j = np.clip(np.where(np.isfinite(j), j, t + 1), 0, t + 1).astype(int)
    return tail[j]


def bernstein_tail(t: int, R: int) -> tuple[float, float]:
    """Exact ``P(S_t >= R)`` (rational, returned as float) and ``exp(-R^2/(2t))``."""
    if not 0 <= R <= t:
        raise ValueError("need 0 <= R <= t")
    exact = sum((p for k, p in srw_law(t).items() if k >= R), Fraction(0))
    bound = exp(-R * R / (2 * t)) if t else 1.0
    return float(exact), bound


def bernstein_tail_exact(t: int, R: int) -> Fraction:
    return sum((p for k, p in srw_law(t).items() if k >= R), Fraction(0))


def vc_bound_check(chain: FiniteChain, distances: np.ndarray | None = None, t_max: int = 50,
                   tol: float = 1e-12) -> Table:
    """Check both long-range bounds for every ``(x, y, t)`` with ``1 <= t <= t_max``.

    Returns a violation table with columns ``x, y, t, bound, lhs, rhs``
    (empty when both bounds hold).  ``distances`` defaults to the support
    graph distance.
    """
    if not chain.reversible:
        raise ValueError("long-range bound requires a reversible chain")
    rho = support_distances(chain) if distances is None else np.asarray(distances, dtype=float)
    pi = chain.pi
    ratio = 2.0 * np.sqrt(pi[None, :] / pi[:, None])
    P = chain.dense()
    Pt = np.eye(P.shape[0])
    rows = []
    for t in range(1, t_max + 1):
        Pt = Pt @ P
        mid = ratio * srw_upper_tail(t, rho)
        with np.errstate(over="ignore"):
            gauss = ratio * np.exp(-np.where(np.isfinite(rho), rho, np.inf) ** 2 / (2 * t))
        for name, rhs in (("middle", mid), ("gaussian", gauss)):
            bad = np.argwhere(Pt > rhs + tol)
            for x, y in bad:
                rows.append({"x": int(x), "y": int(y), "t": t, "bound": name,
                             "lhs": float(Pt[x, y]), "rhs": float(rhs[x, y])})
    cols = ["x", "y", "t", "bound", "lhs", "rhs"]
    return Table.from_rows(rows, cols) if rows else Table({c: [] for c in cols})


def pi_norm(v: np.ndarray, pi: np.ndarray) -> float:
    return float(sqrt(np.sum(pi * v * v)))
