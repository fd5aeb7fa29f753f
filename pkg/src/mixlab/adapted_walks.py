"""Lattice walks whose step law is chosen from a few mean-zero measures.

The choice may depend on the time, the current site, or the visit history.
Alongside the simulators live the exact tests behind the transience
arguments: a superharmonic Lyapunov function ``|x|^(-2 alpha)``, the
excessive-measure test, and the linear normalization making two covariance
matrices satisfy ``2 lambda_max < tr M`` simultaneously.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations
from typing import Callable

import numpy as np

from ._errors import ClaimViolationError, DimensionError
from .chain_core import FiniteChain
from .reporting import Table

RULE_KINDS = ("first_visit", "region", "time_blocks", "max_coordinate")


@dataclass(frozen=True)
class StepMeasure:
    """Finitely supported increment law on ``Z^d`` with exact probabilities."""

    support: tuple
    probabilities: tuple
    name: str = ""

    def __post_init__(self):
        if len(self.support) != len(self.probabilities) or not self.support:
            raise ValueError("support and probabilities must be nonempty and aligned")
        if len({len(z) for z in self.support}) != 1:
            raise DimensionError("increments must share one dimension")
        if any(p <= 0 for p in self.probabilities):
            raise ValueError("probabilities must be positive")
        if sum(self.probabilities) != 1:
            raise ValueError("probabilities must sum to 1")
        if any(m != 0 for m in self.exact_mean()):
            raise ValueError("step measure must have mean zero")

    @classmethod
    def from_dict(cls, weights: dict, name: str = "") -> "StepMeasure":
        items = sorted((tuple(int(c) for c in z), Fraction(p)) for z, p in weights.items() if p)
        return cls(tuple(z for z, _ in items), tuple(p for _, p in items), name)

    @property
    def dim(self) -> int:
        return len(self.support[0])

    def exact_mean(self) -> tuple:
        return tuple(sum(p * z[i] for z, p in zip(self.support, self.probabilities)) for i in range(self.dim))

    @property
    def covariance(self) -> np.ndarray:
        Z = np.array(self.support, dtype=float)
        p = np.array([float(q) for q in self.probabilities])
        return (Z * p[:, None]).T @ Z

    @property
    def full_dimensional(self) -> bool:
        return np.linalg.matrix_rank(np.array(self.support, dtype=float)) == self.dim

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.support, dtype=np.int64), np.array([float(q) for q in self.probabilities])


def _axis_measure(d: int, weights: list[Fraction], name: str) -> StepMeasure:
    w = {}
    for i, q in enumerate(weights):
        if q:
            for s in (1, -1):
                z = [0] * d
                z[i] = s
                w[tuple(z)] = q / 2
    return StepMeasure.from_dict(w, name)


def srw_measure(d: int) -> StepMeasure:
    return _axis_measure(d, [Fraction(1, d)] * d, f"srw{d}")


def horizontal_measure() -> StepMeasure:
    return _axis_measure(2, [Fraction(1), Fraction(0)], "horizontal")


def vertical_measure() -> StepMeasure:
    return _axis_measure(2, [Fraction(0), Fraction(1)], "vertical")


def gantert_measures() -> tuple[StepMeasure, StepMeasure]:
    """(mostly horizontal, mostly vertical): 2/3 versus 1/3 along the preferred axis."""
    return (_axis_measure(2, [Fraction(2, 3), Fraction(1, 3)], "gantert_h"),
            _axis_measure(2, [Fraction(1, 3), Fraction(2, 3)], "gantert_v"))


def max_coordinate_measures(d: int = 3, eps=Fraction(1, 20)) -> tuple[StepMeasure, ...]:
    """Measure ``i`` steps along axis ``i`` w.p. ``1 - (d-1) eps``, each other axis ``eps``."""
    eps = Fraction(eps)
    if not 0 < eps < Fraction(1, d - 1):
        raise ValueError("eps out of range")
    out = []
    for i in range(d):
        w = [eps] * d
        w[i] = 1 - (d - 1) * eps
        out.append(_axis_measure(d, w, f"max{i}"))
    return tuple(out)


@dataclass(frozen=True)
class AdaptedRule:
    """Deterministic choice of measure index from ``(t, x, first_visit)``.

    * ``time_blocks``: horizontal (0) when ``floor(log2 t)`` is even, vertical (1) when odd; ``t = 0`` horizontal.
    * ``first_visit``: vertical (1) on the first visit to a site, horizontal (0) afterwards.
    * ``region``: measure 1 (mostly horizontal) when ``|x_1| < |x_2|``, else measure 0 (mostly vertical).
    * ``max_coordinate``: index of the coordinate of largest absolute value, smallest index on ties.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ValueError(f"unknown rule {self.kind!r}; expected one of {RULE_KINDS}")

    def choose(self, t: int, x, first_visit: bool) -> int:
        if self.kind == "time_blocks":
            return time_block_index(t)
        if self.kind == "first_visit":
            return 1 if first_visit else 0
        if self.kind == "region":
            return 1 if abs(x[0]) < abs(x[1]) else 0
        return int(np.argmax(np.abs(x)))

    def default_measures(self) -> tuple[StepMeasure, ...]:
        if self.kind in ("time_blocks", "first_visit"):
            return horizontal_measure(), vertical_measure()
        if self.kind == "region":
            v, h = gantert_measures()[1], gantert_measures()[0]
            return v, h
        return max_coordinate_measures(self.params.get("d", 3), Fraction(self.params.get("eps", Fraction(1, 20))))


def time_block_index(t: int) -> int:
    return 0 if t == 0 else (int(t).bit_length() - 1) & 1


@dataclass(frozen=True)
class AdaptedSample:
    path: np.ndarray
    choices: np.ndarray
    first_visit: np.ndarray
    returns: int

    @property
    def n_steps(self) -> int:
        return len(self.choices)

    @property
    def radii(self) -> np.ndarray:
        return np.sqrt((self.path.astype(float) ** 2).sum(axis=1))

    def to_table(self) -> Table:
        cols = {"t": list(range(len(self.path)))}
        for i in range(self.path.shape[1]):
            cols[f"x{i}"] = self.path[:, i].tolist()
        cols["measure"] = self.choices.tolist() + [-1]
        cols["first_visit"] = self.first_visit.tolist() + [False]
        return Table(cols)


def simulate_adapted(rule: AdaptedRule, n_steps: int, seed: int, measures=None,
                     returns_after: int = 0) -> AdaptedSample:
    """Run the adapted walk from the origin for ``n_steps`` steps.

    ``first_visit[t]`` records whether ``X_t`` had not been occupied before
    time ``t``; ``returns`` counts times ``t > returns_after`` with ``X_t = 0``.
    """
    measures = tuple(measures) if measures is not None else rule.default_measures()
    d = measures[0].dim
    if any(m.dim != d for m in measures):
        raise DimensionError("all measures must share one dimension")
    if rule.kind in ("time_blocks", "first_visit", "region") and (d != 2 or len(measures) < 2):
        raise DimensionError(f"rule {rule.kind!r} needs two measures on Z^2")
    if rule.kind == "max_coordinate" and len(measures) < d:
        raise DimensionError("max_coordinate rule needs one measure per coordinate")
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    rng = np.random.default_rng(seed)
    tables = [m.arrays() for m in measures]
    cums = [np.cumsum(p) for _, p in tables]
    u = rng.random(n_steps)
    path = np.zeros((n_steps + 1, d), dtype=np.int64)
    choices = np.empty(n_steps, dtype=np.int64)
    first = np.empty(n_steps, dtype=bool)
    seen = {(0,) * d}
    x = np.zeros(d, dtype=np.int64)
    fresh = True
    returns = 0
    for t in range(n_steps):
        k = rule.choose(t, x, fresh)
        Z, _ = tables[k]
        j = min(int(np.searchsorted(cums[k], u[t], side="right")), len(Z) - 1)
        x = x + Z[j]
        choices[t] = k
        first[t] = fresh
        path[t + 1] = x
        key = tuple(int(c) for c in x)
        fresh = key not in seen
        seen.add(key)
        if t + 1 > returns_after and not x.any():
            returns += 1
    return AdaptedSample(path, choices, first, returns)


def time_block_returns(n_steps: int, seeds, returns_after: int = 0) -> np.ndarray:
    """Vectorized origin-return counts for the alternating-block walk, one per seed."""
    _, e = np.frexp(np.arange(n_steps, dtype=float))
    vertical = ((e - 1) & 1).astype(bool)  # floor(log2 t) odd
    vertical[:1] = False
    out = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        step = rng.choice(np.array([-1, 1]), size=n_steps)
        x = np.concatenate([[0], np.cumsum(np.where(vertical, 0, step))])
        y = np.concatenate([[0], np.cumsum(np.where(vertical, step, 0))])
        at0 = (x == 0) & (y == 0)
        out.append(int(at0[returns_after + 1:].sum()))
    return np.array(out)


# exact tests

LatticeKernel = Callable[[tuple], list]


def region_kernel(x: tuple) -> list:
    """Transition list ``[(increment, Fraction)]`` of the region-based walk."""
    rule = AdaptedRule("region")
    m = rule.default_measures()[rule.choose(0, x, False)]
    return list(zip(m.support, m.probabilities))


def measure_kernel(measure: StepMeasure) -> LatticeKernel:
    items = list(zip(measure.support, measure.probabilities))
    return lambda x: items


@dataclass(frozen=True)
class ExcessiveReport:
    max_column_sum: Fraction
    origin_value: Fraction
    strict_at_origin: bool
    radius: int

    @property
    def ok(self) -> bool:
        return self.max_column_sum <= 1 and self.strict_at_origin


def excessive_measure_check(kernel: LatticeKernel = region_kernel, box_radius: int = 50,
                            dim: int = 2) -> ExcessiveReport:
    """``(mu P)(x) = sum_y p(y, x)`` for ``mu = 1`` over the box interior, exactly.

    Interior points are those whose every possible predecessor lies in the box;
    for nearest-neighbour kernels this is ``max|x_i| <= box_radius - 1``.
    """
    reach = max(max(abs(c) for z, _ in kernel((0,) * dim) for c in z), 1)
    inner = box_radius - reach
    if inner < 0:
        raise ValueError("box too small for the kernel range")
    col: dict = {}
    rng = range(-box_radius, box_radius + 1)
    for y in np.ndindex(*(len(rng),) * dim):
        y = tuple(int(c) - box_radius for c in y)
        for z, p in kernel(y):
            x = tuple(a + b for a, b in zip(y, z))
            if max(abs(c) for c in x) <= inner:
                col[x] = col.get(x, Fraction(0)) + p
    origin = col[(0,) * dim]
    return ExcessiveReport(max(col.values()), origin, origin < 1, box_radius)


@dataclass(frozen=True)
class LyapunovCondition:
    satisfied: bool
    margin: float

    def __iter__(self):
        return iter((self.satisfied, self.margin))


def lyapunov_condition(M, tol: float = 1e-12) -> LyapunovCondition:
    """``2 lambda_max < tr M``; ``margin = tr M - 2 lambda_max``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError("M must be square")
    if not np.allclose(M, M.T, atol=tol, rtol=0):
        raise ValueError("M must be symmetric")
    w = np.linalg.eigvalsh(M)
    if w[0] < -tol:
        raise ValueError("M must be positive semidefinite")
    margin = float(np.trace(M) - 2 * w[-1])
    return LyapunovCondition(margin > 0, margin)


def _sym_power(M: np.ndarray, power: float) -> np.ndarray:
    w, V = np.linalg.eigh(M)
    return (V * w ** power) @ V.T


@dataclass(frozen=True)
class SPDNormalization:
    A: np.ndarray
    transformed: tuple
    margins: tuple
    labeling: tuple


def normalize_spd_pair(M1, M2) -> SPDNormalization:
    """Linear map ``A`` with both ``A M_i A^T`` satisfying ``2 lambda_max < tr``.

    ``M1`` is whitened, the whitened ``M2`` is diagonalized to
    ``diag(a, b, c)``, and ``diag(sqrt(b/a), 1, 1)`` finishes.  All six
    orderings of the eigenvalues are tried; the one with the largest
    worst-case relative margin is returned.
    """
    M1, M2 = (np.asarray(M, dtype=float) for M in (M1, M2))
    for M in (M1, M2):
        if M.shape != (3, 3) or not np.allclose(M, M.T):
            raise DimensionError("need symmetric 3x3 matrices")
        if np.linalg.eigvalsh(M)[0] <= 0:
            raise ValueError("matrices must be positive definite")
    A1 = _sym_power(M1, -0.5)
    B = A1 @ M2 @ A1.T
    w, U = np.linalg.eigh(0.5 * (B + B.T))
    best = None
    for perm in permutations(range(3)):
        a, b, c = w[list(perm)]
        A = np.diag([np.sqrt(b / a), 1.0, 1.0]) @ U[:, list(perm)].T @ A1
        T = (A @ M1 @ A.T, A @ M2 @ A.T)
        margins = tuple(lyapunov_condition(0.5 * (M + M.T), tol=1e-9).margin for M in T)
        rel = min(m / np.trace(M) for m, M in zip(margins, T))
        if best is None or rel > best[0]:
            best = (rel, SPDNormalization(A, T, margins, (float(a), float(b), float(c))))
    if best[0] <= 0:
        raise ClaimViolationError(f"no eigenvalue labeling satisfies the condition (eigs {w})")
    return best[1]


def fibonacci_directions(n: int) -> np.ndarray:
    """``n`` nearly uniform unit vectors in ``R^3`` plus the 26 lattice directions."""
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    r = np.sqrt(1 - z * z)
    phi = np.pi * (3 - np.sqrt(5)) * i
    pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    lat = np.array([v for v in np.ndindex(3, 3, 3) if v != (1, 1, 1)], dtype=float) - 1
    lat /= np.linalg.norm(lat, axis=1, keepdims=True)
    return np.vstack([pts, lat])


@dataclass(frozen=True)
class ProbeResult:
    worst: float
    worst_point: tuple
    worst_measure: int
    passed: bool
    need_margins: tuple
    n_points: int


def superharmonicity_probe(measures, alpha: float = 0.01, radii=(25, 50, 100), A=None,
                           n_directions: int = 400) -> ProbeResult:
    """Max of ``E[phi(A(x + Z))] - phi(A x)`` with ``phi(y) = |y|^(-2 alpha)``.

    Probe points are lattice points nearest to ``A^{-1}(r u)`` for ``r`` in
    ``radii`` and ``u`` over a fixed direction set.  A positive worst value
    is a reported probe failure, not an exception.
    """
    measures = [measures] if isinstance(measures, StepMeasure) else list(measures)
    d = measures[0].dim
    if d < 3:
        raise DimensionError("superharmonicity test needs d >= 3")
    if d != 3:
        raise DimensionError("probe directions implemented for d = 3")
    A = np.eye(d) if A is None else np.asarray(A, dtype=float)
    Ainv = np.linalg.inv(A)
    dirs = fibonacci_directions(n_directions)
    X = np.unique(np.rint(np.concatenate([(Ainv @ (r * dirs).T).T for r in radii])).astype(np.int64), axis=0)
    X = X[np.any(X != 0, axis=1)]
    phi = lambda Y: np.sum(Y * Y, axis=-1) ** (-alpha)
    base = phi(X @ A.T)
    worst, where, which = -np.inf, None, -1
    for k, m in enumerate(measures):
        Z, p = m.arrays()
        Y = (X[:, None, :] + Z[None, :, :]) @ A.T
        diff = phi(Y) @ p - base
        j = int(np.argmax(diff))
        if diff[j] > worst:
            worst, where, which = float(diff[j]), tuple(int(c) for c in X[j]), k
    needs = tuple(lyapunov_condition(A @ m.covariance @ A.T).margin for m in measures)
    return ProbeResult(worst, where, which, worst <= 0, needs, len(X))


@dataclass(frozen=True)
class SupermartingaleReport:
    max_drift: float
    location: object
    qualifying: bool

    @property
    def ok(self) -> bool:
        return self.qualifying and self.max_drift <= 1e-12


def supermartingale_check(kernel_or_chain, phi, interior) -> SupermartingaleReport:
    """Max of ``(P phi)(x) - phi(x)`` over ``interior``.

    ``phi`` is a vector for a :class:`FiniteChain`, else a callable on lattice
    points with ``kernel_or_chain`` a lattice kernel.  Constant ``phi`` is
    flagged as non-qualifying since the transience test needs it non-constant.
    """
    if isinstance(kernel_or_chain, FiniteChain):
        phi = np.asarray(phi, dtype=float)
        idx = np.asarray(list(interior), dtype=int)
        drift = np.asarray(kernel_or_chain.apply(phi))[idx] - phi[idx]
        j = int(np.argmax(drift))
        qualifying = bool(np.all(phi > 0) and np.ptp(phi) > 0)
        return SupermartingaleReport(float(drift[j]), int(idx[j]), qualifying)
    worst, where, values = -np.inf, None, set()
    for x in interior:
        x = tuple(x)
        fx = phi(x)
        values.add(fx)
        Pf = sum(float(p) * phi(tuple(a + b for a, b in zip(x, z))) for z, p in kernel_or_chain(x))
        if Pf - fx > worst:
            worst, where = Pf - fx, x
    qualifying = len(values) > 1 and min(values) > 0
    return SupermartingaleReport(float(worst), where, qualifying)


def capped_power_phi(alpha: float, r_min: float, A=None) -> Callable:
    """``min(|A x|^(-2 alpha), r_min^(-2 alpha))``: capped inside the ``r_min`` shell."""
    A = None if A is None else np.asarray(A, dtype=float)
    cap = r_min ** (-2 * alpha)

    def phi(x):
        y = np.asarray(x, dtype=float) if A is None else A @ np.asarray(x, dtype=float)
        n2 = float(y @ y)
        return cap if n2 == 0 else min(n2 ** (-alpha), cap)

    return phi
