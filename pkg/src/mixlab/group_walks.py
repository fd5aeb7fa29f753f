"""Random walks on infinitely many states generated on the fly.

Three families are built in: the lattice ``Z^d`` (elements are integer
tuples), the free product of ``d`` copies of ``Z_2`` whose Cayley graph is
the ``d``-regular tree ``Pi_d`` (elements are reduced words, tuples of
generator indices with no immediate repeat), and the lamplighter group
``G_d`` over ``Z^d`` (elements are :class:`LampGroupElement`).

Entropies are in nats.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import log, sqrt
from typing import Callable, Hashable

import numpy as np

from ._errors import UnsupportedError
from .chain_core import FiniteChain
from .reporting import Table

ZD_EXACT_MAX = 40
TREE_EXACT_MAX = 200
MONOTONE_TOL = 1e-9


@dataclass(frozen=True)
class LampGroupElement:
    """Finite set of lit sites together with the marker position."""

    on_lamps: frozenset
    marker: tuple

    @classmethod
    def identity(cls, d: int) -> "LampGroupElement":
        return cls(frozenset(), (0,) * d)


@dataclass(frozen=True)
class GroupWalkModel:
    """Symmetric generator walk on a group.

    ``word_length`` returns an int when exact, else a ``(lower, upper)`` pair.
    ``degree`` counts generators; the lazy walk holds with probability 1/2.
    """

    name: str
    identity: Hashable
    neighbors: Callable
    word_length: Callable
    degree: int
    lazy: bool = False
    exact_length: bool = True
    params: dict = field(default_factory=dict, compare=False)

    def with_laziness(self, lazy: bool) -> "GroupWalkModel":
        return GroupWalkModel(self.name, self.identity, self.neighbors, self.word_length,
                              self.degree, lazy, self.exact_length, self.params)

    def length_bounds(self, g) -> tuple[int, int]:
        L = self.word_length(g)
        return (L, L) if np.isscalar(L) else tuple(L)


# lattice

def _zd_neighbors(x):
    out = []
    for i in range(len(x)):
        for s in (1, -1):
            y = list(x)
            y[i] += s
            out.append(tuple(y))
    return out


def zd_model(d: int, lazy: bool = False) -> GroupWalkModel:
    if d < 1:
        raise ValueError("d >= 1 required")
    return GroupWalkModel(f"Z^{d}", (0,) * d, _zd_neighbors,
                          lambda x: int(sum(abs(c) for c in x)), 2 * d, lazy, True, {"d": d})


# tree

def tree_model(d: int, lazy: bool = False) -> GroupWalkModel:
    """``Pi_d``: reduced words over ``d`` involutions; word length is depth."""
    if d < 2:
        raise ValueError("tree needs d >= 2")

    def neighbors(w):
        out = []
        for g in range(d):
            out.append(w[:-1] if w and w[-1] == g else w + (g,))
        return out

    return GroupWalkModel(f"Pi_{d}", (), neighbors, len, d, lazy, True, {"d": d})


# lamplighter group

def lamp_neighbors(g: LampGroupElement) -> list[LampGroupElement]:
    out = [LampGroupElement(g.on_lamps, y) for y in _zd_neighbors(g.marker)]
    out.append(LampGroupElement(g.on_lamps ^ {g.marker}, g.marker))
    return out


def g1_word_length(S, x: int) -> int:
    """Exact word length of ``(S, x)`` in ``G_1``.

    The marker must sweep the interval spanned by ``S``, the origin and
    ``x``; it goes to one end first, then to the other, then back to ``x``.
    """
    S = [int(s[0]) if isinstance(s, tuple) else int(s) for s in S]
    x = int(x[0]) if isinstance(x, tuple) else int(x)
    pts = S + [0, x]
    l, r = min(pts), max(pts)
    left_first = -l + (r - l) + (r - x)
    right_first = r + (r - l) + (x - l)
    return len(S) + min(left_first, right_first)


def _l1(a, b=None) -> int:
    a = np.asarray(a)
    return int(np.abs(a if b is None else a - np.asarray(b)).sum())


def greedy_tour_length(points, start, end) -> int:
    """Nearest-neighbour tour ``start -> all points -> end`` in the ``l1`` metric."""
    pts = np.array(sorted(points), dtype=np.int64).reshape(-1, len(start))
    cur = np.array(start, dtype=np.int64)
    left = np.ones(len(pts), dtype=bool)
    total = 0
    for _ in range(len(pts)):
        dist = np.abs(pts - cur).sum(axis=1)
        dist[~left] = np.iinfo(np.int64).max
        j = int(np.argmin(dist))
        total += int(dist[j])
        cur = pts[j]
        left[j] = False
    return total + _l1(cur, end)


def gd_word_length_bounds(S, x) -> tuple[int, int]:
    """Certified interval for the word length in ``G_d``.

    Lower: one switch per lit lamp plus the longest forced detour
    ``|s| + |x - s|`` (or ``|x|``).  Upper: switches plus a greedy tour.
    """
    x = tuple(x)
    S = [tuple(s) for s in S]
    lower_path = _l1(x)
    if S:
        arr = np.array(S)
        lower_path = max(lower_path, int((np.abs(arr).sum(1) + np.abs(arr - np.array(x)).sum(1)).max()))
    upper_path = greedy_tour_length(S, (0,) * len(x), x)
    return len(S) + lower_path, len(S) + upper_path


def lamp_model(d: int, lazy: bool = False) -> GroupWalkModel:
    """``G_d``: exact word length for ``d = 1``, certified bounds otherwise."""
    if d < 1:
        raise ValueError("d >= 1 required")
    if d == 1:
        wl = lambda g: g1_word_length(list(g.on_lamps), g.marker)
    else:
        wl = lambda g: gd_word_length_bounds(g.on_lamps, g.marker)
    return GroupWalkModel(f"G_{d}", LampGroupElement.identity(d), lamp_neighbors, wl,
                          2 * d + 1, lazy, d == 1, {"d": d})


def builtin_models(d: int = 2, tree_degree: int = 3, lamp_dim: int = 1,
                   lazy: bool = False) -> dict[str, GroupWalkModel]:
    return {"Z^d": zd_model(d, lazy), "tree": tree_model(tree_degree, lazy),
            "lamplighter": lamp_model(lamp_dim, lazy)}


# sampling

@dataclass(frozen=True)
class SpeedEstimate:
    """``v_hat`` with standard error; ``interval`` set when only length bounds exist."""

    v_hat: float
    stderr: float
    interval: tuple | None = None
    mean_length: float = float("nan")

    def __iter__(self):
        return iter((self.v_hat, self.stderr))


def _tree_radii(d: int, n_steps: int, n_walks: int, lazy: bool, rng, start=None) -> np.ndarray:
    r = np.zeros(n_walks, dtype=np.int64) if start is None else start.copy()
    for _ in range(n_steps):
        u = rng.random(n_walks)
        if lazy:
            hold = u < 0.5
            u = 2 * u - 1
        else:
            hold = np.zeros(n_walks, dtype=bool)
        step = np.where(r == 0, 1, np.where(u < 1.0 / d, -1, 1))
        r += np.where(hold, 0, step)
    return r


def _zd_displacements(d: int, n_steps: int, n_walks: int, lazy: bool, rng) -> np.ndarray:
    k = 2 * d
    p = np.full(k + 1, 0.5 / k if lazy else 1.0 / k)
    p[-1] = 0.5 if lazy else 0.0
    counts = rng.multinomial(n_steps, p, size=n_walks)
    return counts[:, 0:k:2] - counts[:, 1:k:2]


def _zd_lengths(d: int, n_steps: int, n_walks: int, lazy: bool, rng) -> np.ndarray:
    return np.abs(_zd_displacements(d, n_steps, n_walks, lazy, rng)).sum(axis=1)


def _generic_path(model: GroupWalkModel, n_steps: int, rng):
    g = model.identity
    for _ in range(n_steps):
        if model.lazy and rng.random() < 0.5:
            continue
        nb = model.neighbors(g)
        g = nb[rng.integers(len(nb))]
    return g


def sample_lengths(model: GroupWalkModel, n_steps: int, n_walks: int, seed: int) -> np.ndarray:
    """Word lengths of ``X_n``; shape ``(n_walks,)`` or ``(n_walks, 2)`` for bounds."""
    rng = np.random.default_rng(seed)
    if model.name.startswith("Z^"):
        return _zd_lengths(model.params["d"], n_steps, n_walks, model.lazy, rng)
    if model.name.startswith("Pi_"):
        return _tree_radii(model.params["d"], n_steps, n_walks, model.lazy, rng)
    if model.name.startswith("G_"):
        out = lamp_walk_batch(model.params["d"], n_steps, n_walks, seed, lazy=model.lazy)
        return np.column_stack([out["lower"], out["upper"]])
    vals = [model.word_length(_generic_path(model, n_steps, rng)) for _ in range(n_walks)]
    return np.asarray(vals)


def _paired_lengths(model: GroupWalkModel, burn_in: int, n_steps: int, n_walks: int, seed: int):
    """Word lengths at times ``burn_in`` and ``n_steps`` along the same walks."""
    rng = np.random.default_rng(seed)
    if model.name.startswith("Z^"):
        d = model.params["d"]
        first = _zd_displacements(d, burn_in, n_walks, model.lazy, rng)
        rest = _zd_displacements(d, n_steps - burn_in, n_walks, model.lazy, rng)
        return np.abs(first).sum(axis=1), np.abs(first + rest).sum(axis=1)
    if model.name.startswith("Pi_"):
        d = model.params["d"]
        early = _tree_radii(d, burn_in, n_walks, model.lazy, rng)
        return early, _tree_radii(d, n_steps - burn_in, n_walks, model.lazy, rng, start=early)
    raise UnsupportedError(f"burn-in estimator not available for {model.name}")


def speed_estimate(model: GroupWalkModel, n_steps: int, n_walks: int, seed: int,
                   burn_in: int = 0) -> SpeedEstimate:
    """Empirical speed with standard error over independent walks.

    With ``burn_in = 0`` this is ``E|X_n|/n``.  Otherwise it is
    ``E(|X_n| - |X_b|)/(n - b)``, which drops the ``O(1/n)`` offset picked up
    near the identity (reflection at the root of a tree, say) and so targets
    the same limit with much smaller bias.
    """
    if n_steps < 1 or n_walks < 1:
        raise ValueError("n_steps and n_walks must be >= 1")
    if not 0 <= burn_in < n_steps:
        raise ValueError("need 0 <= burn_in < n_steps")
    se = lambda a: float(a.std(ddof=1) / sqrt(len(a))) if len(a) > 1 else float("nan")
    if burn_in:
        early, late = (a.astype(float) for a in _paired_lengths(model, burn_in, n_steps, n_walks, seed))
        v = (late - early) / (n_steps - burn_in)
        return SpeedEstimate(float(v.mean()), se(v), None, float(late.mean()))
    L = sample_lengths(model, n_steps, n_walks, seed).astype(float)
    if L.ndim == 2:
        lo, hi = L[:, 0] / n_steps, L[:, 1] / n_steps
        return SpeedEstimate(float(lo.mean()), se(lo), (float(lo.mean()), float(hi.mean())),
                             float(L[:, 0].mean()))
    v = L / n_steps
    return SpeedEstimate(float(v.mean()), se(v), None, float(L.mean()))


# exact laws

@dataclass(frozen=True)
class ExactLaw:
    """Law of ``X_n``.

    For the lattice ``points`` holds the support and ``probs`` its masses.
    For trees ``probs[r]`` is the mass of the sphere of radius ``r`` and
    ``log_sphere`` its log size; mass is uniform within spheres.
    """

    n: int
    probs: np.ndarray
    points: np.ndarray | None = None
    log_sphere: np.ndarray | None = None

    @property
    def lengths(self) -> np.ndarray:
        if self.points is not None:
            return np.abs(self.points).sum(axis=1)
        return np.arange(len(self.probs))

    def entropy(self) -> float:
        p = self.probs
        nz = p > 0
        H = -float(np.sum(p[nz] * np.log(p[nz])))
        if self.log_sphere is not None:
            H += float(np.sum(p[nz] * self.log_sphere[nz]))
        return H

    def moment(self, k: int = 1, norm: str = "word") -> float:
        """``E|X_n|^k`` for the word length, or the Euclidean norm on lattices."""
        if norm == "word":
            r = self.lengths.astype(float)
        elif norm == "euclidean":
            if self.points is None:
                raise UnsupportedError("Euclidean norm only defined for lattice laws")
            r = np.sqrt((self.points.astype(float) ** 2).sum(axis=1))
        else:
            raise ValueError(f"unknown norm {norm!r}")
        return float(np.sum(self.probs * r ** k))

    def log_support_size(self) -> float:
        nz = self.probs > 0
        if self.log_sphere is None:
            return log(int(nz.sum()))
        ls = self.log_sphere[nz]
        m = ls.max()
        return float(m + np.log(np.exp(ls - m).sum()))

    def as_dict(self) -> dict:
        if self.points is None:
            raise UnsupportedError("tree laws are radial; use probs/log_sphere")
        return {tuple(int(c) for c in pt): float(p) for pt, p in zip(self.points, self.probs) if p > 0}


def _zd_exact(d: int, n: int, lazy: bool) -> ExactLaw:
    if n > ZD_EXACT_MAX:
        raise UnsupportedError(f"exact lattice law supported for n <= {ZD_EXACT_MAX}")
    size = 2 * n + 1
    law = np.zeros((size,) * d)
    law[(n,) * d] = 1.0
    w = (0.5 if lazy else 1.0) / (2 * d)
    for _ in range(n):
        new = 0.5 * law if lazy else np.zeros_like(law)
        for i in range(d):
            new += w * (np.roll(law, 1, axis=i) + np.roll(law, -1, axis=i))
        law = new
    idx = np.argwhere(law > 0)
    return ExactLaw(n, law[tuple(idx.T)], idx - n)


def tree_sphere_log_sizes(d: int, r_max: int) -> np.ndarray:
    r = np.arange(r_max + 1, dtype=float)
    out = np.log(d) + (r - 1) * np.log(d - 1)
    out[0] = 0.0
    return out


def _tree_exact(d: int, n: int, lazy: bool) -> ExactLaw:
    if n > TREE_EXACT_MAX:
        raise UnsupportedError(f"exact tree law supported for n <= {TREE_EXACT_MAX}")
    p = np.zeros(n + 2)
    p[0] = 1.0
    for _ in range(n):
        move = 0.5 * p if lazy else p
        new = 0.5 * p if lazy else np.zeros_like(p)
        new[1] += move[0]
        new[2:] += move[1:-1] * (d - 1) / d
        new[:-2] += move[1:-1] / d
        p = new
    p = p[:n + 1]
    return ExactLaw(n, p, None, tree_sphere_log_sizes(d, n))


def exact_distribution(model: GroupWalkModel, n: int) -> ExactLaw:
    if n < 0:
        raise ValueError("n must be >= 0")
    if model.name.startswith("Z^"):
        return _zd_exact(model.params["d"], n, model.lazy)
    if model.name.startswith("Pi_"):
        return _tree_exact(model.params["d"], n, model.lazy)
    raise UnsupportedError(f"no exact law for {model.name}")


@dataclass(frozen=True)
class EntropyCurve:
    n: np.ndarray
    H: np.ndarray
    h: np.ndarray
    mean_length: np.ndarray
    second_moment: np.ndarray
    log_support: np.ndarray

    @property
    def h_estimate(self) -> float:
        return float(self.h[-1])

    @property
    def increments_monotone(self) -> bool:
        return bool(np.all(np.diff(self.h[1:]) <= MONOTONE_TOL))

    def to_table(self) -> Table:
        return Table({"n": self.n.tolist(), "H": self.H.tolist(), "h_n": self.h.tolist(),
                      "mean_length": self.mean_length.tolist()})


def _law_sequence(model: GroupWalkModel, n_max: int):
    for n in range(n_max + 1):
        yield exact_distribution(model, n)


def entropy_curve(model: GroupWalkModel, n_max: int) -> EntropyCurve:
    """Exact ``H(X_n)`` for ``n = 0..n_max`` with increments ``h_n``."""
    laws = list(_law_sequence(model, n_max))
    H = np.array([L.entropy() for L in laws])
    h = np.concatenate([[0.0], np.diff(H)])
    return EntropyCurve(np.arange(n_max + 1), H, h,
                        np.array([L.moment(1) for L in laws]),
                        np.array([L.moment(2) for L in laws]),
                        np.array([L.log_support_size() for L in laws]))


def kvv_cross_check(model: GroupWalkModel, n_max: int, curve: EntropyCurve | None = None) -> Table:
    """Evaluate the two entropy/speed inequalities at every ``1 <= n <= n_max``.

    ``entropy_side = (log 2 + H)/n`` must dominate ``E|X|^2/(2 n^2)`` (and
    hence the Jensen form with ``(E|X|)^2``); ``sphere_gap =
    (E|X| + 1) log(2 deg)/n - H/n`` must be nonnegative.
    """
    c = curve or entropy_curve(model, n_max)
    rows = []
    for n in range(1, n_max + 1):
        lhs = (log(2) + c.H[n]) / n
        sq = c.second_moment[n] / (2 * n * n)
        jensen = c.mean_length[n] ** 2 / (2 * n * n)
        gap = (c.mean_length[n] + 1) * log(2 * model.degree) / n - c.H[n] / n
        rows.append({"n": n, "entropy_side": lhs, "second_moment_side": sq, "jensen_side": jensen,
                     "sphere_gap": gap, "ok": bool(lhs >= sq - 1e-12 and sq >= jensen - 1e-12 and gap >= -1e-12)})
    return Table.from_rows(rows)


# harmonic functions

@dataclass(frozen=True)
class HarmonicReport:
    max_residual: float
    checked: int
    touches_boundary: bool


def harmonic_check(chain_or_model, u, interior) -> HarmonicReport:
    """Max of ``|u(x) - (Pu)(x)|`` over ``interior``.

    For a :class:`FiniteChain` ``u`` is a vector and ``interior`` indices.
    For a :class:`GroupWalkModel` ``u`` maps elements to reals; interior
    points with a neighbour outside the domain are skipped and flagged.
    """
    if isinstance(chain_or_model, FiniteChain):
        u = np.asarray(u, dtype=float)
        idx = np.asarray(list(interior), dtype=int)
        Pu = np.asarray(chain_or_model.apply(u))
        res = np.abs(u[idx] - Pu[idx])
        return HarmonicReport(float(res.max()) if res.size else 0.0, int(idx.size), False)
    model = chain_or_model
    worst, checked, touched = 0.0, 0, False
    for x in interior:
        nb = model.neighbors(x)
        if any(y not in u for y in nb):
            touched = True
            continue
        avg = sum(u[y] for y in nb) / len(nb)
        if model.lazy:
            avg = 0.5 * u[x] + 0.5 * avg
        worst = max(worst, abs(u[x] - avg))
        checked += 1
    return HarmonicReport(worst, checked, touched)


def tree_branch_probability(d: int, word: tuple, branch: int = 0) -> float:
    """Probability that SRW on ``Pi_d`` from ``word`` ends in the subtree of ``(branch,)``.

    Escape to infinity from depth ``r`` without returning to depth ``r - 1``
    fails with probability ``q = 1/(d - 1)`` per level.
    """
    q = 1.0 / (d - 1)
    r = len(word)
    if r == 0:
        return 1.0 / d
    if word[0] == branch:
        return 1.0 - q ** r * (1.0 - 1.0 / d)
    return q ** r / d


def tree_ball(d: int, radius: int) -> list[tuple]:
    words = [()]
    frontier = [()]
    for _ in range(radius):
        nxt = []
        for w in frontier:
            for g in range(d):
                if not w or w[-1] != g:
                    nxt.append(w + (g,))
        words.extend(nxt)
        frontier = nxt
    return words


# lamplighter group walk

def lamp_walk_batch(d: int, n_steps: int, runs: int, seed: int, lazy: bool = False) -> dict:
    """Independent generator walks on ``G_d``.

    Each step picks one of the ``2d + 1`` generators uniformly (move the
    marker along a coordinate or switch the lamp under it).  Returns arrays
    ``lamps_on``, ``displacement`` (l1 of the marker), ``lower``, ``upper``.
    """
    if d < 1 or n_steps < 0:
        raise ValueError("need d >= 1 and n_steps >= 0")
    rng = np.random.default_rng(seed)
    out = {k: np.empty(runs, dtype=np.int64) for k in ("lamps_on", "displacement", "lower", "upper")}
    k = 2 * d + 1
    for r in range(runs):
        gen = rng.integers(k, size=n_steps)
        if lazy:
            gen = gen[rng.random(n_steps) >= 0.5]
        x = [0] * d
        lit: set = set()
        for g in gen:
            if g == 2 * d:
                lit ^= {tuple(x)}
            else:
                x[g >> 1] += 1 - 2 * (g & 1)
        if d == 1:
            lo = hi = g1_word_length([s[0] for s in lit], x[0])
        else:
            lo, hi = gd_word_length_bounds(lit, x)
        out["lamps_on"][r] = len(lit)
        out["displacement"][r] = _l1(x)
        out["lower"][r] = lo
        out["upper"][r] = hi
    return out


@dataclass(frozen=True)
class WalkSample:
    n_steps: int
    lamps_on: int
    displacement: int
    length_lower: int
    length_upper: int


def lamp_group_walk(d: int, n_steps: int, seed: int) -> WalkSample:
    res = lamp_walk_batch(d, n_steps, 1, seed)
    return WalkSample(n_steps, int(res["lamps_on"][0]), int(res["displacement"][0]),
                      int(res["lower"][0]), int(res["upper"][0]))


def ball_bfs(model: GroupWalkModel, radius: int) -> dict:
    """Exact word lengths of all elements within ``radius`` by breadth-first search."""
    dist = {model.identity: 0}
    frontier = [model.identity]
    for r in range(1, radius + 1):
        nxt = []
        for g in frontier:
            for h in model.neighbors(g):
                if h not in dist:
                    dist[h] = r
                    nxt.append(h)
        frontier = nxt
    return dist
