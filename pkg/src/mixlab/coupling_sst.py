"""Couplings and strong stationary times as simulators, plus their exact tails.

Every randomized routine takes an explicit integer seed and draws from
``numpy.random.default_rng(seed)``; results are bit-identical for a fixed
seed and library version.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from ._errors import UnsupportedError
from .chain_core import FiniteChain, deviations_at
from .graph_builders import Graph, encode_lamp_state, lamplighter_chain, lazy_srw
from .reporting import Table
from .spectral_metrics import cover_time_tail

# (dx, dy) increments of the cycle coupling before the walks meet; each 1/4.
CYCLE_MOVES = np.array([(0, 1), (0, -1), (1, 0), (-1, 0)])
LAZY_STEP = np.array([0, 0, 1, -1])
SST_GRAPH_LIMIT = 12


@dataclass(frozen=True)
class CoupledTrajectory:
    """Two coupled walks; ``tau_couple`` is None when they had not met by ``t_max``."""

    x_path: np.ndarray
    y_path: np.ndarray
    tau_couple: int | None
    coordinate_times: tuple | None = None

    @property
    def coupled(self) -> bool:
        return self.tau_couple is not None

    def to_text(self) -> str:
        """Line-oriented dump ``t x y`` (coordinates joined by commas on tori)."""
        def fmt(p):
            return ",".join(str(int(c)) for c in np.atleast_1d(p))
        return "".join(f"{t} {fmt(x)} {fmt(y)}\n" for t, (x, y) in enumerate(zip(self.x_path, self.y_path)))


def cycle_coupling_run(n: int, x0: int, y0: int, seed: int, t_max: int | None = None,
                       stop_at_coupling: bool = True) -> CoupledTrajectory:
    """Coupled lazy walks on ``C_n`` where exactly one walker moves per step.

    Before meeting one of the four moves (X holds, Y +-1) or (X +-1, Y holds)
    is chosen with probability 1/4, so the clockwise difference performs a
    non-lazy simple random walk absorbed at ``{0, n}``.  After meeting both
    take the same lazy step.
    """
    if n < 3:
        raise ValueError("cycle coupling needs n >= 3")
    t_max = 100 * n * n if t_max is None else t_max
    rng = np.random.default_rng(seed)
    x, y = x0 % n, y0 % n
    xs, ys = [x], [y]
    tau = 0 if x == y else None
    for t in range(1, t_max + 1):
        if tau is not None and stop_at_coupling:
            break
        if tau is None:
            dx, dy = CYCLE_MOVES[rng.integers(4)]
            x, y = (x + dx) % n, (y + dy) % n
            if x == y:
                tau = t
        else:
            step = LAZY_STEP[rng.integers(4)]
            x = y = (x + step) % n
        xs.append(x)
        ys.append(y)
    return CoupledTrajectory(np.array(xs), np.array(ys), tau)


def cycle_coupling_times(n: int, k: int, runs: int, seed: int, t_max: int | None = None) -> np.ndarray:
    """Coupling times of many independent runs started at clockwise distance ``k``.

    Returned as float with ``inf`` for runs still open at ``t_max``.
    """
    t_max = 100 * n * n if t_max is None else t_max
    rng = np.random.default_rng(seed)
    D = np.full(runs, k % n)
    tau = np.where(D == 0, 0.0, np.inf)
    alive = np.flatnonzero(D != 0)
    for t in range(1, t_max + 1):
        if not alive.size:
            break
        D[alive] += rng.choice((-1, 1), size=alive.size)
        hit = (D[alive] == 0) | (D[alive] == n)
        tau[alive[hit]] = t
        alive = alive[~hit]
    return tau


def gamblers_ruin_paths(n: int, k: int, runs: int, horizon: int, seed: int) -> np.ndarray:
    """Stopped paths ``D_{t ^ tau}`` of the difference walk, shape ``(runs, horizon + 1)``."""
    rng = np.random.default_rng(seed)
    out = np.empty((runs, horizon + 1), dtype=np.int64)
    D = np.full(runs, k)
    out[:, 0] = D
    for t in range(1, horizon + 1):
        live = (D > 0) & (D < n)
        D = D + live * rng.choice((-1, 1), size=runs)
        out[:, t] = D
    return out


def cycle_coupling_tail(n: int, k: int, t_max: int) -> np.ndarray:
    """Exact ``P_k[tau_couple > t]`` for the cycle coupling, ``t = 0..t_max``."""
    law = np.zeros(n + 1)
    law[k % n if k % n else 0] = 1.0
    tail = np.empty(t_max + 1)
    for t in range(t_max + 1):
        tail[t] = law[1:n].sum()
        inner = law[1:n].copy()
        law[1:n] = 0.0
        law[0:n - 1] += 0.5 * inner
        law[2:n + 1] += 0.5 * inner
    return tail


def torus_coupling_run(n: int, d: int, x0, y0, seed: int, t_max: int | None = None,
                       stop_at_coupling: bool = True) -> CoupledTrajectory:
    """Coordinatewise coupling of two lazy walks on ``Z_n^d``.

    Each step picks a uniform coordinate; if the walks agree there both take
    the same lazy increment, otherwise the cycle coupling moves exactly one of
    them.  ``coordinate_times[i]`` is the first time coordinate ``i`` agrees.
    """
    if n < 3 or d < 1:
        raise ValueError("torus coupling needs n >= 3, d >= 1")
    t_max = 100 * n * n if t_max is None else t_max
    rng = np.random.default_rng(seed)
    x = np.array(x0, dtype=int) % n
    y = np.array(y0, dtype=int) % n
    if x.shape != (d,) or y.shape != (d,):
        raise ValueError("starting points must have d coordinates")
    ctimes = [0 if x[i] == y[i] else None for i in range(d)]
    xs, ys = [x.copy()], [y.copy()]
    tau = 0 if all(c is not None for c in ctimes) else None
    for t in range(1, t_max + 1):
        if tau is not None and stop_at_coupling:
            break
        i = rng.integers(d)
        move = rng.integers(4)
        if x[i] == y[i]:
            x[i] = y[i] = (x[i] + LAZY_STEP[move]) % n
        else:
            dx, dy = CYCLE_MOVES[move]
            x[i] = (x[i] + dx) % n
            y[i] = (y[i] + dy) % n
            if x[i] == y[i]:
                ctimes[i] = t
                if tau is None and all(c is not None for c in ctimes):
                    tau = t
        xs.append(x.copy())
        ys.append(y.copy())
    return CoupledTrajectory(np.array(xs), np.array(ys), tau, tuple(ctimes))


def torus_coupling_times(n: int, d: int, diff, runs: int, seed: int,
                         t_max: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized torus coupling from coordinate differences ``diff``.

    Returns ``(tau, coord_tau)`` with shapes ``(runs,)`` and ``(runs, d)``;
    ``inf`` marks runs or coordinates still open at ``t_max``.
    """
    t_max = 100 * n * n if t_max is None else t_max
    rng = np.random.default_rng(seed)
    D = np.tile(np.array(diff, dtype=int) % n, (runs, 1))
    ctau = np.where(D == 0, 0.0, np.inf)
    rows = np.arange(runs)
    for t in range(1, t_max + 1):
        open_ = np.isinf(ctau).any(axis=1)
        if not open_.any():
            break
        i = rng.integers(d, size=runs)
        step = rng.choice((-1, 1), size=runs)
        active = open_ & np.isinf(ctau[rows, i])
        D[rows[active], i[active]] += step[active]
        Di = D[rows, i]
        hit = active & ((Di == 0) | (Di == n))
        ctau[rows[hit], i[hit]] = t
    return ctau.max(axis=1), ctau


def torus_coupling_tail(n: int, d: int, diff, t_max: int) -> np.ndarray:
    """Exact ``P[tau_couple > t]`` for the torus coupling by evolving the law of
    the coordinate differences (absorbing at 0 per coordinate)."""
    shape = (n,) * d
    law = np.zeros(shape)
    law[tuple(np.array(diff) % n)] = 1.0
    tail = np.empty(t_max + 1)
    for t in range(t_max + 1):
        coupled = law[(0,) * d]
        tail[t] = 1.0 - coupled
        new = np.zeros(shape)
        for i in range(d):
            sl = [slice(None)] * d
            sl[i] = 0
            zero_i = law[tuple(sl)]
            moving = law.copy()
            moving[tuple(sl)] = 0.0
            new[tuple(sl)] += zero_i / d
            new += (np.roll(moving, 1, axis=i) + np.roll(moving, -1, axis=i)) / (2 * d)
        law = new
    return tail


@dataclass(frozen=True)
class SSTRecord:
    """Outcome of one strong stationary time run.

    ``first_halting_visit`` is the first time the halting state was occupied
    at or before ``tau`` (None if it was not).
    """

    tau: int
    state_at_tau: int
    halting_state: int | None = None
    first_halting_visit: int | None = None
    extra: dict = field(default_factory=dict, compare=False)


def hypercube_refresh_sst(d: int, x0: int, seed: int) -> SSTRecord:
    """Refresh representation of the lazy walk on ``{0,1}^d``.

    Each step picks a uniform coordinate and overwrites it with a fair bit;
    ``tau`` is the first time every coordinate has been picked and the
    antipode of ``x0`` is a halting state for it.
    """
    if d < 1:
        raise ValueError("d >= 1 required")
    rng = np.random.default_rng(seed)
    full = (1 << d) - 1
    antipode = x0 ^ full
    x, chosen, t = x0, 0, 0
    first = 0 if x == antipode else None
    while chosen != full:
        t += 1
        i = int(rng.integers(d))
        bit = int(rng.integers(2))
        x = (x & ~(1 << i)) | (bit << i)
        chosen |= 1 << i
        if first is None and x == antipode:
            first = t
    return SSTRecord(t, x, antipode, first)


def hypercube_refresh_times(d: int, runs: int, seed: int) -> np.ndarray:
    """Vectorized ``tau_refresh`` samples (coupon collector over ``d`` coordinates)."""
    rng = np.random.default_rng(seed)
    full = (1 << d) - 1
    chosen = np.zeros(runs, dtype=np.int64)
    tau = np.zeros(runs, dtype=np.int64)
    alive = np.arange(runs)
    t = 0
    while alive.size:
        t += 1
        chosen[alive] |= np.left_shift(1, rng.integers(d, size=alive.size))
        done = chosen[alive] == full
        tau[alive[done]] = t
        alive = alive[~done]
    return tau


def coupon_collector_tail(d: int, t: int) -> float:
    """``P[tau_refresh > t] = sum_{j>=1} (-1)^{j+1} C(d, j) (1 - j/d)^t``."""
    return float(sum((-1) ** (j + 1) * comb(d, j) * (1 - j / d) ** t for j in range(1, d + 1)))


class SeparationOptimalSST:
    """Randomized stopping rule whose tail equals the separation profile.

    With ``a_t = 1 - s_x(t)`` and ``mu_t = P^t(x, .)``, a walker that has not
    stopped and sits at ``y`` at time ``t`` stops with probability
    ``(a_t - a_{t-1}) pi(y) / (mu_t(y) - a_{t-1} pi(y))``.  Stopped mass then
    has law ``a_t pi`` at every time, so the position at the stop is
    stationary and independent of the stopping time and
    ``P_x[tau > t] = s_x(t)``.  Profiles are computed from exact deviations
    and cached per start.
    """

    def __init__(self, chain: FiniteChain):
        if np.any(chain.pi <= 0):
            raise ValueError("stationary law must be positive")
        self.chain = chain
        self._hazard: dict[int, list[np.ndarray]] = {}
        self._state: dict[int, tuple] = {}

    def _extend(self, x: int, t: int) -> None:
        pi = self.chain.pi
        haz = self._hazard.setdefault(x, [])
        if x not in self._state:
            D = -pi.copy()
            D[x] += 1.0
            s_prev = float(np.max(-D / pi))
            self._state[x] = (D, s_prev)
            haz.append(np.zeros_like(pi) if s_prev > 0 else np.ones_like(pi))
        D, s_prev = self._state[x]
        while len(haz) <= t:
            D = np.asarray(D @ self.chain.P)
            D -= D.sum() * pi
            s_now = min(s_prev, float(np.max(-D / pi)))
            num = (s_prev - s_now) * pi
            den = D + s_prev * pi
            with np.errstate(divide="ignore", invalid="ignore"):
                h = np.where(den > 1e-300, num / den, 1.0 if s_now <= 0 else 0.0)
            haz.append(np.clip(h, 0.0, 1.0))
            s_prev = s_now
        self._state[x] = (D, s_prev)

    def hazard(self, x: int, t: int, y: int) -> float:
        self._extend(x, t)
        return float(self._hazard[x][t][y])


def lamplighter_sst_sample(g: Graph, runs: int, seed: int, t_cap: int = 10 ** 6):
    """Simulate the ``Z_2 wr G`` walk from (all lamps off, marker 0) up to
    ``tau = tau_cov + tau_G(X_{tau_cov})``.

    ``tau_G`` is the separation-optimal base stopping rule restarted at the
    cover time.  Returns integer arrays ``tau``, ``tau_cov``, ``state_at_tau``
    (wreath encoding) and ``lamps_at_cov`` (lamp code at the cover time).
    """
    n = g.n_vertices
    if n > SST_GRAPH_LIMIT:
        raise UnsupportedError(f"separation-optimal base SST tabulated only for |G| <= {SST_GRAPH_LIMIT}")
    if n < 2:
        raise UnsupportedError("base graph needs at least two vertices")
    base = lazy_srw(g)
    rule = SeparationOptimalSST(base)
    cum = np.cumsum(base.dense(), axis=1)
    cum[:, -1] = 1.0
    rng = np.random.default_rng(seed)
    full = (1 << n) - 1
    out = {k: np.empty(runs, dtype=np.int64) for k in ("tau", "tau_cov", "state_at_tau", "lamps_at_cov")}
    for r in range(runs):
        lamps, x, seen, t = 0, 0, 1, 0
        while seen != full:
            t += 1
            y = int(np.searchsorted(cum[x], rng.random(), side="right"))
            lamps = (lamps & ~(1 << x)) | (int(rng.integers(2)) << x)
            lamps = (lamps & ~(1 << y)) | (int(rng.integers(2)) << y)
            x = y
            seen |= 1 << y
            if t > t_cap:
                raise RuntimeError("cover phase exceeded the step cap")
        out["tau_cov"][r] = t
        out["lamps_at_cov"][r] = lamps
        z, s = x, 0
        while rng.random() >= rule.hazard(z, s, x):
            t += 1
            s += 1
            y = int(np.searchsorted(cum[x], rng.random(), side="right"))
            lamps = (lamps & ~(1 << x)) | (int(rng.integers(2)) << x)
            lamps = (lamps & ~(1 << y)) | (int(rng.integers(2)) << y)
            x = y
            if s > t_cap:
                raise RuntimeError("base stopping phase exceeded the step cap")
        out["tau"][r] = t
        out["state_at_tau"][r] = lamps + x * (1 << n)
    return out


def lamplighter_sst_run(g: Graph, seed: int) -> SSTRecord:
    res = lamplighter_sst_sample(g, 1, seed)
    return SSTRecord(int(res["tau"][0]), int(res["state_at_tau"][0]), None, None,
                     {"tau_cov": int(res["tau_cov"][0]), "lamps_at_cov": int(res["lamps_at_cov"][0])})


def lamplighter_sep_lower(g: Graph, t_grid, x0: int = 0, tol: float = 1e-10) -> Table:
    """Exact wreath separation from (lamps off, ``x0``) against ``P[tau_cov > t]``."""
    t_grid = np.asarray(sorted(set(int(t) for t in t_grid)))
    chain = lamplighter_chain(g)
    start = encode_lamp_state([0] * g.n_vertices, x0)
    tail = cover_time_tail(lazy_srw(g), x0, int(t_grid.max()))
    rows = []
    for t in t_grid:
        D = deviations_at(chain, int(t), [start])[0]
        sep = float(np.max(-D / chain.pi))
        rows.append({"t": int(t), "separation": sep, "cover_tail": float(tail[t]),
                     "ok": bool(sep >= tail[t] - tol)})
    return Table.from_rows(rows)


__all__ = [
    "CoupledTrajectory", "SSTRecord", "SeparationOptimalSST", "coupon_collector_tail",
    "cycle_coupling_run", "cycle_coupling_tail", "cycle_coupling_times",
    "gamblers_ruin_paths", "hypercube_refresh_sst", "hypercube_refresh_times",
    "lamplighter_sep_lower", "lamplighter_sst_run", "lamplighter_sst_sample",
    "torus_coupling_run", "torus_coupling_tail", "torus_coupling_times",
]
