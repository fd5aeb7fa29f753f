from itertools import product
from math import cos, pi as PI

import numpy as np
import pytest

from conftest import random_reversible_chain
from mixlab._errors import ConvergenceError, SizeCapError, UnsupportedError
from mixlab.chain_core import FiniteChain, dist_from_stationarity
from mixlab.graph_builders import (
    complete, cycle, generalized_lamplighter_chain, hypercube, lamplighter_chain, lazy_srw,
    simple_random_walk,
)
from mixlab.spectral_metrics import (
    cover_time, cover_time_exact, cover_time_samples, cover_time_tail, expected_hitting_time,
    hitting_times, lamplighter_lambda2, lamplighter_relaxation_time, mixing_curve_table,
    relaxation_time, short_range_check, spectral_inequality_report, spectrum, t_mix, t_sep,
)


def path_chain(n):
    """Simple walk on ``0..n`` reflected at the ends."""
    P = np.zeros((n + 1, n + 1))
    P[0, 1] = P[n, n - 1] = 1.0
    for k in range(1, n):
        P[k, k - 1] = P[k, k + 1] = 0.5
    return FiniteChain.from_matrix(P)


# spectra

@pytest.mark.parametrize("n", [5, 8, 13])
def test_lazy_cycle_circulant_eigenvalues(n):
    ev = np.sort(spectrum(lazy_srw(cycle(n))).eigenvalues)
    oracle = np.sort([0.5 + 0.5 * cos(2 * PI * j / n) for j in range(n)])
    assert np.allclose(ev, oracle, atol=1e-12)


@pytest.mark.parametrize("d", [2, 3, 5, 8])
def test_lazy_hypercube_gap(d):
    summary = spectrum(lazy_srw(hypercube(d)))
    assert summary.lambda2 == pytest.approx(1 - 1 / d, abs=1e-12)
    assert summary.t_rel == pytest.approx(d, rel=1e-10)


def test_k2_spectrum():
    ev = spectrum(simple_random_walk(complete(2))).eigenvalues
    assert np.allclose(sorted(ev), [-1, 1])
    lazy = spectrum(lazy_srw(complete(2)))
    assert np.allclose(sorted(lazy.eigenvalues), [0, 1])
    assert lazy.t_rel == pytest.approx(1.0)


def test_nonreversible_rejected():
    chain = FiniteChain.from_matrix([[0, 1, 0], [0, 0, 1], [1, 0, 0]])
    with pytest.raises(UnsupportedError):
        spectrum(chain)


@pytest.mark.parametrize("g", [complete(2), cycle(3), cycle(5), hypercube(2)])
def test_lamplighter_lambda2_matches_full_spectrum(g):
    direct = spectrum(lamplighter_chain(g)).lambda2
    assert lamplighter_lambda2(g) == pytest.approx(direct, abs=1e-10)
    assert lamplighter_relaxation_time(g) == pytest.approx(1 / (1 - direct), rel=1e-8)


def test_relaxation_time_random(rng):
    chain = random_reversible_chain(rng, 12)
    P = chain.dense()
    s = np.sqrt(chain.pi)
    w = np.sort(np.linalg.eigvalsh((s[:, None] * P) / s[None, :]))
    assert relaxation_time(chain) == pytest.approx(1 / (1 - w[-2]), rel=1e-9)


# mixing and separation times

def test_t_mix_first_crossing(rng):
    chain = random_reversible_chain(rng, 9)
    t = t_mix(chain, 0.1)
    assert dist_from_stationarity(chain, t)[0] <= 0.1
    assert t == 0 or dist_from_stationarity(chain, t - 1)[0] > 0.1


@pytest.mark.parametrize("seed", range(4))
def test_t_mix_below_t_sep(seed):
    chain = random_reversible_chain(np.random.default_rng(seed), 10)
    for eps in (0.25, 0.1):
        assert t_mix(chain, eps) <= t_sep(chain, eps)


def test_t_mix_validation():
    chain = lazy_srw(cycle(20))
    with pytest.raises(ValueError):
        t_mix(chain, 1.5)
    with pytest.raises(ConvergenceError):
        t_mix(chain, 0.25, t_cap=5)


def test_mixing_curve_table_columns():
    tab = mixing_curve_table(lazy_srw(cycle(6)), 10)
    assert list(tab.column("t")) == list(range(11))
    assert np.all(np.diff(tab.column("d")) <= 1e-15)


# hitting times

@pytest.mark.parametrize("n", [2, 7, 20, 50])
def test_gamblers_ruin_hitting(n):
    h = expected_hitting_time(path_chain(n), [0, n])
    assert np.allclose(h, [k * (n - k) for k in range(n + 1)], atol=1e-9)


def test_cycle_hitting_times():
    n = 9
    table = hitting_times(simple_random_walk(cycle(n))).table
    for x in range(n):
        k = (x - 0) % n
        assert table[x, 0] == pytest.approx(k * (n - k), abs=1e-9)


def test_hitting_unreachable_rejected():
    P = np.array([[1.0, 0.0], [0.5, 0.5]])
    chain = FiniteChain.from_matrix(P, pi=[1.0, 0.0])
    with pytest.raises(ValueError):
        expected_hitting_time(chain, [1])


# cover times

def test_cover_time_k_n_coupon_collector():
    n = 6
    # non-lazy walk on K_n: each new vertex arrives at rate (n - 1 - seen + 1)/(n - 1)
    oracle = sum((n - 1) / (n - j) for j in range(1, n))
    assert np.allclose(cover_time_exact(simple_random_walk(complete(n))), oracle)


def test_cover_time_path_of_cycle():
    # simple walk on C_n covers when the range reaches n - 1, expected n(n-1)/2
    n = 7
    assert cover_time(simple_random_walk(cycle(n)))[0] == pytest.approx(n * (n - 1) / 2)


def test_cover_tail_mean_matches_exact():
    chain = lazy_srw(cycle(5))
    tail = cover_time_tail(chain, 0, 2000)
    assert tail.sum() == pytest.approx(cover_time_exact(chain)[0], rel=1e-9)
    assert tail[0] == 1.0 and np.all(np.diff(tail) <= 1e-15)


def test_cover_monte_carlo_agrees():
    chain = lazy_srw(cycle(5))
    exact = cover_time_exact(chain)[0]
    s = cover_time_samples(chain, 0, 20000, seed=3)
    se = s.std(ddof=1) / np.sqrt(s.size)
    assert abs(s.mean() - exact) < 4 * se
    assert np.array_equal(s, cover_time_samples(chain, 0, 20000, seed=3))


def test_cover_size_cap():
    with pytest.raises(SizeCapError):
        cover_time_exact(lazy_srw(cycle(15)))


# inequality reports

def test_spectral_inequality_report_c6():
    tab = spectral_inequality_report(lazy_srw(cycle(6)), 80)
    assert all(tab.column("ok"))
    lam_star = 0.75
    assert tab.column("d_root")[-1] == pytest.approx(lam_star, abs=0.02)


@pytest.mark.parametrize("seed", range(3))
def test_spectral_inequality_report_random(seed):
    chain = random_reversible_chain(np.random.default_rng(seed), 15)
    assert all(spectral_inequality_report(chain, 60).column("ok"))


def test_short_range_check_passes():
    assert short_range_check(lazy_srw(cycle(8)), 2, 100) == []
    assert short_range_check(lazy_srw(hypercube(4)), 4, 50) == []


def test_short_range_check_reports_violation():
    # max_degree understated on purpose so the bound becomes tiny
    out = short_range_check(simple_random_walk(cycle(4)), 0.1, 5)
    assert out and all(v.lhs > v.rhs for v in out)


# generalized lamplighter stability

def wreath_spectrum_oracle(g, lamp):
    """Union over lamp-eigenvalue labelings ``m`` of the spectra of ``M P M``.

    A product of lamp eigenfunctions times ``u(x)`` is mapped by the wreath
    step to the same product times ``(M P M u)(x)`` with ``M = diag(m)``.
    """
    mu = np.linalg.eigvalsh(lamp.dense()) if np.allclose(lamp.pi, lamp.pi[0]) else spectrum(lamp).eigenvalues
    base = lazy_srw(g)
    r = np.sqrt(base.pi)
    S = r[:, None] * base.dense() / r[None, :]
    out = []
    for labels in product(range(len(mu)), repeat=g.n_vertices):
        m = mu[list(labels)]
        out.extend(np.linalg.eigvalsh(m[:, None] * S * m[None, :]))
    return np.sort(out)[::-1]


def test_generalized_wreath_spectrum_oracle_small():
    lamp = lazy_srw(cycle(3))
    for n in (3, 4):
        chain = generalized_lamplighter_chain(cycle(n), lamp)
        assert np.allclose(spectrum(chain).eigenvalues, wreath_spectrum_oracle(cycle(n), lamp), atol=1e-10)


@pytest.mark.parametrize("n", [6, 7])
def test_sparse_spectrum_matches_oracle(n):
    lamp = lazy_srw(cycle(3))
    summary = spectrum(generalized_lamplighter_chain(cycle(n), lamp))
    assert not summary.complete
    assert summary.lambda2 == pytest.approx(wreath_spectrum_oracle(cycle(n), lamp)[1], abs=1e-10)


def test_generalized_lamplighter_ratio_band():
    lamp = lazy_srw(cycle(3))
    t_rel_h = spectrum(lamp).t_rel
    ratios = []
    for n in range(3, 8):
        g = cycle(n)
        t_rel = spectrum(generalized_lamplighter_chain(g, lamp)).t_rel
        t_hit = hitting_times(lazy_srw(g)).t_hit
        ratios.append(t_rel / (t_hit + n * t_rel_h))
    ratios = np.array(ratios)
    assert np.all((0.02 <= ratios) & (ratios <= 50))
    assert ratios.max() / ratios.min() < 4


def test_lamplighter_t_mix_log_scale():
    # sanity: wreath mixing exceeds the base mixing by a cover-time-sized factor
    g = cycle(4)
    assert t_mix(lamplighter_chain(g)) > t_mix(lazy_srw(g))
