from itertools import product
from math import comb, log

import numpy as np
import pytest

from conftest import random_reversible_chain
from mixlab._errors import HorizonError, UnsupportedError
from mixlab.geometry_bounds import (
    box_autocorrelations, box_boundary_ratio, corollary_trel_diam, dirichlet_form,
    dirichlet_forms, distance_bound_check, distance_moment_check, folner_ratio,
    line_autocorrelations, second_difference_check, second_eigenfunction,
)
from mixlab.graph_builders import complete, cycle, dary_tree_ball, hypercube, lazy_srw, torus


def grid_autocorrelation(k, d, j):
    """``<P^j f, f>`` for SRW on ``Z^d`` by evolving the box indicator on an explicit grid."""
    pad = j + 1
    size = k + 2 * pad
    f = np.zeros((size,) * d)
    f[(slice(pad, pad + k),) * d] = 1.0
    f /= np.sqrt(k ** d)
    g = f.copy()
    for _ in range(j):
        new = np.zeros_like(g)
        for axis in range(d):
            new += (np.roll(g, 1, axis) + np.roll(g, -1, axis)) / (2 * d)
        g = new
    return float((g * f).sum())


# Dirichlet forms

def test_forms_match_definition(rng):
    chain = random_reversible_chain(rng, 8)
    f = rng.normal(size=8)
    P = chain.dense()
    for n in range(6):
        direct = f @ (f - np.linalg.matrix_power(P, n) @ f)
        assert dirichlet_form(chain, f, n) == pytest.approx(direct, abs=1e-12)
    assert np.allclose(dirichlet_forms(chain, f, 5), [dirichlet_form(chain, f, n) for n in range(6)])
    with pytest.raises(ValueError):
        dirichlet_form(chain, f, -1)
    with pytest.raises(ValueError):
        dirichlet_form(chain, np.full(8, np.nan), 1)


def test_eigenfunction_forms_geometric():
    chain = lazy_srw(cycle(10))
    lam, f = second_eigenfunction(chain)
    assert np.allclose(chain.apply(f), lam * f)
    Q = dirichlet_forms(chain, f, 20)
    assert np.allclose(Q, 1 - lam ** np.arange(21), atol=1e-12)


def test_indicator_on_c4_by_hand():
    chain = lazy_srw(cycle(4))
    f = np.array([1.0, 0, 0, 0])
    # Q_1 = f.f - (Pf).f = 1 - 1/2; Q_2: P^2(0,0) = 1/4 + 1/16 + 1/16 = 3/8
    assert dirichlet_form(chain, f, 1) == pytest.approx(0.5)
    assert dirichlet_form(chain, f, 2) == pytest.approx(1 - 3 / 8)


def test_second_eigenfunction_requires_uniform():
    P = np.array([[0.5, 0.5, 0], [0.25, 0.5, 0.25], [0, 0.5, 0.5]])
    from mixlab.chain_core import FiniteChain
    with pytest.raises(UnsupportedError):
        second_eigenfunction(FiniteChain.from_matrix(P))


@pytest.mark.parametrize("seed", range(3))
def test_second_difference_bound(seed):
    rng = np.random.default_rng(seed)
    chain = random_reversible_chain(rng, 9)
    tab = second_difference_check(chain, rng.normal(size=9), 25)
    assert all(tab.column("ok"))


# distance moments

@pytest.mark.parametrize("g", [cycle(16), hypercube(5), torus(4, 2), cycle(9)])
def test_distance_moment_bounds(g):
    rep = distance_moment_check(lazy_srw(g), g)
    assert rep.ok
    n = np.array(rep.table.column("n"))
    assert n.max() == int(np.floor(rep.t_rel))


def test_distance_moment_exact_values():
    g = cycle(8)
    chain = lazy_srw(g)
    rep = distance_moment_check(chain, g, n_grid=[1, 2])
    # E rho^2 after one lazy step is 1/2; after two: P(|X_2| = 1) = 1/2, P(|X_2| = 2) = 1/8
    assert rep.table.column("E_rho2")[0] == pytest.approx(0.5)
    assert rep.table.column("E_rho2")[1] == pytest.approx(0.5 + 4 * 0.125)
    assert rep.table.column("lemma_bound")[0] == pytest.approx(0.5)


def test_distance_moment_rejects_non_transitive():
    g = dary_tree_ball(3, 2)
    with pytest.raises(UnsupportedError):
        distance_moment_check(lazy_srw(g), g)


@pytest.mark.parametrize("g", [cycle(16), cycle(32), hypercube(5), torus(4, 2), complete(10)])
def test_diameter_corollary(g):
    res = corollary_trel_diam(g)
    assert res.ok and res.margin >= 0
    t_rel, bound, margin = res
    assert bound == 2 * max(g.degree) * g.diameter() ** 2
    assert res.mix_bound == pytest.approx(bound * log(g.n_vertices))


# lattice boxes

def test_line_autocorrelations_closed_form():
    k, h = 5, 8
    c = line_autocorrelations(k, h)
    for m in range(h + 1):
        # <P^m g, g> = (1/k) sum over pairs in the box of P(S_m = b - a)
        total = 0.0
        for a in range(k):
            for b in range(k):
                s = b - a
                if (m + s) % 2 == 0 and abs(s) <= m:
                    total += comb(m, (m + s) // 2) / 2 ** m
        assert c[m] == pytest.approx(total / k, abs=1e-14)


@pytest.mark.parametrize("k,d", [(3, 2), (4, 2), (2, 3)])
def test_box_autocorrelations_match_grid(k, d):
    c = box_autocorrelations(k, d, 8)
    for j in range(9):
        assert c[j] == pytest.approx(grid_autocorrelation(k, d, j), abs=1e-13)


def test_lazy_autocorrelations():
    c = box_autocorrelations(3, 2, 6)
    lazy = box_autocorrelations(3, 2, 6, lazy=True)
    for j in range(7):
        assert lazy[j] == pytest.approx(sum(comb(j, i) * c[i] for i in range(j + 1)) / 2 ** j)


def test_boundary_ratio_counts_edges():
    k, d = 4, 2
    box = set(product(range(k), repeat=d))
    boundary = sum(1 for x in box for i in range(d) for s in (1, -1)
                   if tuple(x[j] + (s if j == i else 0) for j in range(d)) not in box)
    assert box_boundary_ratio(k, d) == pytest.approx(boundary / len(box))


@pytest.mark.parametrize("k", [10, 20])
def test_folner_construction(k):
    res = folner_ratio(k, 2)
    assert res.ok
    assert res.theta ** 2 <= res.delta_k
    assert 2 ** res.ell * res.theta <= 0.5 <= 2 ** (res.ell + 1) * res.theta
    assert res.m >= res.ell
    assert res.ratio <= 32 * res.theta


def test_folner_theta_shrinks_with_box():
    t10 = folner_ratio(10).theta
    t20 = folner_ratio(20).theta
    # theta^2 = 1 - 2 c_1 + c_2 scales like the boundary ratio, which halves
    assert (t20 / t10) ** 2 == pytest.approx(0.5, rel=0.1)


def test_folner_errors():
    with pytest.raises(HorizonError):
        folner_ratio(20, horizon=8)
    with pytest.raises(ValueError):
        folner_ratio(0)
    with pytest.raises(ValueError):
        folner_ratio(1)


def test_lattice_distance_bound():
    tab = distance_bound_check(folner_ratio(20), n_max=10)
    assert all(tab.column("ok"))
