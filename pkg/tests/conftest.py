import sys

import numpy as np
import pytest
from hypothesis import settings

from mixlab.chain_core import FiniteChain

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def random_reversible_chain(rng, n, lazy=True, extra_edges=None):
    """Random weighted connected graph walk; reversible with pi proportional to weighted degree."""
    W = np.zeros((n, n))
    order = rng.permutation(n)
    for i in range(1, n):
        a, b = order[i], order[rng.integers(i)]
        W[a, b] = W[b, a] = rng.uniform(0.2, 1.0)
    for _ in range(n if extra_edges is None else extra_edges):
        a, b = rng.integers(n, size=2)
        if a != b:
            W[a, b] = W[b, a] = rng.uniform(0.2, 1.0)
    deg = W.sum(axis=1)
    P = W / deg[:, None]
    if lazy:
        P = 0.5 * (np.eye(n) + P)
    return FiniteChain.from_matrix(P, pi=deg / deg.sum())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one small, fast invocation per subcommand
CLI_SMOKE = {
    "tv": ["--n", "6", "--pairs", "20"],
    "mix": ["--graph", "cycle", "--n", "8"],
    "spectrum": ["--graph", "hypercube", "--d", "3"],
    "hitting": ["--graph", "cycle", "--n", "6"],
    "cover": ["--graph", "cycle", "--n", "5", "--method", "monte_carlo", "--samples", "200"],
    "lamplighter": ["--n-min", "3", "--n-max", "4"],
    "coupling": ["--kind", "torus", "--n", "5", "--runs", "50"],
    "sst": ["--kind", "lamplighter", "--n", "3", "--runs", "50", "--tmax", "20"],
    "vc": ["--graph", "cycle", "--n", "6", "--tmax", "10"],
    "speed": ["--model", "tree", "--d", "3", "--steps", "50", "--walks", "50"],
    "entropy": ["--model", "zd", "--d", "2", "--nmax", "10"],
    "geom": ["--graph", "cycle", "--n", "8", "--k", "10"],
    "adapted": ["--tool", "simulate", "--rule", "first_visit", "--steps", "200"],
}


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, 18):
        if number not in results:
            terminalreporter.write_line(f"criterion {number:2d}: NOT RUN")
            continue
        title, ok, detail = results[number]
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
