"""Command-line front end: ``mixlab <subcommand> [options]``.

Every run writes its result tables plus ``manifest.json`` into ``--out``.
Exit codes: 0 success, 2 usage or invalid parameters, 3 size cap exceeded,
4 a checked inequality was violated.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from ._errors import MixlabError, SizeCapError
from .reporting import Table

EXIT_OK, EXIT_USAGE, EXIT_SIZE_CAP, EXIT_VIOLATION = 0, 2, 3, 4


# helpers

def _graph(args):
    from . import graph_builders as gb

    kind = args.graph
    if kind == "cycle":
        return gb.cycle(args.n)
    if kind == "torus":
        return gb.torus(args.n, args.d)
    if kind == "hypercube":
        return gb.hypercube(args.d)
    if kind == "complete":
        return gb.complete(args.n)
    if kind == "tree":
        return gb.dary_tree_ball(args.d, args.radius)
    raise ValueError(f"unknown graph {kind!r}")


def _chain(args):
    from .graph_builders import lazy_srw, simple_random_walk

    g = _graph(args)
    return g, (simple_random_walk(g) if args.nonlazy else lazy_srw(g))


def _add_graph(p, n=8, d=2):
    p.add_argument("--graph", choices=["cycle", "torus", "hypercube", "complete", "tree"], default="cycle")
    p.add_argument("--n", type=int, default=n, help="side length or vertex count")
    p.add_argument("--d", type=int, default=d, help="dimension, hypercube order or tree degree")
    p.add_argument("--radius", type=int, default=3, help="tree ball radius")
    p.add_argument("--nonlazy", action="store_true", help="use the non-lazy simple random walk")


def _summary(**kv) -> Table:
    return Table.from_rows([kv])


# subcommands; each returns {filename stem: Table} and a violation flag

def cmd_tv(args):
    from .chain_core import optimal_coupling, tv_distance, tv_max_over_sets, tv_positive_part

    rng = np.random.default_rng(args.seed)
    rows = []
    for i in range(args.pairs):
        mu, nu = rng.dirichlet(np.ones(args.n)), rng.dirichlet(np.ones(args.n))
        half = tv_distance(mu, nu)
        pos = tv_positive_part(mu, nu)
        sets, _ = tv_max_over_sets(mu, nu)
        coup = optimal_coupling(mu, nu).mismatch_probability
        spread = max(half, pos, sets, coup) - min(half, pos, sets, coup)
        rows.append({"pair": i, "half_l1": half, "positive_part": pos, "max_over_sets": sets,
                     "coupling_mismatch": coup, "ok": spread <= 1e-12})
    t = Table.from_rows(rows)
    return {"tv": t}, not all(t.column("ok"))


def cmd_mix(args):
    from .spectral_metrics import mixing_curve_table, t_mix, t_sep

    g, chain = _chain(args)
    tm, ts = t_mix(chain, args.eps), t_sep(chain, args.eps)
    curve = mixing_curve_table(chain, args.tmax or max(tm, ts))
    return {"curve": curve, "summary": _summary(graph=g.name, states=chain.n_states, eps=args.eps,
                                                 t_mix=tm, t_sep=ts)}, False


def cmd_spectrum(args):
    from .spectral_metrics import spectrum

    g, chain = _chain(args)
    s = spectrum(chain)
    ev = Table({"k": list(range(len(s.eigenvalues))), "eigenvalue": [float(v) for v in s.eigenvalues]})
    return {"eigenvalues": ev, "summary": _summary(graph=g.name, lambda2=s.lambda2, lambda_star=s.lambda_star,
                                                    t_rel=s.t_rel, gap=s.spectral_gap)}, False


def cmd_hitting(args):
    from .spectral_metrics import hitting_times

    g, chain = _chain(args)
    H = hitting_times(chain).table
    n = H.shape[0]
    t = Table({"x": np.repeat(np.arange(n), n).tolist(), "y": np.tile(np.arange(n), n).tolist(),
               "expected": H.ravel().tolist()})
    return {"hitting": t, "summary": _summary(graph=g.name, t_hit=float(H.max()))}, False


def cmd_cover(args):
    from .spectral_metrics import cover_time

    g, chain = _chain(args)
    val, se = cover_time(chain, args.method, args.samples, args.seed)
    return {"summary": _summary(graph=g.name, method=args.method, t_cov=val, stderr=se)}, False


def cmd_lamplighter(args):
    from .graph_builders import cycle, lamplighter_chain, lazy_srw
    from .spectral_metrics import cover_time, hitting_times, lamplighter_relaxation_time, t_mix

    rows, bad = [], False
    for n in range(args.n_min, args.n_max + 1):
        g = cycle(n)
        base = lazy_srw(g)
        tm = t_mix(lamplighter_chain(g, cap=args.cap))
        tcov = cover_time(base)[0]
        thit = hitting_times(base).t_hit
        trel = lamplighter_relaxation_time(g)
        ok = tcov / 12 <= tm <= 18 * tcov and trel <= 4 / np.log(2) * thit
        bad |= not ok
        rows.append({"n": n, "t_mix": tm, "t_cov": tcov, "t_hit": thit, "t_rel": trel,
                     "mix_over_cov": tm / tcov, "rel_over_hit": trel / thit, "ok": ok})
    return {"lamplighter": Table.from_rows(rows)}, bad


def cmd_coupling(args):
    from . import coupling_sst as cs

    if args.kind == "cycle":
        times = cs.cycle_coupling_times(args.n, args.k, args.runs, args.seed, args.tmax)
        exact = cs.cycle_coupling_tail(args.n, args.k, int(args.tmax or 100 * args.n ** 2))
        traj = cs.cycle_coupling_run(args.n, 0, args.k, args.seed, args.tmax)
        expected = args.k * (args.n - args.k)
    else:
        diff = [args.k] + [0] * (args.d - 1)
        times, _ = cs.torus_coupling_times(args.n, args.d, diff, args.runs, args.seed, args.tmax)
        exact = cs.torus_coupling_tail(args.n, args.d, diff, min(int(args.tmax or 100 * args.n ** 2), 4000))
        traj = cs.torus_coupling_run(args.n, args.d, [0] * args.d, diff, args.seed, args.tmax)
        expected = float("nan")
    finite = times[np.isfinite(times)]
    grid = np.unique(np.linspace(0, len(exact) - 1, 21).astype(int))
    tail = Table({"t": grid.tolist(), "exact_tail": exact[grid].tolist(),
                  "empirical_tail": [(times > t).mean() for t in grid]})
    summary = _summary(kind=args.kind, runs=args.runs, coupled=int(finite.size),
                       mean=float(finite.mean()) if finite.size else float("nan"),
                       stderr=float(finite.std(ddof=1) / np.sqrt(finite.size)) if finite.size > 1 else float("nan"),
                       expected=expected)
    return {"times": Table({"run": list(range(len(times))), "tau": times.tolist()}), "tail": tail,
            "summary": summary, "_trajectory": traj.to_text()}, False


def cmd_sst(args):
    from . import coupling_sst as cs
    from .graph_builders import complete, cycle

    if args.kind == "hypercube":
        tau = cs.hypercube_refresh_times(args.d, args.runs, args.seed)
        grid = list(range(0, int(3 * args.d * np.log(max(args.d, 2))) + args.d + 1))
        tail = Table({"t": grid, "empirical_tail": [float((tau > t).mean()) for t in grid],
                      "exact_tail": [cs.coupon_collector_tail(args.d, t) for t in grid]})
        return {"samples": Table({"run": list(range(args.runs)), "tau": tau.tolist()}), "tail": tail}, False
    g = cycle(args.n) if args.n >= 3 else complete(args.n)
    res = cs.lamplighter_sst_sample(g, args.runs, args.seed)
    samples = Table({"run": list(range(args.runs)), **{k: v.tolist() for k, v in res.items()}})
    sep = cs.lamplighter_sep_lower(g, range(1, args.tmax + 1))
    return {"samples": samples, "separation": sep}, not all(sep.column("ok"))


def cmd_vc(args):
    from .longrange import binomial_mixture_identity_check, vc_bound_check

    g, chain = _chain(args)
    ident = Table({"t": list(range(min(args.tmax, 30) + 1)),
                   "deviation": [binomial_mixture_identity_check(chain, t) for t in range(min(args.tmax, 30) + 1)]})
    viol = vc_bound_check(chain, g.distances(), args.tmax)
    return {"identity": ident, "violations": viol}, len(viol) > 0 or max(ident.column("deviation")) > 1e-10


def _model(args):
    from .group_walks import lamp_model, tree_model, zd_model

    return {"tree": tree_model, "zd": zd_model, "lamp": lamp_model}[args.model](args.d, args.lazy)


def cmd_speed(args):
    from .group_walks import speed_estimate

    m = _model(args)
    est = speed_estimate(m, args.steps, args.walks, args.seed, burn_in=args.burn_in)
    lo, hi = est.interval or (est.v_hat, est.v_hat)
    return {"summary": _summary(model=m.name, lazy=m.lazy, steps=args.steps, walks=args.walks,
                                burn_in=args.burn_in,
                                v_hat=est.v_hat, stderr=est.stderr, v_lower=lo, v_upper=hi)}, False


def cmd_entropy(args):
    from .group_walks import entropy_curve, kvv_cross_check

    m = _model(args)
    c = entropy_curve(m, args.nmax)
    kvv = kvv_cross_check(m, args.nmax, c)
    return {"entropy": c.to_table(), "kvv": kvv}, not (c.increments_monotone and all(kvv.column("ok")))


def cmd_geom(args):
    from .geometry_bounds import corollary_trel_diam, distance_bound_check, distance_moment_check, folner_ratio

    g, chain = _chain(args)
    rep = distance_moment_check(chain, g)
    cor = corollary_trel_diam(g, chain)
    fol = folner_ratio(args.k)
    fol_t = _summary(k=fol.k, theta=fol.theta, theta_sq=fol.theta ** 2, delta_k=fol.delta_k, ell=fol.ell,
                     m=fol.m, ratio=fol.ratio, bound=fol.bound, ok=fol.ok)
    dist = distance_bound_check(fol)
    cor_t = _summary(graph=g.name, t_rel=cor.t_rel, bound=cor.bound, t_mix=cor.t_mix,
                     mix_bound=cor.mix_bound, ok=cor.ok)
    bad = not (rep.ok and cor.ok and fol.ok and all(dist.column("ok")))
    return {"moments": rep.table, "corollary": cor_t, "folner": fol_t, "lattice_bound": dist}, bad


def cmd_adapted(args):
    from . import adapted_walks as aw

    if args.tool == "simulate":
        rule = aw.AdaptedRule(args.rule, {"eps": Fraction(args.eps).limit_denominator(10 ** 6)}
                              if args.rule == "max_coordinate" else {})
        s = aw.simulate_adapted(rule, args.steps, args.seed, returns_after=args.returns_after)
        return {"trajectory": s.to_table(),
                "summary": _summary(rule=args.rule, steps=args.steps, returns=s.returns,
                                    final_radius=float(s.radii[-1]), max_radius=float(s.radii.max()))}, False
    if args.tool == "excessive":
        r = aw.excessive_measure_check(aw.region_kernel, args.radius)
        return {"summary": _summary(radius=r.radius, max_column_sum=str(r.max_column_sum),
                                    origin_value=str(r.origin_value), ok=r.ok)}, not r.ok
    if args.tool == "lyapunov":
        M = np.array(json.loads(args.matrix), dtype=float)
        c = aw.lyapunov_condition(M)
        return {"summary": _summary(satisfied=c.satisfied, margin=c.margin)}, False
    if args.tool == "normalize":
        rng = np.random.default_rng(args.seed)
        rows = []
        for i in range(args.pairs):
            Ms = []
            for _ in range(2):
                Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
                Ms.append(Q @ np.diag(np.exp(rng.uniform(0, np.log(1e3), 3))) @ Q.T)
            r = aw.normalize_spd_pair(*Ms)
            rows.append({"pair": i, "margin1": r.margins[0], "margin2": r.margins[1],
                         "ok": min(r.margins) > 0})
        t = Table.from_rows(rows)
        return {"normalize": t}, not all(t.column("ok"))
    r = aw.superharmonicity_probe(aw.srw_measure(3), args.alpha, tuple(args.shells))
    return {"summary": _summary(alpha=args.alpha, worst=r.worst, worst_point=str(r.worst_point),
                                points=r.n_points, passed=r.passed)}, not r.passed


COMMANDS = {
    "tv": (cmd_tv, "total variation characterizations on random pairs"),
    "mix": (cmd_mix, "d(t), s(t) curves with t_mix and t_sep"),
    "spectrum": (cmd_spectrum, "eigenvalues and relaxation time"),
    "hitting": (cmd_hitting, "expected hitting time table"),
    "cover": (cmd_cover, "cover time, exact or Monte Carlo"),
    "lamplighter": (cmd_lamplighter, "wreath-product sweeps over cycles"),
    "coupling": (cmd_coupling, "cycle or torus coupling runs"),
    "sst": (cmd_sst, "strong stationary times on hypercube or lamplighter"),
    "vc": (cmd_vc, "Chebyshev identity and long-range bound sweeps"),
    "speed": (cmd_speed, "rate of escape of group walks"),
    "entropy": (cmd_entropy, "exact entropy curves and speed/entropy bridges"),
    "geom": (cmd_geom, "distance moments, diameter bounds, Folner ratio"),
    "adapted": (cmd_adapted, "adapted lattice walks and Lyapunov tools"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixlab", description="Markov chain mixing experiments.")
    parser.add_argument("--version", action="version", version=f"mixlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")
    ps = {}
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        ps[name] = p

    ps["tv"].add_argument("--n", type=int, default=10)
    ps["tv"].add_argument("--pairs", type=int, default=100)
    for name in ("mix", "spectrum", "hitting", "cover", "vc", "geom"):
        _add_graph(ps[name])
    ps["mix"].add_argument("--eps", type=float, default=0.25)
    ps["mix"].add_argument("--tmax", type=int, default=None)
    ps["cover"].add_argument("--method", choices=["exact", "monte_carlo"], default="exact")
    ps["cover"].add_argument("--samples", type=int, default=10000)
    ps["lamplighter"].add_argument("--n-min", type=int, default=3)
    ps["lamplighter"].add_argument("--n-max", type=int, default=6)
    ps["lamplighter"].add_argument("--cap", type=int, default=2 ** 20)
    p = ps["coupling"]
    p.add_argument("--kind", choices=["cycle", "torus"], default="cycle")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--k", type=int, default=4, help="initial clockwise distance in coordinate 0")
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--tmax", type=int, default=None)
    p = ps["sst"]
    p.add_argument("--kind", choices=["hypercube", "lamplighter"], default="hypercube")
    p.add_argument("--d", type=int, default=6)
    p.add_argument("--n", type=int, default=4, help="lamplighter base: cycle C_n, or K_2 when n = 2")
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--tmax", type=int, default=60)
    ps["vc"].add_argument("--tmax", type=int, default=50)
    for name in ("speed", "entropy"):
        p = ps[name]
        p.add_argument("--model", choices=["tree", "zd", "lamp"], default="tree")
        p.add_argument("--d", type=int, default=3)
        p.add_argument("--lazy", action="store_true")
    ps["speed"].add_argument("--steps", type=int, default=1000)
    ps["speed"].add_argument("--walks", type=int, default=1000)
    ps["speed"].add_argument("--burn-in", type=int, default=0,
                             help="measure increments after this many steps (tree and lattice models)")
    ps["entropy"].add_argument("--nmax", type=int, default=100)
    ps["geom"].add_argument("--k", type=int, default=20, help="Folner box side on Z^2")
    p = ps["adapted"]
    p.add_argument("--tool", choices=["simulate", "excessive", "lyapunov", "normalize", "probe"], default="simulate")
    p.add_argument("--rule", choices=["time_blocks", "first_visit", "region", "max_coordinate"], default="region")
    p.add_argument("--steps", type=int, default=10000)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--returns-after", type=int, default=0)
    p.add_argument("--radius", type=int, default=50)
    p.add_argument("--matrix", default="[[1,0,0],[0,1,0],[0,0,1]]", help="JSON covariance matrix")
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--shells", type=float, nargs="+", default=[25, 50, 100])
    return parser


def _started_at() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    ts = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


def _params(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "out", "seed")}


def write_outputs(out: Path, tables: dict, fmt: str) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for stem, obj in tables.items():
        if stem.startswith("_"):
            path = out / f"{stem[1:]}.txt"
            path.write_bytes(obj.encode())
        else:
            path = out / f"{stem}.{fmt}"
            text = obj.to_csv() if fmt == "csv" else obj.to_json()
            path.write_bytes(text.encode())
        written.append(path)
    return written


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    func = COMMANDS[args.command][0]
    out = Path(args.out)
    manifest = {"command": args.command, "version": __version__, "seed": args.seed,
                "params": _params(args), "started_at": _started_at()}
    try:
        tables, violated = func(args)
    except SizeCapError as exc:
        print(f"mixlab: size cap: {exc}", file=sys.stderr)
        return EXIT_SIZE_CAP
    except (MixlabError, ValueError) as exc:
        print(f"mixlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    write_outputs(out, tables, args.format)
    (out / "manifest.json").write_bytes((json.dumps(manifest, indent=1, sort_keys=True) + "\n").encode())
    if violated:
        print("mixlab: a checked inequality was violated; see outputs", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
