"""Command line entry point.

Examples
--------
    avgcons graph inspect --graph-file g.graph
    avgcons run --algorithm eigenstep --complete 3 --values 1,2,3 --out out/k3
    avgcons compare --algorithms fixed-step,nag,eigenstep --random 20 --seed 4 --out out/cmp
    avgcons diffuse --random 10 --seed 1 --mu 0.05 --steps 500 --out out/lms
"""

from __future__ import annotations

import argparse
import json
import sys

from .diffusion import PROJECTORS
from .errors import ConsensusError
from .harness import (
    ALGORITHMS,
    AlgorithmSpec,
    DiffusionConfig,
    ExperimentConfig,
    GraphSpec,
    InitSpec,
    inspect_graph,
    run_comparison,
    run_diffusion_experiment,
    run_experiment,
)


def _add_graph_args(p: argparse.ArgumentParser) -> None:
    grp = p.add_argument_group("graph source (pick one)")
    src = grp.add_mutually_exclusive_group(required=True)
    src.add_argument("--graph-file", metavar="PATH", help="graph in the text edge-list format")
    src.add_argument("--appendix-a", action="store_true", help="bundled 20-node directed fixture")
    src.add_argument("--random", type=int, metavar="N", help="connected Erdos-Renyi graph on N nodes")
    src.add_argument("--path", type=int, metavar="N", help="path graph")
    src.add_argument("--complete", type=int, metavar="N", help="complete graph")
    src.add_argument("--star", type=int, metavar="N", help="star graph centred on node N")
    grp.add_argument("--edge-prob", type=float, help="edge probability for --random (default 2 ln N / N)")
    grp.add_argument("--seed", type=int, help="seed for --random (required with it)")


def _graph_spec(a) -> GraphSpec:
    if a.graph_file:
        return GraphSpec(kind="file", path=a.graph_file)
    if a.appendix_a:
        return GraphSpec(kind="appendix-a")
    if a.random is not None:
        if a.seed is None:
            raise SystemExit("error: --random needs --seed")
        return GraphSpec(kind="random", n=a.random, p=a.edge_prob, seed=a.seed)
    for kind in ("path", "complete", "star"):
        n = getattr(a, kind)
        if n is not None:
            return GraphSpec(kind=kind, n=n)
    raise SystemExit("error: no graph source")


def _add_init_args(p: argparse.ArgumentParser) -> None:
    grp = p.add_argument_group("initial values")
    src = grp.add_mutually_exclusive_group()
    src.add_argument("--init-seed", type=int, default=0, help="uniform random values with this seed (default)")
    src.add_argument("--constant", type=float, help="every node starts at this value")
    src.add_argument("--values", help="comma-separated values, one per node")
    src.add_argument("--init-file", help="file with one value per line")


def _init_spec(a) -> InitSpec:
    if a.constant is not None:
        return InitSpec(kind="constant", value=a.constant, seed=None)
    if a.values:
        return InitSpec(kind="values", values=tuple(float(x) for x in a.values.split(",")), seed=None)
    if a.init_file:
        return InitSpec(kind="file", path=a.init_file, seed=None)
    return InitSpec(kind="random", seed=a.init_seed)


def _add_algo_args(p: argparse.ArgumentParser) -> None:
    grp = p.add_argument_group("algorithm parameters")
    grp.add_argument("--iters", type=int, help="iteration budget for iterative methods (default 2N)")
    grp.add_argument("--mu", default="opt", help="fixed step: 'opt', 'max' or a number")
    grp.add_argument("--policy", default="ascending", choices=("ascending", "descending"))
    grp.add_argument("--normalization", default="euclidean", choices=("none", "infinity", "euclidean"))
    grp.add_argument("--alpha", type=float, default=0.15)
    grp.add_argument("--beta", type=float, default=0.85)
    grp.add_argument("--sigma", type=float, default=0.85)
    grp.add_argument(
        "--laplacian",
        default="unnormalized-constant",
        choices=("unnormalized-constant", "general-weighted", "normalized-symmetric", "normalized-random-walk"),
    )
    grp.add_argument("--tol", type=float, default=1e-8, help="relative eigenvalue grouping tolerance")


def _algo_spec(a, name: str) -> AlgorithmSpec:
    mu = a.mu
    if mu not in ("opt", "max"):
        mu = float(mu)
    return AlgorithmSpec(
        name=name,
        mu=mu,
        policy=a.policy,
        normalization=a.normalization,
        alpha=a.alpha,
        beta=a.beta,
        sigma=a.sigma,
        laplacian=a.laplacian,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="avgcons", description="Average-consensus experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("graph", help="graph utilities")
    gsub = g.add_subparsers(dest="graph_command", required=True)
    gi = gsub.add_parser("inspect", help="connectivity, degrees, spectrum and RCM bandwidth")
    _add_graph_args(gi)
    gi.add_argument("--tol", type=float, default=1e-8)

    r = sub.add_parser("run", help="run one algorithm")
    r.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    _add_graph_args(r)
    _add_init_args(r)
    _add_algo_args(r)
    r.add_argument("--out", help="output prefix; writes PREFIX.csv and PREFIX.json")

    c = sub.add_parser("compare", help="run several algorithms on a shared initial vector")
    c.add_argument("--algorithms", required=True, help=f"comma-separated subset of {','.join(ALGORITHMS)}")
    _add_graph_args(c)
    _add_init_args(c)
    _add_algo_args(c)
    c.add_argument("--out", help="output prefix; writes PREFIX.csv and PREFIX.json")

    d = sub.add_parser("diffuse", help="diffusion LMS with exact averaging")
    _add_graph_args(d)
    d.add_argument("--m", type=int, default=4, help="parameters per node")
    d.add_argument("--mu", type=float, default=0.05)
    d.add_argument("--steps", type=int, default=500)
    d.add_argument("--noise-var", type=float, default=0.0)
    d.add_argument("--regressor-var", type=float, default=1.0)
    d.add_argument("--projector", default="backsub", choices=PROJECTORS)
    d.add_argument("--data-seed", type=int, default=0, help="seed of the data stream")
    d.add_argument("--model-seed", type=int, default=0, help="seed of the true parameter vector")
    d.add_argument("--out", help="output prefix; writes PREFIX.csv and PREFIX.json")
    return parser


def _emit(out, prefix) -> None:
    if prefix:
        csv_path, json_path = out.write(prefix)
        print(f"wrote {csv_path} and {json_path}", file=sys.stderr)
    else:
        sys.stdout.write(out.csv)


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    try:
        if a.command == "graph":
            info = inspect_graph(_graph_spec(a).build(), a.tol)
            print(json.dumps(info, sort_keys=True, indent=2))
        elif a.command == "run":
            cfg = ExperimentConfig(
                graph=_graph_spec(a), algorithm=_algo_spec(a, a.algorithm), init=_init_spec(a), iters=a.iters, tol=a.tol
            )
            _emit(run_experiment(cfg), a.out)
        elif a.command == "compare":
            names = [s.strip() for s in a.algorithms.split(",") if s.strip()]
            unknown = [s for s in names if s not in ALGORITHMS]
            if unknown or not names:
                parser.error(f"unknown algorithm(s) {unknown}; choose from {', '.join(ALGORITHMS)}")
            specs = [_algo_spec(a, s) for s in names]
            _emit(run_comparison(_graph_spec(a), specs, _init_spec(a), a.iters, tol=a.tol), a.out)
        elif a.command == "diffuse":
            cfg = DiffusionConfig(
                graph=_graph_spec(a),
                m=a.m,
                mu=a.mu,
                steps=a.steps,
                noise_var=a.noise_var,
                regressor_var=a.regressor_var,
                projector=a.projector,
                seed=a.data_seed,
                model_seed=a.model_seed,
            )
            _emit(run_diffusion_experiment(cfg), a.out)
    except (ConsensusError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
