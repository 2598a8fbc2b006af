"""Experiment runner: graph loading, configuration and CSV/JSON output.

Outputs are deterministic for a fixed configuration: the CSV carries
``iteration,error_db,wallclock_ns`` (wall clock last, the only column that
varies between runs) and the JSON sidecar is written with sorted keys and
no timing data.
"""

from __future__ import annotations

import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .diffusion import NetworkModel, run_diffusion
from .errors import DuplicateEdge, IndexOutOfRange, ParseError
from .exact import exact_average, prepare_factor
from .graph import (
    Graph,
    bandwidth,
    build_graph,
    complete_graph,
    is_connected,
    is_strongly_connected,
    laplacian,
    path_graph,
    permute,
    random_connected_graph,
    rcm_order,
    star_graph,
)
from .iterative import (
    NagParams,
    Trajectory,
    eigenstep_run,
    fixed_step_bounds,
    nag_run,
    power_ac,
    relative_error_db,
    run_linear,
)
from .spectral import eig_decompose, group_eigenvalues

ALGORITHMS = (
    "eigenstep",
    "exact-additions",
    "exact-backsub",
    "exact-filter",
    "fixed-step",
    "nag",
    "power",
)

# --- graph files -----------------------------------------------------------


def parse_graph(text: str, path: str | None = None) -> Graph:
    """Parse the text graph format.

    The first non-comment line is ``directed <n>`` or ``undirected <n>``;
    every following non-empty line is ``u v w``. ``#`` starts a comment.
    """
    header = None
    edges: list[tuple[int, int, float]] = []
    seen: dict[tuple[int, int], int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        tokens = _tokens(line)
        if not tokens:
            continue
        if header is None:
            kind, col = tokens[0]
            if kind not in ("directed", "undirected"):
                raise ParseError(f"expected 'directed' or 'undirected', got {kind!r}", lineno, col, path)
            if len(tokens) != 2:
                raise ParseError("header must be '<directed|undirected> <n>'", lineno, tokens[-1][1], path)
            n = _parse_int(tokens[1], lineno, path)
            if n < 1:
                raise ParseError(f"node count must be positive, got {n}", lineno, tokens[1][1], path)
            header = (kind == "directed", n)
            continue
        directed, n = header
        if len(tokens) != 3:
            col = tokens[min(len(tokens), 3) - 1][1] if len(tokens) > 3 else len(line.rstrip()) + 1
            raise ParseError(f"expected 'u v w', got {len(tokens)} fields", lineno, col, path)
        u = _parse_int(tokens[0], lineno, path)
        v = _parse_int(tokens[1], lineno, path)
        w = _parse_float(tokens[2], lineno, path)
        for node, (_, col) in ((u, tokens[0]), (v, tokens[1])):
            if not 1 <= node <= n:
                where = f"{path}: " if path else ""
                raise IndexOutOfRange(f"{where}line {lineno}, column {col}: node {node} outside 1..{n}")
        key = (u, v) if directed else (min(u, v), max(u, v))
        if key in seen:
            where = f"{path}: " if path else ""
            raise DuplicateEdge(f"{where}line {lineno}: edge {key} already given on line {seen[key]}")
        seen[key] = lineno
        edges.append((u, v, w))
    if header is None:
        raise ParseError("missing header line", 1, 1, path)
    return build_graph(header[1], edges, directed=header[0])


def _tokens(line: str) -> list[tuple[str, int]]:
    out = []
    col = 0
    for part in line.split():
        col = line.index(part, col)
        out.append((part, col + 1))
        col += len(part)
    return out


def _parse_int(tok, lineno, path) -> int:
    text, col = tok
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"expected an integer node index, got {text!r}", lineno, col, path) from None


def _parse_float(tok, lineno, path) -> float:
    text, col = tok
    try:
        val = float(text)
    except ValueError:
        raise ParseError(f"malformed weight {text!r}", lineno, col, path) from None
    if not math.isfinite(val):
        raise ParseError(f"weight {text!r} is not finite", lineno, col, path)
    return val


def load_graph_file(path) -> Graph:
    p = Path(path)
    return parse_graph(p.read_text(encoding="utf-8"), str(path))


def appendix_a_graph() -> Graph:
    """The bundled 20-node directed fixture."""
    text = resources.files("avgcons").joinpath("data/appendix_a.graph").read_text(encoding="utf-8")
    return parse_graph(text, "appendix_a.graph")


def format_graph(g: Graph) -> str:
    lines = [f"{'directed' if g.directed else 'undirected'} {g.n}"]
    lines += [f"{u} {v} {w!r}" for u, v, w in g.edges]
    return "\n".join(lines) + "\n"


# --- configuration ---------------------------------------------------------


@dataclass(frozen=True)
class GraphSpec:
    """Where the graph comes from.

    ``kind`` is one of ``file`` (``path``), ``appendix-a``, ``random``
    (``n``, ``p``, ``seed``), ``path``, ``complete`` or ``star`` (``n``).
    """

    kind: str = "random"
    path: str | None = None
    n: int | None = None
    p: float | None = None
    seed: int | None = None

    def build(self) -> Graph:
        if self.kind == "file":
            if not self.path:
                raise ValueError("graph kind 'file' needs a path")
            return load_graph_file(self.path)
        if self.kind == "appendix-a":
            return appendix_a_graph()
        if self.n is None:
            raise ValueError(f"graph kind {self.kind!r} needs n")
        if self.kind == "random":
            if self.seed is None:
                raise ValueError("random graphs need a seed")
            p = self.p if self.p is not None else min(1.0, 2.0 * math.log(self.n) / self.n)
            return random_connected_graph(self.n, p, self.seed)
        if self.kind == "path":
            return path_graph(self.n)
        if self.kind == "complete":
            return complete_graph(self.n)
        if self.kind == "star":
            return star_graph(self.n, self.n)
        raise ValueError(f"unknown graph kind {self.kind!r}")


@dataclass(frozen=True)
class InitSpec:
    """Initial node values: ``random`` (uniform on [0, 1), needs ``seed``),
    ``constant`` (``value``), ``values`` (explicit list) or ``file`` (one number per line)."""

    kind: str = "random"
    seed: int | None = 0
    value: float = 1.0
    values: tuple[float, ...] | None = None
    path: str | None = None

    def build(self, n: int) -> np.ndarray:
        if self.kind == "random":
            if self.seed is None:
                raise ValueError("random initial vectors need a seed")
            return np.random.default_rng(self.seed).uniform(0.0, 1.0, n)
        if self.kind == "constant":
            return np.full(n, float(self.value))
        if self.kind == "values":
            w = np.asarray(self.values, dtype=float)
        elif self.kind == "file":
            w = np.loadtxt(self.path, dtype=float, ndmin=1)
        else:
            raise ValueError(f"unknown initial-vector kind {self.kind!r}")
        if w.shape != (n,):
            raise ValueError(f"initial vector has {w.size} entries for a graph with {n} nodes")
        return w


@dataclass(frozen=True)
class AlgorithmSpec:
    """Algorithm selector plus its knobs; unused knobs are ignored."""

    name: str
    mu: float | str = "opt"
    policy: str = "ascending"
    normalization: str = "euclidean"
    alpha: float = 0.15
    beta: float = 0.85
    sigma: float = 0.85
    laplacian: str = "unnormalized-constant"

    def __post_init__(self):
        if self.name not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.name!r}; expected one of {', '.join(ALGORITHMS)}")


@dataclass(frozen=True)
class ExperimentConfig:
    graph: GraphSpec
    algorithm: AlgorithmSpec
    init: InitSpec = field(default_factory=InitSpec)
    iters: int | None = None
    output: str | None = None
    tol: float = 1e-8

    def describe(self) -> dict:
        d = asdict(self)
        d.pop("output")
        return d


# --- running ---------------------------------------------------------------


@dataclass
class RunRecord:
    """Uniform view of one algorithm run for output."""

    algorithm: str
    iterations: np.ndarray
    errors_db: np.ndarray
    wallclock_ns: np.ndarray
    metadata: dict
    counters: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    final: np.ndarray | None = None

    @property
    def final_error_db(self) -> float:
        return float(self.errors_db[-1])


def _from_trajectory(name: str, t: Trajectory, counters=None) -> RunRecord:
    clock = t.wallclock_ns if t.wallclock_ns is not None else np.zeros(t.iterations + 1, dtype=np.int64)
    return RunRecord(
        algorithm=name,
        iterations=np.arange(t.iterations + 1),
        errors_db=t.errors_db,
        wallclock_ns=clock,
        metadata=dict(t.metadata),
        counters=counters or {},
        warnings=list(t.warnings),
        final=np.asarray(t.final),
    )


def _undirected_only(g: Graph, name: str):
    if g.directed:
        raise ValueError(f"{name} needs an undirected graph")


def run_algorithm(g: Graph, w0: np.ndarray, spec: AlgorithmSpec, iters: int | None = None, tol: float = 1e-8) -> RunRecord:
    """Run one algorithm on ``g`` from ``w0``.

    Undirected graphs use the chosen Laplacian; directed graphs use their
    weighted adjacency (self-loops included) as the system matrix.
    """
    name = spec.name
    if iters is None:
        iters = 2 * g.n
    if name.startswith("exact-"):
        _undirected_only(g, name)
        method = name.split("-", 1)[1]
        t0 = time.perf_counter_ns()
        res = exact_average(g, w0, "filter" if method == "filter" else method)
        elapsed = time.perf_counter_ns() - t0
        target = np.full(g.n, w0.mean())
        errs = np.array([relative_error_db(w0, target), relative_error_db(res.value, target)])
        meta = {"algorithm": name, "ordering": "reverse-cuthill-mckee"}
        return RunRecord(
            algorithm=name,
            iterations=np.array([0, res.steps]),
            errors_db=errs,
            wallclock_ns=np.array([0, elapsed], dtype=np.int64),
            metadata=meta,
            counters=res.counters(),
            warnings=[],
            final=res.value,
        )
    if g.directed:
        a = g.adjacency()
        if name == "eigenstep":
            t = eigenstep_run(a, w0, mode="directed-normalized", policy=spec.policy, tol=tol)
            return _from_trajectory(name, t)
        if name == "power":
            t, _ = power_ac(a, w0, iters, spec.normalization)
            return _from_trajectory(name, t)
        raise ValueError(f"{name} needs an undirected graph")
    lap = laplacian(g, spec.laplacian)
    if name == "eigenstep":
        t = eigenstep_run(lap, w0, mode="laplacian", policy=spec.policy, tol=tol)
        t.metadata["laplacian"] = spec.laplacian
        return _from_trajectory(name, t)
    spectrum = eig_decompose(lap, symmetric_hint=np.allclose(lap, lap.T))
    mu_max, mu_opt = fixed_step_bounds(spectrum)
    if name == "fixed-step":
        mu = {"opt": mu_opt, "max": mu_max}.get(spec.mu, spec.mu) if isinstance(spec.mu, str) else spec.mu
        t = run_linear(np.eye(g.n) - float(mu) * lap, w0, iters, name="fixed-step")
        t.metadata.update({"mu": float(mu), "mu_max": mu_max, "mu_opt": mu_opt, "laplacian": spec.laplacian})
        return _from_trajectory(name, t)
    if name == "power":
        t, _ = power_ac(np.eye(g.n) - mu_opt * lap, w0, iters, spec.normalization)
        t.metadata.update({"mu": mu_opt, "laplacian": spec.laplacian})
        return _from_trajectory(name, t)
    if name == "nag":
        params = NagParams(alpha=spec.alpha, beta=spec.beta, sigma=spec.sigma, iters=iters)
        t = nag_run(lap, w0, params)
        t.metadata["laplacian"] = spec.laplacian
        return _from_trajectory(name, t)
    raise ValueError(f"unknown algorithm {name!r}")


def spectrum_summary(g: Graph, tol: float = 1e-8, variant: str = "unnormalized-constant") -> dict:
    if g.directed:
        s = eig_decompose(g.adjacency())
        groups = group_eigenvalues(s, tol)
        mags = np.abs(s.values)
        return {
            "matrix": "adjacency",
            "distinct_groups": len(groups.groups),
            "dominant": _num(s.values[-1]),
            "second_magnitude": float(mags[-2]) if s.n > 1 else 0.0,
            "max_multiplicity": max(gr.multiplicity for gr in groups.groups),
        }
    lap = laplacian(g, variant)
    sym = variant != "normalized-random-walk"
    s = eig_decompose(lap, symmetric_hint=sym)
    groups = group_eigenvalues(s, tol)
    vals = np.real(s.values)
    out = {
        "matrix": f"laplacian/{variant}",
        "K": groups.K,
        "lambda_min": float(vals.min()),
        "lambda_max": float(vals.max()),
        "zero_multiplicity": groups.groups[groups.zero_index].multiplicity if groups.zero_index is not None else 0,
    }
    if groups.zero_index is not None and out["zero_multiplicity"] == 1 and groups.K > 0:
        nz = sorted(float(np.real(gr.value)) for gr in groups.nonzero)
        out["lambda_2"] = nz[0]
        mu_max, mu_opt = fixed_step_bounds(vals)
        out.update({"mu_max": mu_max, "mu_opt": mu_opt})
    return out


def _num(z):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


def inspect_graph(g: Graph, tol: float = 1e-8) -> dict:
    """Connectivity, degrees, spectrum summary and RCM bandwidth."""
    skel = g.skeleton()
    info: dict[str, Any] = {
        "n": g.n,
        "directed": g.directed,
        "entries": len(g.edges),
        "connected": is_connected(g),
        "degrees": [int(d) for d in g.degrees],
        "bandwidth": bandwidth(skel),
    }
    if g.directed:
        info["strongly_connected"] = is_strongly_connected(g)
    if info["connected"]:
        p = rcm_order(g)
        info["rcm_order"] = list(p.order)
        info["bandwidth_rcm"] = bandwidth(permute(skel, p))
        if not g.directed and g.n >= 2:
            f, _ = prepare_factor(g, "unit-pm1")
            info["factor_root_neighbors"] = int(np.count_nonzero(f.b))
    try:
        info["spectrum"] = spectrum_summary(g, tol)
    except Exception as exc:  # report, do not fail inspection
        info["spectrum"] = {"error": f"{type(exc).__name__}: {exc}"}
    return info


# --- output ----------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".10f")


def records_csv(records: list[RunRecord], with_algorithm: bool) -> str:
    buf = io.StringIO()
    buf.write("algorithm,iteration,error_db,wallclock_ns\n" if with_algorithm else "iteration,error_db,wallclock_ns\n")
    for r in records:
        for it, e, c in zip(r.iterations, r.errors_db, r.wallclock_ns):
            prefix = f"{r.algorithm}," if with_algorithm else ""
            buf.write(f"{prefix}{int(it)},{_fmt(e)},{int(c)}\n")
    return buf.getvalue()


def _clean(obj):
    """Round floats so the sidecar is stable and JSON-safe."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return str(x)
        return float(format(x, ".12g"))
    if isinstance(obj, (complex, np.complexfloating)):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def dump_json(payload: dict) -> str:
    return json.dumps(_clean(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def record_payload(r: RunRecord) -> dict:
    return {
        "algorithm": r.algorithm,
        "metadata": r.metadata,
        "counters": r.counters,
        "warnings": r.warnings,
        "iterations": int(r.iterations[-1]),
        "final_error_db": r.final_error_db,
    }


@dataclass
class ExperimentOutput:
    csv: str
    json: str
    records: list[RunRecord]

    def write(self, prefix) -> tuple[Path, Path]:
        prefix = Path(prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        csv_path = prefix.parent / (prefix.name + ".csv")
        json_path = prefix.parent / (prefix.name + ".json")
        csv_path.write_text(self.csv, encoding="utf-8")
        json_path.write_text(self.json, encoding="utf-8")
        return csv_path, json_path


def _graph_payload(g: Graph, tol: float) -> dict:
    out = {"n": g.n, "directed": g.directed, "entries": len(g.edges), "connected": is_connected(g)}
    try:
        out["spectrum"] = spectrum_summary(g, tol)
    except Exception as exc:
        out["spectrum"] = {"error": f"{type(exc).__name__}: {exc}"}
    return out


def run_experiment(config: ExperimentConfig) -> ExperimentOutput:
    """Run one configured algorithm and render CSV plus JSON sidecar.

    Files are written to ``config.output`` + ``.csv``/``.json`` when an
    output prefix is set.
    """
    g = config.graph.build()
    w0 = config.init.build(g.n)
    rec = run_algorithm(g, w0, config.algorithm, config.iters, config.tol)
    payload = {
        "config": config.describe(),
        "graph": _graph_payload(g, config.tol),
        "run": record_payload(rec),
    }
    out = ExperimentOutput(csv=records_csv([rec], False), json=dump_json(payload), records=[rec])
    if config.output:
        out.write(config.output)
    return out


def run_comparison(
    graph: GraphSpec,
    algorithms: list[AlgorithmSpec],
    init: InitSpec = InitSpec(),
    iters: int | None = None,
    output: str | None = None,
    tol: float = 1e-8,
) -> ExperimentOutput:
    """Run several algorithms on one graph and one shared ``w0``; rows are ordered by algorithm name."""
    g = graph.build()
    w0 = init.build(g.n)
    specs = sorted(algorithms, key=lambda s: s.name)
    records = [run_algorithm(g, w0, s, iters, tol) for s in specs]
    payload = {
        "config": {
            "graph": asdict(graph),
            "init": asdict(init),
            "iters": iters,
            "tol": tol,
            "algorithms": [asdict(s) for s in specs],
        },
        "graph": _graph_payload(g, tol),
        "runs": [record_payload(r) for r in records],
    }
    out = ExperimentOutput(csv=records_csv(records, True), json=dump_json(payload), records=records)
    if output:
        out.write(output)
    return out


@dataclass(frozen=True)
class DiffusionConfig:
    graph: GraphSpec
    m: int = 4
    mu: float = 0.05
    steps: int = 500
    noise_var: float = 0.0
    regressor_var: float = 1.0
    projector: str = "backsub"
    seed: int = 0
    model_seed: int = 0
    output: str | None = None


def run_diffusion_experiment(config: DiffusionConfig) -> ExperimentOutput:
    """Common-parameter diffusion LMS; the CSV ``error_db`` column holds the MSD in dB."""
    g = config.graph.build()
    _undirected_only(g, "diffusion")
    model = NetworkModel.common(
        g.n, config.m, config.model_seed, noise_var=config.noise_var, regressor_var=config.regressor_var
    )
    res = run_diffusion(model, g, config.mu, config.steps, config.projector, seed=config.seed)
    rec = RunRecord(
        algorithm="diffusion-lms",
        iterations=np.arange(res.msd_db.size),
        errors_db=res.msd_db,
        wallclock_ns=res.wallclock_ns,
        metadata=res.metadata,
        warnings=[{"kind": "divergence"}] if res.diverged else [],
    )
    cfg = asdict(config)
    cfg.pop("output")
    payload = {
        "config": cfg,
        "graph": {"n": g.n, "directed": g.directed, "entries": len(g.edges)},
        "run": record_payload(rec) | {"diverged": res.diverged, "final_spread": res.state.spread()},
    }
    out = ExperimentOutput(csv=records_csv([rec], False), json=dump_json(payload), records=[rec])
    if config.output:
        out.write(config.output)
    return out
