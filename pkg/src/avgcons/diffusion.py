"""Adapt-then-project diffusion LMS.

Every node runs one LMS update on its own data; the network then replaces
each parameter coordinate by its exact average. The averaging routine is
injected so the exact algorithms can be swapped against a dense projector.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .errors import SizeMismatch
from .exact import exact_ac_additions, exact_ac_backsub, graph_filter_factored, prepare_factor
from .graph import Graph
from .spectral import kernel_projection

Projector = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class NetworkModel:
    """Linear data model ``d_k(i) = u_{k,i} . w_k + v_k(i)``.

    ``w_true`` has shape ``(n, m)``; regressors are i.i.d. Gaussian with
    variance ``regressor_var`` per entry, noise is white with ``noise_var``.
    """

    n: int
    m: int
    w_true: np.ndarray
    noise_var: float = 1e-3
    regressor_var: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.w_true, dtype=float)
        if w.shape != (self.n, self.m):
            raise SizeMismatch(f"w_true has shape {w.shape}, expected {(self.n, self.m)}")
        if self.noise_var < 0 or self.regressor_var <= 0:
            raise ValueError("variances must be nonnegative (noise) and positive (regressors)")
        object.__setattr__(self, "w_true", w)

    @classmethod
    def common(cls, n: int, m: int, seed: int, **kw) -> "NetworkModel":
        """Every node observes the same random parameter vector."""
        w = np.random.default_rng(seed).standard_normal(m)
        return cls(n=n, m=m, w_true=np.tile(w, (n, 1)), **kw)

    @property
    def consistent(self) -> bool:
        return bool(np.all(self.w_true == self.w_true[0]))

    @property
    def reference(self) -> np.ndarray:
        """Per-node parameter the network should agree on: the node mean of ``w_true``."""
        return np.tile(self.w_true.mean(axis=0), (self.n, 1))


def generate_stream(model: NetworkModel, steps: int, seed: int) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``steps`` pairs ``(d, U)`` with ``d`` of shape ``(n,)`` and ``U`` of shape ``(n, m)``.

    Row ``k`` of ``U`` is node ``k``'s regressor. Noise is independent over
    time and nodes. Uses numpy's PCG64 generator seeded with ``seed``.
    """
    rng = np.random.default_rng(seed)
    sd_u = math.sqrt(model.regressor_var)
    sd_v = math.sqrt(model.noise_var)
    for _ in range(steps):
        u = sd_u * rng.standard_normal((model.n, model.m))
        v = sd_v * rng.standard_normal(model.n)
        d = np.einsum("km,km->k", u, model.w_true) + v
        yield d, u


@dataclass
class DiffusionState:
    """Stacked estimates ``w`` (node-major, length ``n * m``) and the MSD log in dB."""

    w: np.ndarray
    n: int
    m: int
    msd_history: list[float] = field(default_factory=list)

    @classmethod
    def zeros(cls, n: int, m: int) -> "DiffusionState":
        return cls(w=np.zeros(n * m), n=n, m=m)

    @property
    def blocks(self) -> np.ndarray:
        return self.w.reshape(self.n, self.m)

    def spread(self) -> float:
        """Largest deviation between node blocks."""
        b = self.blocks
        return float(np.abs(b - b[0]).max(initial=0.0))


def msd_db(w_blocks: np.ndarray, reference: np.ndarray) -> float:
    msd = float(np.mean(np.sum((w_blocks - reference) ** 2, axis=1)))
    return 10.0 * math.log10(msd) if msd > 0 else -400.0


def diffuse_step(state: DiffusionState, data, mu: float, projector: Projector) -> DiffusionState:
    """One LMS adaptation per node followed by per-coordinate exact averaging."""
    d, u = data
    d = np.asarray(d, dtype=float)
    u = np.asarray(u, dtype=float)
    if d.shape != (state.n,) or u.shape != (state.n, state.m):
        raise SizeMismatch(
            f"data shapes {d.shape}, {u.shape} do not match a network of {state.n} nodes with {state.m} parameters"
        )
    w = state.blocks
    err = d - np.einsum("km,km->k", u, w)
    adapted = w + mu * u * err[:, None]
    combined = np.column_stack([projector(adapted[:, j]) for j in range(state.m)]) if state.n > 1 else adapted
    return DiffusionState(w=combined.reshape(-1), n=state.n, m=state.m, msd_history=list(state.msd_history))


PROJECTORS = ("backsub", "additions", "filter", "dense")


def make_projector(g: Graph, kind: str = "backsub") -> Projector:
    """Averaging routine over ``g`` as a vector-to-vector callable."""
    if kind not in PROJECTORS:
        raise ValueError(f"unknown projector {kind!r}; expected one of {PROJECTORS}")
    if g.n == 1:
        return lambda x: np.asarray(x, dtype=float).copy()
    weighting = "unit-pm1" if kind == "additions" else "column-normalized"
    f, perm = prepare_factor(g, weighting)
    if kind == "dense":
        # constraint rows in the original numbering
        c = perm.matrix().T @ f.matrix
        p = kernel_projection(c.T)
        return lambda x: p @ x
    routine = {"backsub": exact_ac_backsub, "additions": exact_ac_additions, "filter": graph_filter_factored}[kind]
    return lambda x: perm.restore(routine(f, perm.apply(x)).value)


@dataclass
class DiffusionResult:
    msd_db: np.ndarray
    diverged: bool
    state: DiffusionState
    metadata: dict
    wallclock_ns: np.ndarray | None = None


def run_diffusion(
    model: NetworkModel,
    graph: Graph,
    mu: float,
    steps: int,
    projector: str | Projector = "backsub",
    seed: int = 0,
    divergence_db: float = 60.0,
) -> DiffusionResult:
    """Simulate ``steps`` adapt-then-project rounds from zero estimates.

    The run is flagged as diverged (and stopped) once the MSD climbs
    ``divergence_db`` above its initial value or stops being finite.
    """
    if graph.n != model.n:
        raise SizeMismatch(f"graph has {graph.n} nodes, model has {model.n}")
    proj = make_projector(graph, projector) if isinstance(projector, str) else projector
    ref = model.reference
    state = DiffusionState.zeros(model.n, model.m)
    history = [msd_db(state.blocks, ref)]
    diverged = False
    t0 = time.perf_counter_ns()
    stamps = [0]
    with np.errstate(over="ignore", invalid="ignore"):
        for data in generate_stream(model, steps, seed):
            state = diffuse_step(state, data, mu, proj)
            val = msd_db(state.blocks, ref) if np.all(np.isfinite(state.w)) else math.inf
            history.append(val)
            stamps.append(time.perf_counter_ns() - t0)
            if not math.isfinite(val) or val > history[0] + divergence_db:
                diverged = True
                break
    state.msd_history = history
    meta = {
        "algorithm": "diffusion-lms",
        "projector": projector if isinstance(projector, str) else getattr(projector, "__name__", "custom"),
        "mu": mu,
        "steps": steps,
        "seed": seed,
        "n": model.n,
        "m": model.m,
        "noise_var": model.noise_var,
        "regressor_var": model.regressor_var,
        "target": "common" if model.consistent else "node-mean",
    }
    return DiffusionResult(
        msd_db=np.array(history),
        diverged=diverged,
        state=state,
        metadata=meta,
        wallclock_ns=np.array(stamps, dtype=np.int64),
    )
