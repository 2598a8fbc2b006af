"""Iterative average-consensus engines.

Every engine returns a :class:`Trajectory`. ``states`` are the raw iterates
of the recursion; ``estimates`` are what a node would report as its current
consensus value (identical to ``states`` except when an output rescaling is
in effect), and ``errors_db`` compares ``estimates`` with ``target``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import (
    DegenerateNormalizer,
    DivisionByZeroEigenvalue,
    ImaginaryResidue,
    NotLaplacianSpectrum,
    SizeMismatch,
    TiedDominantEigenvalues,
    ZeroEigenvalueStep,
    ZeroEigenvectorEntry,
)
from .spectral import EigenGroup, EigenGroups, Spectrum, eig_decompose, group_eigenvalues

MACHINE_EPS = 2.0**-52
ERROR_FLOOR_DB = -400.0
INSTABILITY_THRESHOLD = 1e-3
IMAG_TOL = 1e-9


def relative_error_db(estimate, target) -> float:
    """``20 log10(||estimate - target|| / ||target||)``, floored at -400 dB.

    A zero target falls back to the absolute error.
    """
    num = np.linalg.norm(np.asarray(estimate) - np.asarray(target))
    den = np.linalg.norm(target)
    ratio = num / den if den > 0 else num
    if ratio == 0:
        return ERROR_FLOOR_DB
    return max(ERROR_FLOOR_DB, 20.0 * math.log10(ratio))


def consensus_target(w0) -> np.ndarray:
    w0 = np.asarray(w0, dtype=float)
    return np.full_like(w0, w0.mean())


@dataclass
class Trajectory:
    states: np.ndarray
    estimates: np.ndarray
    errors_db: np.ndarray
    target: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)
    warnings: list[dict[str, Any]] = field(default_factory=list)
    wallclock_ns: np.ndarray | None = None

    @property
    def iterations(self) -> int:
        return self.states.shape[0] - 1

    @property
    def final(self) -> np.ndarray:
        return self.estimates[-1]

    @classmethod
    def build(cls, states, target, estimates=None, **kw) -> "Trajectory":
        states = np.asarray(states)
        est = states if estimates is None else np.asarray(estimates)
        errs = np.array([relative_error_db(e, target) for e in est])
        return cls(states=states, estimates=est, errors_db=errs, target=np.asarray(target), **kw)


class _Stopwatch:
    """Nanoseconds elapsed at each recorded iterate (first entry 0)."""

    def __init__(self):
        self.t0 = time.perf_counter_ns()
        self.stamps = [0]

    def tick(self):
        self.stamps.append(time.perf_counter_ns() - self.t0)

    def array(self) -> np.ndarray:
        return np.array(self.stamps, dtype=np.int64)


def _as_vector(w0, n=None) -> np.ndarray:
    w = np.asarray(w0)
    if w.ndim != 1:
        raise SizeMismatch(f"state must be a vector, got shape {w.shape}")
    if n is not None and w.size != n:
        raise SizeMismatch(f"state has length {w.size}, expected {n}")
    return w


def _as_square(m, name="matrix") -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise SizeMismatch(f"{name} must be square, got shape {m.shape}")
    return m


# --- fixed step ------------------------------------------------------------


def _laplacian_groups(values, tol=1e-8) -> EigenGroups:
    vals = np.asarray(values)
    if np.iscomplexobj(vals):
        if np.abs(vals.imag).max(initial=0.0) > tol * np.abs(vals).max(initial=1.0):
            raise NotLaplacianSpectrum("Laplacian spectrum must be real")
        vals = vals.real
    groups = group_eigenvalues(vals, tol)
    if groups.zero_index is None:
        raise NotLaplacianSpectrum("no zero eigenvalue")
    if groups.groups[groups.zero_index].multiplicity != 1:
        raise NotLaplacianSpectrum("zero eigenvalue is not simple (disconnected graph?)")
    if any(g.value < 0 for g in groups.nonzero):
        raise NotLaplacianSpectrum("negative eigenvalue in a Laplacian spectrum")
    return groups


def fixed_step_bounds(laplacian_spectrum: Spectrum | Sequence[float]) -> tuple[float, float]:
    """Stability limit and optimal constant step for ``I - mu L``.

    Returns ``(2 / lambda_max, 2 / (lambda_2 + lambda_max))`` where
    ``lambda_2`` is the smallest nonzero eigenvalue.
    """
    vals = laplacian_spectrum.values if isinstance(laplacian_spectrum, Spectrum) else laplacian_spectrum
    nz = [g.value for g in _laplacian_groups(vals).nonzero]
    lmax, l2 = max(nz), min(nz)
    return 2.0 / lmax, 2.0 / (l2 + lmax)


def run_linear(matrices, w0, iters: int | None = None, target=None, name: str = "linear") -> Trajectory:
    """Run ``w_i = A_i w_{i-1}``.

    ``matrices`` is either one square matrix applied ``iters`` times or a
    sequence of matrices applied in turn (``iters`` then defaults to its
    length and may not exceed it).
    """
    w = _as_vector(w0)
    if target is None:
        target = consensus_target(w.real)
    mats = np.asarray(matrices) if not isinstance(matrices, (list, tuple)) else None
    if mats is not None and mats.ndim == 2:
        a = _as_square(mats)
        if iters is None:
            raise ValueError("iters is required with a single matrix")
        schedule = [a] * iters
    else:
        schedule = [_as_square(m) for m in matrices]
        if iters is None:
            iters = len(schedule)
        if iters > len(schedule):
            raise ValueError(f"schedule has {len(schedule)} matrices, {iters} iterations requested")
        schedule = schedule[:iters]
    for a in schedule:
        if a.shape[0] != w.size:
            raise SizeMismatch(f"matrix of size {a.shape[0]} for state of length {w.size}")
    dtype = np.result_type(w, *schedule) if schedule else w.dtype
    states = np.empty((iters + 1, w.size), dtype=dtype)
    states[0] = w
    sw = _Stopwatch()
    for i, a in enumerate(schedule, start=1):
        states[i] = a @ states[i - 1]
        sw.tick()
    return Trajectory.build(
        states, target, metadata={"algorithm": name, "iterations": iters}, wallclock_ns=sw.array()
    )


# --- eigenstep -------------------------------------------------------------


@dataclass(frozen=True)
class StepSchedule:
    """Ordered eigenstep step sizes ``mu_i = 1 / lambda_i``."""

    eigenvalues: tuple[complex, ...]
    policy: str | tuple[int, ...] = "ascending"

    @property
    def steps(self) -> tuple[complex, ...]:
        return tuple(1.0 / lam for lam in self.eigenvalues)

    def __len__(self) -> int:
        return len(self.eigenvalues)


def eigenstep_schedule(
    groups: EigenGroups,
    policy: str | Sequence[int] = "ascending",
    surviving: int | None = None,
) -> StepSchedule:
    """One step per eigenvalue group except the surviving one.

    Parameters
    ----------
    groups : EigenGroups
    policy : {"ascending", "descending"} or sequence of int
        Order by eigenvalue magnitude, or a permutation of ``range(K)``
        applied to the ascending order.
    surviving : int, optional
        Index into ``groups.groups`` of the mode left untouched. Defaults
        to the zero group.

    Raises
    ------
    ZeroEigenvalueStep
        If a zero eigenvalue would have to be cancelled.
    """
    if surviving is None:
        surviving = groups.zero_index
    if surviving is not None and not 0 <= surviving < len(groups.groups):
        raise IndexError(f"surviving group {surviving} out of range")
    selected = [g for i, g in enumerate(groups.groups) if i != surviving]
    for i, g in enumerate(groups.groups):
        if i != surviving and i == groups.zero_index:
            raise ZeroEigenvalueStep("schedule would need a step for the zero eigenvalue")
    lams = sorted((g.value for g in selected), key=lambda v: (abs(v), np.angle(v)))
    if isinstance(policy, str):
        if policy == "descending":
            lams = lams[::-1]
        elif policy != "ascending":
            raise ValueError(f"unknown ordering policy {policy!r}")
    else:
        perm = tuple(int(k) for k in policy)
        if sorted(perm) != list(range(len(lams))):
            raise ValueError(f"custom ordering must permute range({len(lams)}), got {perm}")
        lams = [lams[k] for k in perm]
        policy = perm
    return StepSchedule(eigenvalues=tuple(lams), policy=policy)


def mode_amplification(eigenvalues, schedule: StepSchedule | None = None, eps=MACHINE_EPS) -> np.ndarray:
    """Growth of a per-mode perturbation through an eigenstep schedule.

    For mode ``m`` this is ``eps_m * prod_{k != m} (1 - lambda_m / lambda_k)``,
    the product running over every step that does not cancel ``m`` itself.
    Without a schedule, one step per listed eigenvalue is assumed.

    Examples
    --------
    >>> mode_amplification([1.0, 2.0], eps=1.0)
    array([ 0.5, -1. ])
    """
    lams = np.asarray(eigenvalues)
    steps = np.asarray(lams if schedule is None else schedule.eigenvalues)
    if np.any(steps == 0):
        raise DivisionByZeroEigenvalue("schedule contains a zero eigenvalue")
    eps = np.broadcast_to(np.asarray(eps), lams.shape)
    scale = np.abs(steps).max(initial=0.0)
    out = np.empty(lams.shape, dtype=np.result_type(lams, steps, float))
    for m, lam in enumerate(lams):
        keep = np.abs(steps - lam) > 1e-12 * scale
        out[m] = eps[m] * np.prod(1.0 - lam / steps[keep])
    return out


def _surviving_pair(spec: Spectrum, groups: EigenGroups, surviving: int):
    grp = groups.groups[surviving]
    if grp.multiplicity != 1:
        raise DegenerateNormalizer(
            f"surviving eigenvalue {grp.value} has multiplicity {grp.multiplicity}; the rank-one normalizer is undefined"
        )
    k = grp.members[0]
    return spec.values[k], spec.rightvecs[:, k], spec.leftrows[k, :]


def _rescalers(v, u, what="eigenvector"):
    n = v.size
    for name, vec in (("right", v), ("left", u)):
        small = np.abs(vec) <= 1e-12 * np.abs(vec).max()
        if np.any(small):
            bad = [int(i) + 1 for i in np.flatnonzero(small)]
            raise ZeroEigenvectorEntry(f"{name} {what} has zero entries at nodes {bad}")
    d1 = math.sqrt(n) * u
    d2 = math.sqrt(n) * v
    return d1, d2


def _real_pair(v, u):
    """Fix the phase of an eigenvector pair and drop negligible imaginary parts."""
    if not (np.iscomplexobj(v) or np.iscomplexobj(u)):
        return v, u
    k = int(np.argmax(np.abs(v)))
    ph = v[k] / abs(v[k])
    v, u = v / ph, u * ph
    if np.abs(v.imag).max() <= 1e-12 * np.abs(v).max() and np.abs(u.imag).max() <= 1e-12 * np.abs(u).max():
        return v.real.copy(), u.real.copy()
    return v, u


def _drop_imag(x, what="final state"):
    x = np.asarray(x)
    if not np.iscomplexobj(x):
        return x, 0.0
    scale = np.linalg.norm(x)
    resid = float(np.linalg.norm(x.imag) / scale) if scale > 0 else float(np.linalg.norm(x.imag))
    if resid > IMAG_TOL:
        raise ImaginaryResidue(f"{what} has relative imaginary part {resid:.3e}")
    return x.real.copy(), resid


def eigenstep_run(
    system,
    w0,
    mode: str = "laplacian",
    policy: str | Sequence[int] = "ascending",
    surviving: int | None = None,
    rescale: bool | None = None,
    tol: float = 1e-8,
) -> Trajectory:
    """Finite-time consensus by cancelling one eigenmode per iteration.

    Parameters
    ----------
    system : array_like
        ``mode="laplacian"``: a symmetric Laplacian ``L``; the iteration is
        ``w_i = (I - L / lambda_i) w_{i-1}``.
        ``mode="directed-normalized"``: any diagonalizable matrix ``A``; the
        iteration is ``w_i = (lambda_i I - A) w_{i-1} / (lambda_i - lambda_s)``
        where ``lambda_s`` is the surviving eigenvalue.
    w0 : array_like
        Initial node values.
    policy : str or sequence of int
        Step ordering, see :func:`eigenstep_schedule`.
    surviving : int, optional
        Group index (into the groups of ``system``) of the mode to keep.
        Defaults to the zero group, or in directed mode to the dominant
        group when there is no zero eigenvalue.
    rescale : bool, optional
        Directed mode only: pre-scale the input by ``D1^-1`` and report
        ``D2^-1 w_i`` so the output is the plain average. Default True in
        directed mode.
    tol : float
        Relative tolerance for merging eigenvalues.

    Returns
    -------
    Trajectory
        ``K + 1`` states. ``metadata["residual"]`` is the relative distance
        of the final estimate from its target.
    """
    a = _as_square(system, "system")
    w = _as_vector(w0, a.shape[0]).astype(float)
    n = w.size
    if mode == "laplacian":
        if rescale:
            raise ValueError("rescaling applies to directed-normalized mode only")
        if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(np.abs(a).max(), 1.0)):
            raise NotLaplacianSpectrum("laplacian mode needs a symmetric system")
        spec = eig_decompose(a, symmetric_hint=True)
        groups = _laplacian_groups(spec.values, tol)
        rescale = False
    elif mode == "directed-normalized":
        rescale = True if rescale is None else rescale
        spec = eig_decompose(a)
        groups = group_eigenvalues(spec, tol)
    else:
        raise ValueError(f"unknown eigenstep mode {mode!r}")
    if surviving is None:
        surviving = groups.zero_index if groups.zero_index is not None else len(groups.groups) - 1
    lam_s, v, u = _surviving_pair(spec, groups, surviving)
    v, u = _real_pair(v, u)
    if mode == "laplacian":
        shift = 0.0
        step_groups = groups
    else:
        # eigenstep on S = A - lam_s I, whose surviving mode sits at zero
        shift = lam_s.real if np.isreal(lam_s) else lam_s
        step_groups = EigenGroups(
            groups=tuple(
                EigenGroup(0.0 if i == surviving else g.value - shift, g.multiplicity, g.members)
                for i, g in enumerate(groups.groups)
            ),
            zero_index=surviving,
            tol=tol,
        )
    schedule = eigenstep_schedule(step_groups, policy, surviving)

    if rescale:
        d1, d2 = _rescalers(v, u)
        start = w / d1
    else:
        d1 = d2 = None
        start = w
    steps = np.array(schedule.eigenvalues)
    complex_run = np.iscomplexobj(a) or np.iscomplexobj(start) or bool(np.any(np.imag(steps) != 0))
    dtype = complex if complex_run else float
    if not complex_run:
        steps = steps.real
    s_mat = a - shift * np.eye(n)
    states = np.empty((len(schedule) + 1, n), dtype=dtype)
    states[0] = start
    sw = _Stopwatch()
    for i, lam in enumerate(steps, start=1):
        x = states[i - 1]
        states[i] = x - (s_mat @ x) / lam
        sw.tick()

    oracle = v * (u @ start)
    if rescale:
        estimates = states / d2
        target = consensus_target(w)
    else:
        estimates = states
        target = oracle.real if np.allclose(oracle.imag, 0, atol=IMAG_TOL * max(np.linalg.norm(oracle), 1e-300)) else oracle
    final, imag_resid = _drop_imag(estimates[-1])
    estimates = estimates.copy()
    if np.iscomplexobj(estimates) and not np.iscomplexobj(target):
        estimates = estimates.real.copy()
    estimates[-1] = final
    traj = Trajectory.build(states, target, estimates=estimates, wallclock_ns=sw.array())
    tnorm = np.linalg.norm(target)
    traj.metadata = {
        "algorithm": "eigenstep",
        "mode": mode,
        "policy": list(schedule.policy) if not isinstance(schedule.policy, str) else schedule.policy,
        "K": len(schedule),
        "surviving_eigenvalue": _jsonable(groups.groups[surviving].value),
        "step_eigenvalues": [_jsonable(lam + shift) for lam in schedule.eigenvalues],
        "rescaled": bool(rescale),
        "residual": float(np.linalg.norm(final - target) / (tnorm if tnorm > 0 else 1.0)),
        "imag_residue": imag_resid,
        "spectrum_residual": spec.residual,
    }
    amp = mode_amplification(np.array([g.value for g in step_groups.nonzero]), schedule)
    max_amp = float(np.abs(amp).max(initial=0.0))
    traj.metadata["max_mode_amplification"] = max_amp
    if max_amp >= INSTABILITY_THRESHOLD:
        traj.warnings.append({"kind": "instability", "max_mode_amplification": max_amp})
    return traj


def _jsonable(z):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


# --- power iteration -------------------------------------------------------


@dataclass(frozen=True)
class RescaleRecord:
    """Output rescaling that turns the power limit into the plain average.

    ``d1``/``d2`` are the diagonals of ``D1``/``D2``; the iteration starts
    from ``w0 / d1`` and node ``k`` reports ``w_i[k] / d2[k]`` after
    removing the growth ``lambda_dominant ** i``.
    """

    dominant: complex
    second: complex
    d1: np.ndarray
    d2: np.ndarray

    @property
    def rate(self) -> float:
        return abs(self.second) / abs(self.dominant)


def power_ac(a, w0, iters: int, normalization: str = "none") -> tuple[Trajectory, RescaleRecord]:
    """Power iteration with recovery of the average from the dominant mode.

    Parameters
    ----------
    a : array_like
        Square matrix with a strictly dominant, simple eigenvalue whose left
        and right eigenvectors have no zero entries.
    w0 : array_like
    iters : int
    normalization : {"none", "infinity", "euclidean"}
        Per-iteration rescaling of the raw iterate. The accumulated scale is
        tracked in log form so recovery is unaffected.

    Returns
    -------
    (Trajectory, RescaleRecord)
    """
    if normalization not in ("none", "infinity", "euclidean"):
        raise ValueError(f"unknown normalization {normalization!r}")
    a = _as_square(a)
    w = _as_vector(w0, a.shape[0]).astype(float)
    spec = eig_decompose(a)
    mags = np.abs(spec.values)
    if spec.n > 1 and mags[-1] - mags[-2] <= 1e-10 * mags[-1]:
        raise TiedDominantEigenvalues(
            f"|lambda_N| = {mags[-1]:.6g} is not strictly larger than |lambda_N-1| = {mags[-2]:.6g}"
        )
    lam, v, u = spec.values[-1], spec.rightvecs[:, -1], spec.leftrows[-1, :]
    second = spec.values[-2] if spec.n > 1 else 0.0
    if abs(lam.imag) > 1e-12 * abs(lam):
        raise TiedDominantEigenvalues("dominant eigenvalue is complex, so its conjugate ties it")
    lam = lam.real
    v, _ = _drop_imag(v / v[np.argmax(np.abs(v))], "dominant right eigenvector")
    u = u.real if np.iscomplexobj(u) else u
    u = u / (u @ v)
    d1, d2 = _rescalers(v, u)
    rec = RescaleRecord(dominant=lam, second=second, d1=d1, d2=d2)
    states = np.empty((iters + 1, w.size))
    estimates = np.empty_like(states)
    x = w / d1
    states[0] = x
    estimates[0] = x / d2
    log_scale = 0.0
    log_lam = math.log(abs(lam))
    sw = _Stopwatch()
    for i in range(1, iters + 1):
        x = a @ x
        if normalization != "none":
            nrm = np.abs(x).max() if normalization == "infinity" else np.linalg.norm(x)
            if nrm > 0:
                x = x / nrm
                log_scale += math.log(nrm)
        states[i] = x
        sign = 1.0 if lam > 0 or i % 2 == 0 else -1.0
        estimates[i] = sign * math.exp(log_scale - i * log_lam) * x / d2
        sw.tick()
    traj = Trajectory.build(states, consensus_target(w), estimates=estimates, wallclock_ns=sw.array())
    traj.metadata = {
        "algorithm": "power",
        "normalization": normalization,
        "iterations": iters,
        "dominant_eigenvalue": _jsonable(lam),
        "second_eigenvalue": _jsonable(second),
        "rate": rec.rate,
    }
    return traj, rec


# --- Nesterov --------------------------------------------------------------


@dataclass(frozen=True)
class NagParams:
    alpha: float = 0.15
    beta: float = 0.85
    sigma: float = 0.85
    iters: int = 100

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        for name in ("beta", "sigma"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {val}")
        if self.iters < 0:
            raise ValueError("iters must be nonnegative")


def nag_run(laplacian, w0, params: NagParams, target=None) -> Trajectory:
    """Nesterov-accelerated consensus.

    ``q_i = beta q_{i-1} + alpha L (w_{i-1} - sigma q_{i-1})`` and
    ``w_i = w_{i-1} - q_i`` with ``q_0 = 0``. Each update only mixes a node's
    own entries with ``L``-neighbour values.

    Notes
    -----
    On a mode with Laplacian eigenvalue ``lambda`` the recursion is stable
    iff ``alpha * lambda * (1 + 2 sigma) < 2 (1 + beta)``.
    """
    lap = _as_square(laplacian, "laplacian")
    w = _as_vector(w0, lap.shape[0]).astype(float)
    if target is None:
        target = consensus_target(w)
    al, be, si = params.alpha, params.beta, params.sigma
    states = np.empty((params.iters + 1, w.size))
    states[0] = w
    q = np.zeros_like(w)
    sw = _Stopwatch()
    for i in range(1, params.iters + 1):
        q = be * q + al * (lap @ (states[i - 1] - si * q))
        states[i] = states[i - 1] - q
        sw.tick()
    traj = Trajectory.build(states, target, wallclock_ns=sw.array())
    traj.metadata = {"algorithm": "nag", "alpha": al, "beta": be, "sigma": si, "iterations": params.iters}
    return traj
