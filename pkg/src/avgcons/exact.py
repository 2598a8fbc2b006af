"""Exact average consensus through a tall lower-triangular factor.

For a connected graph numbered so that every node but the last has a
higher-numbered neighbour, a factor ``L`` (``n x (n-1)``, unit diagonal, zero
column sums, support inside the adjacency pattern) satisfies
``null(L^T) = span{1}``. Writing ``L = [Lbar; b]`` with square ``Lbar``, the
average is recovered by a forward substitution, one scalar correction at
node ``n`` and a backward substitution. Each substitution step only uses
values held by graph neighbours.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    Disconnected,
    EmptyColumn,
    ImaginaryResidue,
    NotStrictlyLowerTriangular,
    SizeMismatch,
    WrongWeighting,
)
from .graph import Graph, Permutation, is_connected, rcm_order

WEIGHTINGS = ("column-normalized", "unit-pm1")


@dataclass(frozen=True, eq=False)
class LowerFactor:
    """Tall factor ``L`` with unit diagonal and zero column sums.

    Attributes
    ----------
    matrix : ndarray, shape (n, n-1)
    weighting : {"column-normalized", "unit-pm1"}
    """

    matrix: np.ndarray
    weighting: str

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def lbar(self) -> np.ndarray:
        return self.matrix[:-1, :]

    @property
    def b(self) -> np.ndarray:
        return self.matrix[-1, :]

    @property
    def l0(self) -> np.ndarray:
        """Strictly lower part ``Lbar - I``."""
        return self.lbar - np.eye(self.n - 1)

    @cached_property
    def gamma(self) -> float:
        return gamma(self)

    def parents(self) -> list[int]:
        """Unit-pm1 only: ``parents()[l - 1]`` is the row holding column ``l``'s -1."""
        if self.weighting != "unit-pm1":
            raise WrongWeighting("parent pointers exist for unit-pm1 factors only")
        return [int(np.flatnonzero(self.matrix[l + 1 :, l])[0]) + l + 2 for l in range(self.n - 1)]

    def laplacian(self) -> np.ndarray:
        return self.matrix @ self.matrix.T


def build_lower_factor(g: Graph, weighting: str = "column-normalized") -> LowerFactor:
    """Factor supported on the lower adjacency pattern of an ordered graph.

    ``column-normalized`` spreads ``-1`` evenly over all below-diagonal
    neighbours of each column; ``unit-pm1`` keeps a single ``-1`` at the
    lowest-numbered one.

    Raises
    ------
    EmptyColumn
        If some node ``l < n`` has no neighbour ``k > l``. Reorder first
        (see :func:`avgcons.graph.rcm_order`).
    """
    if weighting not in WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}; expected one of {WEIGHTINGS}")
    n = g.n
    if n < 2:
        raise SizeMismatch("a factor needs at least two nodes")
    m = np.zeros((n, n - 1))
    for l in range(1, n):
        below = [k for k in g.neighbors[l - 1] if k > l]
        if not below:
            raise EmptyColumn(f"column {l} has no neighbour below the diagonal")
        m[l - 1, l - 1] = 1.0
        if weighting == "unit-pm1":
            m[below[0] - 1, l - 1] = -1.0
        else:
            for k in below:
                m[k - 1, l - 1] = -1.0 / len(below)
    return LowerFactor(matrix=m, weighting=weighting)


def gamma(f: LowerFactor) -> float:
    """``1 / (1 + ||Lbar^-T b^T||^2)``, via one triangular solve."""
    y = solve_triangular(f.lbar, f.b, trans="T", lower=True, unit_diagonal=True)
    return 1.0 / (1.0 + float(y @ y))


@dataclass
class ExactResult:
    """Output of an exact AC routine plus operation counters."""

    value: np.ndarray
    steps: int
    adds: int = 0
    mults: int = 0
    matrix_iterations: int = 0
    extra: dict = field(default_factory=dict)

    def counters(self) -> dict:
        out = {
            "steps": self.steps,
            "adds": self.adds,
            "mults": self.mults,
            "matrix_iterations": self.matrix_iterations,
        }
        out.update(self.extra)
        return out


def _check_state(f: LowerFactor, w0) -> np.ndarray:
    w = np.asarray(w0, dtype=float)
    if w.shape != (f.n,):
        raise SizeMismatch(f"state of shape {w.shape} for a factor on {f.n} nodes")
    return w


def exact_ac_backsub(f: LowerFactor, w0) -> ExactResult:
    """Network back-substitution.

    1. Forward pass ``Lbar w1 = w0[:n-1]``; node ``k`` needs ``w1`` from its
       lower-numbered neighbours.
    2. Node ``n`` forms ``w1[n] = gamma (b . w1 - w0[n])``.
    3. Node ``n`` broadcasts it; neighbours form ``w2 = b^T w1[n]``.
    4. Backward pass ``Lbar^T x = w2``; the result is ``[x, -w1[n]]``.

    Every node ends with the exact mean. The sequential step count is ``2n``.
    ``adds``/``mults`` count the scalar operations of the passes, skipping
    multiplications by the unit diagonal.
    """
    w = _check_state(f, w0)
    n = f.n
    lbar, b = f.lbar, f.b
    nnz_off = int(np.count_nonzero(f.l0))
    w1 = solve_triangular(lbar, w[:-1], lower=True, unit_diagonal=True)
    wn = f.gamma * (b @ w1 - w[-1])
    w2 = b * wn
    x = solve_triangular(lbar, w2, trans="T", lower=True, unit_diagonal=True)
    value = np.append(x, -wn)
    nb = int(np.count_nonzero(b))
    adds = 2 * nnz_off + nb
    mults = 2 * nnz_off + nb + 1 + nb
    return ExactResult(value=value, steps=2 * n, adds=adds, mults=mults)


def exact_ac_additions(f: LowerFactor, w0) -> ExactResult:
    """Back-substitution specialised to a unit-pm1 factor.

    With one ``-1`` per column the factor is a spanning tree rooted at node
    ``n``: the forward pass accumulates subtree sums, node ``n`` holds the
    total ``S``, and the backward pass copies ``gamma S`` down the tree.
    Only ``gamma S`` needs multiplications: once at node ``n`` and once at
    each of its factor neighbours, so ``mults = |supp(b)| + 1``.
    """
    if f.weighting != "unit-pm1":
        raise WrongWeighting(f"additions-only variant needs a unit-pm1 factor, got {f.weighting}")
    w = _check_state(f, w0)
    n = f.n
    par = f.parents()
    g = f.gamma
    adds = mults = 0
    # forward: subtree sums, children always precede parents
    acc = w.copy()
    for l in range(1, n):
        acc[par[l - 1] - 1] += acc[l - 1]
        adds += 1
    total = acc[-1]
    out = np.empty(n)
    out[-1] = g * total
    mults += 1
    # backward: parents always follow children, so sweep downwards
    for k in range(n - 1, 0, -1):
        p = par[k - 1]
        if p == n:
            out[k - 1] = g * total
            mults += 1
        else:
            # broadcast term is zero off supp(b); the sum is kept as written
            out[k - 1] = 0.0 + out[p - 1]
            adds += 1
    return ExactResult(value=out, steps=2 * n, adds=adds, mults=mults)


# --- graph filter ----------------------------------------------------------


def nilpotency_index(l0) -> int:
    """Smallest ``p >= 1`` with ``l0 ** p == 0`` for strictly lower-triangular ``l0``.

    Computed on ``|l0|`` so that no cancellation can hide a structural
    nonzero.
    """
    a = np.asarray(l0, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise SizeMismatch(f"expected a square matrix, got shape {a.shape}")
    if np.any(np.triu(a) != 0):
        raise NotStrictlyLowerTriangular("matrix has entries on or above the diagonal")
    a = np.abs(a)
    power = a.copy()
    p = 1
    while np.any(power != 0):
        power = power @ a
        p += 1
    return p


def filter_roots(degree: int) -> np.ndarray:
    """Roots of ``sum_{l=0}^{degree} (-x)^l``: ``-exp(2 pi i k / (degree+1))``, ``k = 1..degree``."""
    k = np.arange(1, degree + 1)
    return -np.exp(2j * np.pi * k / (degree + 1))


def filter_polynomial(x, degree: int):
    """Evaluate ``sum_{l <= degree} (-x)^l`` elementwise (scalars or arrays of scalars)."""
    x = np.asarray(x)
    return sum((-x) ** l for l in range(degree + 1))


@dataclass(frozen=True, eq=False)
class GraphFilter:
    """Finite expansion ``Lbar^-1 = sum_{l < p} (-l0)^l`` with ``l0`` nilpotent.

    ``degree`` is the polynomial degree actually used: ``n - 2`` by default,
    or ``p - 1`` when truncated at the nilpotency index ``p``.
    """

    l0: np.ndarray
    nilpotency_index: int
    degree: int

    @property
    def roots(self) -> np.ndarray:
        return filter_roots(self.degree)

    @property
    def size(self) -> int:
        return self.l0.shape[0]


def graph_filter(source, truncate: bool = False) -> GraphFilter:
    l0 = source.l0 if isinstance(source, LowerFactor) else np.asarray(source, dtype=float)
    p = nilpotency_index(l0)
    degree = p - 1 if truncate else max(l0.shape[0] - 1, 0)
    return GraphFilter(l0=l0, nilpotency_index=p, degree=degree)


def graph_filter_apply(gf: GraphFilter, z0, transpose: bool = False) -> np.ndarray:
    """Solve ``(I + l0) z = z0`` (or the transposed system) by the recursion
    ``z_l = z0 - l0 z_{l-1}``, run ``p - 1`` times from ``z_0 = z0``."""
    z0 = np.asarray(z0)
    if z0.shape != (gf.size,):
        raise SizeMismatch(f"vector of shape {z0.shape} for a filter of size {gf.size}")
    shift = gf.l0.T if transpose else gf.l0
    z = z0.copy()
    for _ in range(gf.nilpotency_index - 1):
        z = z0 - shift @ z
    return z


def graph_filter_factored(f: LowerFactor, w0, truncate: bool = False) -> ExactResult:
    """Exact AC through the root factorisation of the filter polynomial.

    ``Lbar^-1 = f(l0)`` with ``f(x) = (-1)^d prod_k (x - alpha_k)``, so the
    average is

        gamma * B(Lbar^-T) b1^T b1 B(Lbar^-1) w0,   b1 = [-b, 1],

    where each ``B`` is a product of ``d`` shifted blocks ``l0 - alpha_k I``
    padded with a trailing 1, times ``(-1)^d``. Each block is one local
    matrix iteration.
    """
    w = _check_state(f, w0)
    gf = graph_filter(f, truncate=truncate)
    roots = gf.roots
    l0 = gf.l0
    # leading coefficient of f; applied once per side
    sign = (-1.0) ** gf.degree
    z = w[:-1].astype(complex)
    for a in roots:
        z = l0 @ z - a * z
    z *= sign
    b1 = np.append(-f.b, 1.0)
    s = b1 @ np.append(z, w[-1])
    y = (b1 * s)[:-1].astype(complex)
    for a in roots:
        y = l0.T @ y - a * y
    y *= sign
    value = f.gamma * np.append(y, b1[-1] * s)
    scale = np.linalg.norm(value)
    resid = float(np.linalg.norm(value.imag) / scale) if scale > 0 else float(np.linalg.norm(value.imag))
    if resid > 1e-9:
        raise ImaginaryResidue(f"factored filter left a relative imaginary part of {resid:.3e}")
    d = gf.degree
    return ExactResult(
        value=value.real.copy(),
        steps=2 * d + 1,
        matrix_iterations=2 * d + 1,
        extra={"imag_residue": resid, "nilpotency_index": gf.nilpotency_index, "degree": d},
    )


# --- pipeline --------------------------------------------------------------

METHODS = ("backsub", "additions", "filter")


def prepare_factor(g: Graph, weighting: str = "column-normalized") -> tuple[LowerFactor, Permutation]:
    """Reorder ``g`` by reverse Cuthill-McKee and build its factor."""
    if g.directed:
        raise ValueError("exact consensus is built for undirected graphs only")
    if not is_connected(g):
        raise Disconnected("exact consensus requires a connected graph")
    perm = rcm_order(g, keep_input_if_better=False)
    return build_lower_factor(g.relabel(perm), weighting), perm


def exact_average(g: Graph, w0, method: str = "backsub", weighting: str | None = None) -> ExactResult:
    """Reorder, factor, run one exact routine and map the result back."""
    if method not in METHODS:
        raise ValueError(f"unknown exact method {method!r}; expected one of {METHODS}")
    if weighting is None:
        weighting = "unit-pm1" if method == "additions" else "column-normalized"
    f, perm = prepare_factor(g, weighting)
    w = perm.apply(np.asarray(w0, dtype=float))
    if method == "backsub":
        res = exact_ac_backsub(f, w)
    elif method == "additions":
        res = exact_ac_additions(f, w)
    else:
        res = graph_filter_factored(f, w)
    res.value = perm.restore(res.value)
    return res
