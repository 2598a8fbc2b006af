"""Dense eigendecompositions, eigenvalue grouping and projection oracles.

The eigensolvers themselves are LAPACK's (through ``numpy.linalg``); this
module adds the ordering, diagonalizability gate and grouping rules that the
consensus engines rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DefectiveMatrix, RankDeficient, SingularPivot, SizeMismatch

RECONSTRUCTION_TOL = 1e-8
ORTHONORMAL_TOL = 1e-10
COND_LIMIT = 1e12


@dataclass(frozen=True)
class Spectrum:
    """Eigen-decomposition ``A = Q diag(values) Q^-1``.

    Attributes
    ----------
    values : ndarray
        Eigenvalues sorted by ascending magnitude, ties by ascending phase.
        Real dtype when ``symmetric``; complex otherwise.
    rightvecs : ndarray
        ``Q``, right eigenvectors in columns.
    leftrows : ndarray
        ``Q^-1``, left eigenvectors in rows, normalised so ``leftrows @ rightvecs = I``.
    symmetric : bool
        Whether the symmetric path was used.
    residual : float
        Relative Frobenius reconstruction residual.
    """

    values: np.ndarray
    rightvecs: np.ndarray
    leftrows: np.ndarray
    symmetric: bool
    residual: float

    @property
    def n(self) -> int:
        return self.values.size

    def reconstruct(self) -> np.ndarray:
        return (self.rightvecs * self.values) @ self.leftrows


def _order(values: np.ndarray) -> np.ndarray:
    mags = np.abs(values)
    phase = np.angle(values)
    # snap noise so real eigenvalues of either sign sort consistently
    mags = np.round(mags, 12)
    phase = np.round(phase, 12)
    return np.lexsort((phase, mags))


def eig_decompose(m, symmetric_hint: bool = False) -> Spectrum:
    """Eigen-decompose a square matrix with a diagonalizability gate.

    Parameters
    ----------
    m : array_like
        Square real or complex matrix.
    symmetric_hint : bool
        Use the symmetric solver. ``m`` must then be symmetric to 1e-12.

    Raises
    ------
    DefectiveMatrix
        If the matrix is (numerically) not diagonalizable, i.e. the
        reconstruction residual exceeds 1e-8 relative.
    """
    a = np.asarray(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise SizeMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    scale = np.linalg.norm(a)
    if symmetric_hint:
        if np.abs(a - a.conj().T).max(initial=0.0) > 1e-12 * max(scale, 1.0):
            raise ValueError("symmetric_hint given for a non-symmetric matrix")
        vals, q = np.linalg.eigh((a + a.conj().T) / 2)
        idx = _order(vals)
        vals, q = vals[idx], q[:, idx]
        qinv = q.conj().T
    else:
        try:
            vals, q = np.linalg.eig(a)
        except np.linalg.LinAlgError as exc:
            raise DefectiveMatrix(f"eigensolver failed: {exc}") from exc
        idx = _order(vals)
        vals, q = vals[idx], q[:, idx]
        if np.linalg.cond(q) > 1.0 / np.finfo(float).eps:
            raise DefectiveMatrix("eigenvector matrix is singular (non-diagonalizable input)")
        qinv = np.linalg.inv(q)
    recon = (q * vals) @ qinv
    residual = float(np.linalg.norm(a - recon) / scale) if scale > 0 else 0.0
    if residual > RECONSTRUCTION_TOL:
        raise DefectiveMatrix(f"reconstruction residual {residual:.3e} exceeds {RECONSTRUCTION_TOL}")
    return Spectrum(values=vals, rightvecs=q, leftrows=qinv, symmetric=symmetric_hint, residual=residual)


@dataclass(frozen=True)
class EigenGroup:
    value: complex
    multiplicity: int
    members: tuple[int, ...]


@dataclass(frozen=True)
class EigenGroups:
    """Eigenvalues merged into clusters of (numerically) equal value.

    ``K`` counts the nonzero groups; ``zero_index`` points into ``groups`` at
    the cluster treated as zero, or is ``None``.
    """

    groups: tuple[EigenGroup, ...]
    zero_index: int | None
    tol: float

    @property
    def K(self) -> int:
        return len(self.groups) - (self.zero_index is not None)

    @property
    def nonzero(self) -> tuple[EigenGroup, ...]:
        return tuple(g for i, g in enumerate(self.groups) if i != self.zero_index)

    def values(self) -> np.ndarray:
        return np.array([g.value for g in self.groups])


def group_eigenvalues(s: Spectrum | np.ndarray, tol: float = 1e-8) -> EigenGroups:
    """Greedy clustering of eigenvalues.

    Values are visited in spectrum order; each joins the first existing group
    whose founding member lies within ``tol * max|lambda|``, otherwise it starts
    a new group. The representative is the group mean. Eigenvalues no larger
    than ``tol * max|lambda|`` in magnitude form the zero group.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    vals = np.asarray(s.values if isinstance(s, Spectrum) else s)
    scale = float(np.abs(vals).max(initial=0.0))
    thresh = tol * scale
    founders: list[complex] = []
    members: list[list[int]] = []
    zero: list[int] = []
    for i, v in enumerate(vals):
        if abs(v) <= thresh:
            zero.append(i)
            continue
        for g, f in enumerate(founders):
            if abs(v - f) <= thresh:
                members[g].append(i)
                break
        else:
            founders.append(v)
            members.append([i])
    groups = []
    zero_index = None
    if zero:
        groups.append(EigenGroup(0.0 * vals[0], len(zero), tuple(zero)))
        zero_index = 0
    for mem in members:
        rep = vals[mem].mean()
        if np.isrealobj(vals):
            rep = float(rep)
        groups.append(EigenGroup(rep, len(mem), tuple(mem)))
    return EigenGroups(groups=tuple(groups), zero_index=zero_index, tol=tol)


def _checked_solve(gram: np.ndarray, rhs: np.ndarray, exc, what: str) -> np.ndarray:
    if np.linalg.cond(gram) > COND_LIMIT:
        raise exc(f"{what} is numerically singular")
    return np.linalg.solve(gram, rhs)


def kernel_projection(c) -> np.ndarray:
    """Orthogonal projector ``I - C^T (C C^T)^-1 C`` onto ``null(C)``.

    Raises
    ------
    RankDeficient
        If ``C C^T`` is numerically singular.
    """
    c = np.atleast_2d(np.asarray(c, dtype=float))
    n = c.shape[1]
    return np.eye(n) - c.T @ _checked_solve(c @ c.T, c, RankDeficient, "C C^T")


def rank_one_map(c1, c2) -> np.ndarray:
    """Oblique projector ``I - C2^T (C1 C2^T)^-1 C1``.

    For ``(n-1) x n`` inputs this is the rank-one map ``v u^T`` with
    ``C1 v = 0``, ``u^T C2^T = 0`` and ``u^T v = 1``.
    """
    c1 = np.atleast_2d(np.asarray(c1))
    c2 = np.atleast_2d(np.asarray(c2))
    if c1.shape != c2.shape:
        raise SizeMismatch(f"C1 {c1.shape} and C2 {c2.shape} differ in shape")
    n = c1.shape[1]
    return np.eye(n) - c2.T @ _checked_solve(c1 @ c2.T, c1, SingularPivot, "C1 C2^T")


def rank_one_factors(c1, c2) -> tuple[np.ndarray, np.ndarray]:
    """Factors ``(v, u)`` of :func:`rank_one_map` built from the leading block.

    Partitions ``C_j = [Cbar_j, c_j]`` with square ``Cbar_j``; then
    ``v ~ [Cbar1^-1 c1; -1]`` and ``u ~ [Cbar2^-1 c2; -1]``, scaled so
    ``u @ v = 1``. Only square solves are used, which makes this an
    independent route to the same matrix.
    """
    c1 = np.atleast_2d(np.asarray(c1))
    c2 = np.atleast_2d(np.asarray(c2))
    if c1.shape != c2.shape or c1.shape[1] != c1.shape[0] + 1:
        raise SizeMismatch(f"expected two (n-1) x n matrices, got {c1.shape} and {c2.shape}")
    v = np.append(_checked_solve(c1[:, :-1], c1[:, -1], SingularPivot, "leading block of C1"), -1.0)
    u = np.append(_checked_solve(c2[:, :-1], c2[:, -1], SingularPivot, "leading block of C2"), -1.0)
    s = u @ v
    if abs(s) < 1e-14 * np.linalg.norm(u) * np.linalg.norm(v):
        raise SingularPivot("left and right null vectors are orthogonal")
    return v, u / s
