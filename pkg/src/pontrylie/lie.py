"""Finite-dimensional Lie algebra and nilpotent matrix group machinery.

An algebra is described by its structure constants c[i][j][k], meaning

    [e_i, e_j] = sum_k c[i][j][k] e_k

in a fixed basis.  Elements of the algebra and its dual are plain coefficient
vectors in that basis and the dual basis respectively.

Sign convention (fixed package-wide, conventions differ across texts):

    <ad*_xi(lam), zeta> = <lam, [xi, zeta]>

With this choice the Lie-Poisson evolution used by the reduction module is
``mu_dot = +ad*_xi(mu)``; for the Heisenberg algebra that reads
``mu1_dot = -mu3*xi2, mu2_dot = +mu3*xi1, mu3_dot = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DimensionMismatchError, InvalidAlgebraError, NonNilpotentError

Coeffs = Union[np.ndarray, Sequence[float], "AlgebraElement", "CoalgebraElement"]

_STRUCTURE_TOL = 1e-12


@dataclass(frozen=True)
class LieAlgebraSpec:
    """A Lie algebra given by structure constants and an optional matrix realization.

    Validated on construction: antisymmetry of c in its first two indices, the
    Jacobi identity, and (if ``matrix_basis`` is present) that matrix
    commutators reproduce the structure constants entrywise to 1e-12.
    """

    dim: int
    structure_constants: np.ndarray
    matrix_basis: Optional[tuple] = None
    labels: Optional[tuple] = None

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidAlgebraError("algebra dimension must be positive")
        c = np.asarray(self.structure_constants, dtype=float)
        if c.shape != (self.dim, self.dim, self.dim):
            raise InvalidAlgebraError(
                f"structure constants must have shape {(self.dim,) * 3}, got {c.shape}"
            )
        object.__setattr__(self, "structure_constants", c)
        if np.max(np.abs(c + np.swapaxes(c, 0, 1))) > _STRUCTURE_TOL:
            raise InvalidAlgebraError("structure constants are not antisymmetric in (i, j)")
        # Jacobi: sum_m c[i,j,m] c[m,k,l] + cyclic in (i,j,k) must vanish.
        jac = (
            np.einsum("ijm,mkl->ijkl", c, c)
            + np.einsum("jkm,mil->ijkl", c, c)
            + np.einsum("kim,mjl->ijkl", c, c)
        )
        if np.max(np.abs(jac)) > _STRUCTURE_TOL:
            raise InvalidAlgebraError(
                f"Jacobi identity violated, max residual {np.max(np.abs(jac)):.3e}"
            )
        if self.matrix_basis is not None:
            mats = tuple(np.asarray(m, dtype=float) for m in self.matrix_basis)
            if len(mats) != self.dim:
                raise InvalidAlgebraError("matrix_basis must contain one matrix per basis element")
            m0 = mats[0].shape
            if len(m0) != 2 or m0[0] != m0[1] or any(m.shape != m0 for m in mats):
                raise InvalidAlgebraError("matrix_basis entries must be square and equally sized")
            for i in range(self.dim):
                for j in range(self.dim):
                    comm = mats[i] @ mats[j] - mats[j] @ mats[i]
                    expected = sum(c[i, j, k] * mats[k] for k in range(self.dim))
                    if np.max(np.abs(comm - expected)) > _STRUCTURE_TOL:
                        raise InvalidAlgebraError(
                            f"matrix commutator [e_{i}, e_{j}] disagrees with structure constants"
                        )
            object.__setattr__(self, "matrix_basis", mats)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != self.dim:
                raise InvalidAlgebraError("labels length must equal dim")
            object.__setattr__(self, "labels", labels)

    @property
    def matrix_size(self) -> int:
        if self.matrix_basis is None:
            raise InvalidAlgebraError("algebra has no matrix realization")
        return self.matrix_basis[0].shape[0]

    def realize(self, coeffs: Coeffs) -> np.ndarray:
        """Matrix realization sum_i coeffs_i * matrix_basis[i]."""
        v = _coeffs(coeffs, self.dim)
        if self.matrix_basis is None:
            raise InvalidAlgebraError("algebra has no matrix realization")
        return np.tensordot(v, np.stack(self.matrix_basis), axes=1)


@dataclass(frozen=True)
class AlgebraElement:
    """An algebra element as a coefficient vector in the chosen basis."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.atleast_1d(np.asarray(self.coeffs, dtype=float)))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coeffs, dtype=dtype)

    def __len__(self) -> int:
        return self.coeffs.shape[0]


@dataclass(frozen=True)
class CoalgebraElement:
    """A dual-space element as a coefficient vector in the dual basis."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.atleast_1d(np.asarray(self.coeffs, dtype=float)))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coeffs, dtype=dtype)

    def __len__(self) -> int:
        return self.coeffs.shape[0]


@dataclass(frozen=True)
class GroupElement:
    """A group element realized as a square real matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatchError(f"group element matrix must be square, got {m.shape}")
        object.__setattr__(self, "matrix", m)

    def is_unitriangular(self, tol: float = 1e-12) -> bool:
        """Ones on the diagonal and zeros below it, within tol."""
        m = self.matrix
        if np.max(np.abs(np.diag(m) - 1.0)) > tol:
            return False
        return np.max(np.abs(np.tril(m, k=-1))) <= tol


def _coeffs(x: Coeffs, dim: int) -> np.ndarray:
    """Coerce to a flat float vector of length ``dim``."""
    if isinstance(x, (AlgebraElement, CoalgebraElement)):
        v = x.coeffs
    else:
        v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.shape != (dim,):
        raise DimensionMismatchError(f"expected coefficient vector of length {dim}, got shape {v.shape}")
    return v


def bracket(alg: LieAlgebraSpec, xi: Coeffs, zeta: Coeffs) -> AlgebraElement:
    """Lie bracket [xi, zeta] in basis coordinates."""
    a = _coeffs(xi, alg.dim)
    b = _coeffs(zeta, alg.dim)
    return AlgebraElement(np.einsum("ijk,i,j->k", alg.structure_constants, a, b))


def pairing(lam: Coeffs, xi: Coeffs) -> float:
    """Natural pairing <lam, xi> between the dual and the algebra."""
    a = np.atleast_1d(np.asarray(lam, dtype=float))
    b = np.atleast_1d(np.asarray(xi, dtype=float))
    if a.shape != b.shape:
        raise DimensionMismatchError(f"pairing length mismatch: {a.shape} vs {b.shape}")
    return float(a @ b)


def coadjoint(alg: LieAlgebraSpec, xi: Coeffs, lam: Coeffs) -> CoalgebraElement:
    """Coadjoint action ad*_xi(lam), with <ad*_xi(lam), zeta> = <lam, [xi, zeta]>.

    Component k is sum_{i,j} xi_i c[i][k][j] lam_j.
    """
    a = _coeffs(xi, alg.dim)
    m = _coeffs(lam, alg.dim)
    return CoalgebraElement(np.einsum("i,ikj,j->k", a, alg.structure_constants, m))


def exp_nilpotent(alg: LieAlgebraSpec, xi: Coeffs) -> GroupElement:
    """Matrix exponential of a nilpotent algebra element by truncated power series.

    The series is summed through order dim + 1; if the next term does not
    vanish (Frobenius norm above 1e-12) the algebra element is rejected as
    non-nilpotent.  General matrix exponentials are out of scope.
    """
    x = alg.realize(xi)
    size = x.shape[0]
    result = np.eye(size)
    term = np.eye(size)
    for k in range(1, alg.dim + 2):
        term = term @ x / k
        result = result + term
        if not np.any(term):
            return GroupElement(result)
    tail = term @ x / (alg.dim + 2)
    if np.linalg.norm(tail) > 1e-12:
        raise NonNilpotentError(
            f"exponential series did not terminate after {alg.dim + 1} terms "
            f"(next term has norm {np.linalg.norm(tail):.3e})"
        )
    return GroupElement(result)


def algebra_from_dict(data: dict) -> LieAlgebraSpec:
    """Build a LieAlgebraSpec from its JSON form.

    ``{"dim": d, "structure": [[i, j, k, value], ...], "matrix_basis": [...]}``
    with 0-based indices; only the (i, j) entries with i < j need to be given,
    the antisymmetric counterparts are filled in automatically when absent.
    """
    dim = int(data["dim"])
    c = np.zeros((dim, dim, dim))
    for entry in data.get("structure", []):
        i, j, k, value = entry
        i, j, k = int(i), int(j), int(k)
        if not (0 <= i < dim and 0 <= j < dim and 0 <= k < dim):
            raise InvalidAlgebraError(f"structure index out of range in {entry!r}")
        c[i, j, k] = float(value)
    # fill antisymmetric counterparts that were left implicit
    for i in range(dim):
        for j in range(dim):
            for k in range(dim):
                if c[i, j, k] != 0.0 and c[j, i, k] == 0.0:
                    c[j, i, k] = -c[i, j, k]
    basis = data.get("matrix_basis")
    mats = tuple(np.asarray(m, dtype=float) for m in basis) if basis is not None else None
    labels = tuple(data["labels"]) if "labels" in data else None
    return LieAlgebraSpec(dim=dim, structure_constants=c, matrix_basis=mats, labels=labels)
