"""Linear Dirac structures on finite-dimensional fibers.

A structure on a d-dimensional space V is a subspace D of V (+) V* stored as a
basis of vectors in R^{2d}, each split into a vector part v and a covector
part alpha.  D is Dirac when it is maximally isotropic for the symmetric
pairing  <<(v, a), (w, b)>> = <b, v> + <a, w>,  i.e. isotropic with dim D = d.

Everything here is fiberwise linear algebra; bundle-level objects are handled
by mapping base points to fibers.  Subspace computations use SVD with a
relative singular-value threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DimensionMismatchError
from .lie import LieAlgebraSpec, _coeffs

_RANK_RTOL = 1e-10

ArrayLike = Union[np.ndarray, Sequence[float]]


def _orthonormal_rows(rows: np.ndarray, rtol: float = _RANK_RTOL) -> np.ndarray:
    """Orthonormal basis (as rows) of the row span of ``rows``."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[0] == 0 or not np.any(rows):
        return np.zeros((0, rows.shape[1]))
    _, s, vt = np.linalg.svd(rows, full_matrices=False)
    keep = s > rtol * s[0]
    return vt[keep]


@dataclass(frozen=True)
class TwoForm:
    """An antisymmetric bilinear form, Omega(v, w) = v^T M w."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatchError(f"two-form matrix must be square, got {m.shape}")
        if np.max(np.abs(m + m.T), initial=0.0) > 1e-12:
            raise DimensionMismatchError("two-form matrix is not antisymmetric")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class LinearDiracStructure:
    """A subspace of V (+) V* over a d-dimensional V, stored as basis rows.

    Each basis row has length 2d: the first d entries are the vector part,
    the last d the covector part.  The constructor only enforces shape and
    linear independence; isotropy and maximality are checked by ``is_dirac``
    (which must be able to return False on deliberately non-Dirac subspaces).
    """

    base_dim: int
    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.size == 0:
            b = b.reshape(0, 2 * self.base_dim)
        b = np.atleast_2d(b)
        if b.shape[1] != 2 * self.base_dim:
            raise DimensionMismatchError(
                f"basis rows must have length {2 * self.base_dim}, got {b.shape[1]}"
            )
        if b.shape[0] > 0:
            rank = np.linalg.matrix_rank(b, tol=_RANK_RTOL * max(1.0, np.linalg.norm(b, 2)))
            if rank < b.shape[0]:
                raise DimensionMismatchError("basis rows are linearly dependent")
        object.__setattr__(self, "basis", b)

    @property
    def vector_part(self) -> np.ndarray:
        return self.basis[:, : self.base_dim]

    @property
    def covector_part(self) -> np.ndarray:
        return self.basis[:, self.base_dim :]

    def orthonormal(self) -> np.ndarray:
        return _orthonormal_rows(self.basis)


def graph_of_two_form(omega: TwoForm) -> LinearDiracStructure:
    """The graph D = {(v, Omega(v, .))}, always a Dirac structure.

    Basis row i is (e_i, Omega(e_i, .)) whose covector part is row i of the
    form matrix.
    """
    d = omega.dim
    return LinearDiracStructure(base_dim=d, basis=np.hstack([np.eye(d), omega.matrix]))


def is_dirac(structure: LinearDiracStructure, tol: float = 1e-10) -> bool:
    """True iff the subspace is isotropic under <<.,.>> and has dimension d."""
    d = structure.base_dim
    q = structure.orthonormal()
    if q.shape[0] != d:
        return False
    v, a = q[:, :d], q[:, d:]
    gram = v @ a.T + a @ v.T
    return float(np.max(np.abs(gram), initial=0.0)) <= tol


def membership_residual(structure: LinearDiracStructure, v: ArrayLike, alpha: ArrayLike) -> float:
    """Normalized least-squares distance of (v, alpha) from the subspace.

    Returns dist / (1 + ||(v, alpha)||); ``contains`` compares this to a
    tolerance.
    """
    d = structure.base_dim
    v = np.asarray(v, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if v.shape != (d,) or alpha.shape != (d,):
        raise DimensionMismatchError(
            f"expected vector and covector of length {d}, got {v.shape} and {alpha.shape}"
        )
    w = np.concatenate([v, alpha])
    q = structure.orthonormal()
    resid = w - q.T @ (q @ w) if q.shape[0] else w
    return float(np.linalg.norm(resid) / (1.0 + np.linalg.norm(w)))


def contains(structure: LinearDiracStructure, v: ArrayLike, alpha: ArrayLike, tol: float = 1e-10) -> bool:
    """True iff (v, alpha) lies in the subspace up to the normalized tolerance."""
    return membership_residual(structure, v, alpha) <= tol


def _nullspace(m: np.ndarray, rtol: float = _RANK_RTOL) -> np.ndarray:
    """Orthonormal basis (columns) of the kernel of ``m``."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    _, s, vt = np.linalg.svd(m, full_matrices=True)
    if s.size == 0:
        return np.eye(m.shape[1])
    rank = int(np.sum(s > rtol * s[0]))
    return vt[rank:].T


def backward(psi: np.ndarray, target: LinearDiracStructure) -> LinearDiracStructure:
    """Backward image of a structure on V' along a linear map psi: V -> V'.

    B_psi(D') = {(v, psi^T b) : (psi v, b) in D'}.  Computed as a kernel
    problem in the unknowns (v, b, c) where c are coordinates of (psi v, b)
    in the basis of D'.  The result of a Dirac input is again Dirac.
    """
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    m_out, m_in = psi.shape
    if m_out != target.base_dim:
        raise DimensionMismatchError(
            f"map codomain dimension {m_out} does not match structure dimension {target.base_dim}"
        )
    pv = target.vector_part
    pa = target.covector_part
    k = target.basis.shape[0]
    # rows: psi v - Pv^T c = 0  and  b - Pa^T c = 0
    system = np.block(
        [
            [psi, np.zeros((m_out, m_out)), -pv.T],
            [np.zeros((m_out, m_in)), np.eye(m_out), -pa.T],
        ]
    )
    null = _nullspace(system)
    vs = null[:m_in, :].T
    betas = null[m_in : m_in + m_out, :].T
    rows = np.hstack([vs, betas @ psi])
    basis = _orthonormal_rows(rows)
    result = LinearDiracStructure(base_dim=m_in, basis=basis)
    if is_dirac(target) and not is_dirac(result):
        raise AssertionError("backward image of a Dirac structure failed the Dirac check")
    return result


def forward(psi: np.ndarray, source: LinearDiracStructure) -> LinearDiracStructure:
    """Forward image of a structure on V along a linear map psi: V -> V'.

    F_psi(D) = {(psi u, a) : (u, psi^T a) in D}; dual to ``backward``.
    """
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    m_out, m_in = psi.shape
    if m_in != source.base_dim:
        raise DimensionMismatchError(
            f"map domain dimension {m_in} does not match structure dimension {source.base_dim}"
        )
    pv = source.vector_part
    pa = source.covector_part
    system = np.block(
        [
            [np.eye(m_in), np.zeros((m_in, m_out)), -pv.T],
            [np.zeros((m_in, m_in)), psi.T, -pa.T],
        ]
    )
    null = _nullspace(system)
    us = null[:m_in, :].T
    alphas = null[m_in : m_in + m_out, :].T
    rows = np.hstack([us @ psi.T, alphas])
    basis = _orthonormal_rows(rows)
    result = LinearDiracStructure(base_dim=m_out, basis=basis)
    if is_dirac(source) and not is_dirac(result):
        raise AssertionError("forward image of a Dirac structure failed the Dirac check")
    return result


def subspaces_equal(
    a: LinearDiracStructure, b: LinearDiracStructure, rtol: float = _RANK_RTOL
) -> bool:
    """Mutual containment, via the rank of the concatenated bases.

    Singular values below rtol * (largest singular value) are treated as zero.
    """
    if a.base_dim != b.base_dim:
        return False
    qa, qb = a.orthonormal(), b.orthonormal()
    if qa.shape[0] != qb.shape[0]:
        return False
    if qa.shape[0] == 0:
        return True
    stacked = np.vstack([qa, qb])
    s = np.linalg.svd(stacked, compute_uv=False)
    rank = int(np.sum(s > rtol * s[0]))
    return rank == qa.shape[0]


def canonical_two_form(n: int) -> TwoForm:
    """The canonical symplectic form dx^i wedge dp_i on R^{2n} = (x, p)."""
    m = np.zeros((2 * n, 2 * n))
    m[:n, n:] = np.eye(n)
    m[n:, :n] = -np.eye(n)
    return TwoForm(m)


def pontryagin_two_form(n: int, r: int) -> TwoForm:
    """The presymplectic form on a (x, p, u) fiber: dx^i wedge dp_i, degenerate on u.

    Its graph is the local Dirac structure with v_x = p_p, v_p = -p_x, p_u = 0.
    """
    d = 2 * n + r
    m = np.zeros((d, d))
    m[:n, n : 2 * n] = np.eye(n)
    m[n : 2 * n, :n] = -np.eye(n)
    return TwoForm(m)


def pontryagin_projection(n: int, r: int) -> np.ndarray:
    """The linear projection (v_x, v_p, v_u) -> (v_x, v_p) of a Pontryagin fiber."""
    return np.hstack([np.eye(2 * n), np.zeros((2 * n, r))])


def reduced_dirac_fiber(alg: LieAlgebraSpec, lam) -> LinearDiracStructure:
    """The reduced Dirac fiber at a coalgebra point, on V = g (+) g*.

    It is the graph of the antisymmetric form

        w_lam((xi, rho), (zeta, sigma))
            = <sigma, xi> - <rho, zeta> + <lam, [xi, zeta]>,

    whose matrix in (algebra, coalgebra) block coordinates is
    [[B(lam), I], [-I, 0]] with B_ij = sum_k c[i][j][k] lam_k.  Membership of
    ((xi, mu_dot), (0, dh_dmu)) is equivalent to the Lie-Poisson equations
    xi = dh_dmu, mu_dot = ad*_xi(lam).
    """
    lam = _coeffs(lam, alg.dim)
    d = alg.dim
    b = np.einsum("ijk,k->ij", alg.structure_constants, lam)
    m = np.zeros((2 * d, 2 * d))
    m[:d, :d] = b
    m[:d, d:] = np.eye(d)
    m[d:, :d] = -np.eye(d)
    return graph_of_two_form(TwoForm(m))
