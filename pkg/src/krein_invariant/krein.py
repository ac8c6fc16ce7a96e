"""Finite-dimensional Krein-space primitives.

The space is ``C^(n_plus + n_minus)`` with the canonical symmetry
``J = diag(I_plus, -I_minus)`` and the indefinite form ``[x, y] = (Jx, y)``.
The Hilbert inner product ``(x, y) = sum_k x_k conj(y_k)`` is linear in the
first slot and conjugate-linear in the second.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionError, NotAGraphError, PreconditionError

#: Slack on ``||K|| <= 1`` accepted for an angle operator.
TOL_NORM = 1e-10
#: Eigenvalue noise floor for dissipativity and nonnegativity tests.
TOL_DISSIPATIVE = 1e-12
#: Columns of a subspace basis must be orthonormal to this accuracy.
TOL_ORTHONORMAL = 1e-12
#: Smallest singular value of the H+ part of a basis before a subspace is
#: rejected as "not a graph over H+".
TOL_GRAPH = 1e-12


def _frozen(a, dtype=complex) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class KreinStructure:
    """Signature ``(n_plus, n_minus)`` of the canonical symmetry."""

    n_plus: int
    n_minus: int

    def __post_init__(self):
        for name in ("n_plus", "n_minus"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise DimensionError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    @property
    def size(self) -> int:
        return self.n_plus + self.n_minus

    @property
    def kappa(self) -> int:
        """Rank of the positive part (Pontryagin index)."""
        return self.n_plus

    @cached_property
    def signature(self) -> np.ndarray:
        s = np.concatenate([np.ones(self.n_plus), -np.ones(self.n_minus)])
        s.setflags(write=False)
        return s

    @cached_property
    def J(self) -> np.ndarray:
        m = np.diag(self.signature).astype(complex)
        m.setflags(write=False)
        return m

    @cached_property
    def P_plus(self) -> np.ndarray:
        m = np.diag((self.signature > 0).astype(float)).astype(complex)
        m.setflags(write=False)
        return m

    @cached_property
    def P_minus(self) -> np.ndarray:
        m = np.diag((self.signature < 0).astype(float)).astype(complex)
        m.setflags(write=False)
        return m

    def check_vector(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if x.ndim != 1 or x.shape[0] != self.size:
            raise DimensionError(
                f"expected a vector of length {self.size}, got shape {x.shape}"
            )
        return x


@dataclass(frozen=True, eq=False)
class BlockOperator:
    """Dense operator on ``H+ (+) H-`` with its 2x2 block partition."""

    structure: KreinStructure
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        n = self.structure.size
        if m.shape != (n, n):
            raise DimensionError(f"matrix must be {n}x{n}, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise DimensionError("matrix contains non-finite entries")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_blocks(cls, A11, A12, A21, A22) -> "BlockOperator":
        A11, A12, A21, A22 = (np.atleast_2d(np.asarray(b, dtype=complex)) for b in (A11, A12, A21, A22))
        ks = KreinStructure(A11.shape[0], A22.shape[0])
        return cls(ks, np.block([[A11, A12], [A21, A22]]))

    @property
    def n_plus(self) -> int:
        return self.structure.n_plus

    @property
    def n_minus(self) -> int:
        return self.structure.n_minus

    @property
    def A11(self) -> np.ndarray:
        p = self.n_plus
        return self.matrix[:p, :p]

    @property
    def A12(self) -> np.ndarray:
        p = self.n_plus
        return self.matrix[:p, p:]

    @property
    def A21(self) -> np.ndarray:
        p = self.n_plus
        return self.matrix[p:, :p]

    @property
    def A22(self) -> np.ndarray:
        p = self.n_plus
        return self.matrix[p:, p:]

    @cached_property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def with_matrix(self, matrix) -> "BlockOperator":
        return BlockOperator(self.structure, matrix)


@dataclass(frozen=True, eq=False)
class AngleOperator:
    """Contraction ``K: H+ -> H-`` whose graph is a maximal nonnegative subspace."""

    K: np.ndarray
    structure: KreinStructure

    def __post_init__(self):
        K = _frozen(np.atleast_2d(self.K))
        ks = self.structure
        if K.shape != (ks.n_minus, ks.n_plus):
            raise DimensionError(
                f"angle operator must be {ks.n_minus}x{ks.n_plus}, got {K.shape}"
            )
        nrm = float(np.linalg.norm(K, 2))
        if nrm > 1 + TOL_NORM:
            raise PreconditionError(f"angle operator is not a contraction: ||K|| = {nrm:.3e}")
        object.__setattr__(self, "K", K)

    @cached_property
    def norm(self) -> float:
        return float(np.linalg.norm(self.K, 2))

    @classmethod
    def zero(cls, ks: KreinStructure) -> "AngleOperator":
        return cls(np.zeros((ks.n_minus, ks.n_plus), dtype=complex), ks)


@dataclass(frozen=True, eq=False)
class Subspace:
    """Subspace given by an orthonormal basis (columns)."""

    basis: np.ndarray

    def __post_init__(self):
        B = _frozen(self.basis)
        if B.ndim != 2:
            raise DimensionError("basis must be a 2-D array")
        err = np.linalg.norm(B.conj().T @ B - np.eye(B.shape[1]), 2) if B.shape[1] else 0.0
        if err > TOL_ORTHONORMAL:
            raise PreconditionError(f"basis columns are not orthonormal (error {err:.2e})")
        object.__setattr__(self, "basis", B)

    @classmethod
    def from_span(cls, vectors) -> "Subspace":
        """Orthonormalize the columns of ``vectors`` (assumed independent)."""
        V = np.atleast_2d(np.asarray(vectors, dtype=complex))
        Q, _ = np.linalg.qr(V)
        return cls(Q)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @cached_property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T


def indefinite_inner(x, y, ks: KreinStructure) -> complex:
    """Return ``[x, y] = (Jx, y)``."""
    x = ks.check_vector(x)
    y = ks.check_vector(y)
    return complex(np.vdot(y, ks.signature * x))


def hermitian_imag(M) -> np.ndarray:
    """Imaginary part ``(M - M^H) / 2i`` of a square matrix."""
    M = np.asarray(M, dtype=complex)
    return (M - M.conj().T) / 2j


def dissipativity_defect(A: BlockOperator) -> float:
    """Smallest eigenvalue of ``Im(JA)``.

    Nonnegative iff ``A`` is dissipative in the Krein space; a value
    ``>= delta > 0`` means uniformly dissipative with margin ``delta``.
    """
    JA = A.structure.signature[:, None] * A.matrix
    return float(np.linalg.eigvalsh(hermitian_imag(JA))[0])


def is_m_dissipative(A: BlockOperator, tol: float = TOL_DISSIPATIVE) -> bool:
    """Dissipativity in K; for matrices it already implies m-dissipativity."""
    return dissipativity_defect(A) >= -tol


def graph_basis(K) -> np.ndarray:
    """Orthonormal basis of ``{(x, Kx)}`` for an arbitrary matrix ``K``."""
    K = np.atleast_2d(np.asarray(K, dtype=complex))
    G = np.vstack([np.eye(K.shape[1], dtype=complex), K])
    Q, _ = np.linalg.qr(G)
    return Q


def subspace_from_angle(K: AngleOperator) -> Subspace:
    return Subspace(graph_basis(K.K))


def nonnegativity_margin(L: Subspace, ks: KreinStructure) -> float:
    """Smallest eigenvalue of the compressed form ``B^H J B``."""
    B = L.basis
    if B.shape[0] != ks.size:
        raise DimensionError(f"basis has {B.shape[0]} rows, structure needs {ks.size}")
    if B.shape[1] == 0:
        return np.inf
    C = B.conj().T @ (ks.signature[:, None] * B)
    C = (C + C.conj().T) / 2
    return float(np.linalg.eigvalsh(C)[0])


def is_maximal_nonnegative(L: Subspace, ks: KreinStructure, tol: float = TOL_DISSIPATIVE) -> bool:
    return L.dim == ks.n_plus and nonnegativity_margin(L, ks) >= -tol


def graph_operator(L: Subspace, ks: KreinStructure) -> np.ndarray:
    """Matrix ``K`` with ``graph(K) = L``, without a contraction check."""
    B = L.basis
    if B.shape != (ks.size, ks.n_plus):
        raise NotAGraphError(
            f"subspace is not a graph over H+: need dimension {ks.n_plus}, got {B.shape[1]}"
        )
    top, bottom = B[: ks.n_plus], B[ks.n_plus :]
    smin = np.linalg.svd(top, compute_uv=False)[-1]
    if smin < TOL_GRAPH:
        raise NotAGraphError(
            f"subspace is not a graph over H+ (smallest singular value of P+ part {smin:.2e})"
        )
    # K = bottom @ inv(top), via a solve on the transposed system
    return np.linalg.solve(top.T, bottom.T).T


def angle_from_subspace(L: Subspace, ks: KreinStructure) -> AngleOperator:
    return AngleOperator(graph_operator(L, ks), ks)


def subspace_gap(L: Subspace | np.ndarray, M: Subspace | np.ndarray) -> float:
    """Gap metric ``||P_L - P_M||_2`` between two subspaces (or bases)."""
    PL = L.projector if isinstance(L, Subspace) else _proj(L)
    PM = M.projector if isinstance(M, Subspace) else _proj(M)
    return float(np.linalg.norm(PL - PM, 2))


def _proj(B) -> np.ndarray:
    Q, _ = np.linalg.qr(np.atleast_2d(np.asarray(B, dtype=complex)))
    return Q @ Q.conj().T


def angle_gap(K1, K2) -> float:
    """Gap between the graphs of two angle operators (arrays or AngleOperator)."""
    K1 = K1.K if isinstance(K1, AngleOperator) else K1
    K2 = K2.K if isinstance(K2, AngleOperator) else K2
    return subspace_gap(graph_basis(K1), graph_basis(K2))
