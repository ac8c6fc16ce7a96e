"""Seeded random families of block operators used by tests and sweeps."""

from __future__ import annotations

import numpy as np

from .krein import BlockOperator, KreinStructure


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_complex(shape, rng, scale: float = 1.0) -> np.ndarray:
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_hermitian(n: int, rng, scale: float = 1.0) -> np.ndarray:
    X = random_complex((n, n), rng)
    return scale * (X + X.conj().T) / 2


def random_psd(n: int, rng, rank: int | None = None, scale: float = 1.0) -> np.ndarray:
    rank = n if rank is None else rank
    W = random_complex((n, rank), rng)
    return scale * (W @ W.conj().T) / max(rank, 1)


def random_block_operator(n_plus: int, n_minus: int, seed=None, scale: float = 1.0) -> BlockOperator:
    """Gaussian operator with no structure."""
    rng = _rng(seed)
    n = n_plus + n_minus
    return BlockOperator(KreinStructure(n_plus, n_minus), random_complex((n, n), rng, scale) / np.sqrt(n))


def random_dissipative(
    n_plus: int,
    n_minus: int,
    seed=None,
    *,
    defect: float | None = None,
    q_rank: int | None = None,
    q_scale: float = 1.0,
) -> BlockOperator:
    """Random ``A = J (H + iQ)`` with ``H`` Hermitian and ``Q`` positive semidefinite.

    ``defect`` pins the smallest eigenvalue of ``Q`` (the dissipativity
    defect of ``A``); ``q_rank`` makes ``Q`` rank deficient.
    """
    rng = _rng(seed)
    ks = KreinStructure(n_plus, n_minus)
    n = ks.size
    H = random_hermitian(n, rng) / np.sqrt(n)
    Q = random_psd(n, rng, rank=q_rank, scale=q_scale)
    if defect is not None:
        Q = Q - (np.linalg.eigvalsh(Q)[0] - defect) * np.eye(n)
    JA = H + 1j * Q
    return BlockOperator(ks, ks.signature[:, None] * JA)


def random_selfadjoint(n_plus: int, n_minus: int, seed=None) -> BlockOperator:
    """Random operator selfadjoint in K (``JA`` Hermitian)."""
    rng = _rng(seed)
    ks = KreinStructure(n_plus, n_minus)
    H = random_hermitian(ks.size, rng) / np.sqrt(ks.size)
    return BlockOperator(ks, ks.signature[:, None] * H)


def random_contraction(n_rows: int, n_cols: int, seed=None, norm: float | None = None) -> np.ndarray:
    """Random matrix with operator norm ``norm`` (uniform in (0, 1) when omitted)."""
    rng = _rng(seed)
    K = random_complex((n_rows, n_cols), rng)
    target = rng.uniform(0.05, 1.0) if norm is None else norm
    return K * (target / np.linalg.norm(K, 2))


def random_compact_coupling(n_plus: int, n_minus: int, seed=None) -> BlockOperator:
    """Uniformly dissipative ``A = J (H + iQ)`` shaped like a discretised unbounded operator.

    ``H11`` has diagonal growth ``k^2`` while the coupling rows and the
    ``H+`` rows of the dissipative part decay like ``1/k``, so the leading
    modes carry most of the interaction. Galerkin truncations ordered by
    mode index then converge monotonically for almost every probe.
    """
    rng = _rng(seed)
    ks = KreinStructure(n_plus, n_minus)
    k = np.arange(1, n_plus + 1, dtype=float)
    H11 = np.diag(k**2) + random_hermitian(n_plus, rng) / np.sqrt(n_plus)
    H12 = random_complex((n_plus, n_minus), rng) / np.sqrt(n_minus) / k[:, None]
    H22 = random_hermitian(n_minus, rng) / np.sqrt(n_minus)
    H = np.block([[H11, H12], [H12.conj().T, H22]])
    w = np.concatenate([1 / k, np.ones(n_minus)])
    C = random_complex((ks.size, ks.size), rng) / np.sqrt(ks.size) * w[:, None]
    Q = C @ C.conj().T + rng.uniform(0.1, 1) * np.eye(ks.size)
    return BlockOperator(ks, ks.signature[:, None] * (H + 1j * Q))
