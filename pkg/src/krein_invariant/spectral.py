"""The restricted operator ``A+ = A|L+`` and its spectral / semigroup diagnostics.

In the coordinate ``x+`` of the graph ``L+ = {(x+, K x+)}`` the restriction is
the ``n_plus x n_plus`` matrix ``A11 + A12 K``.  With ``L = (A22 - mu)(F + K)``
it also equals ``S + G L``, and for ``alpha`` outside the spectrum of ``S``

    A+ - alpha = (1 + T(alpha)) (S - alpha),
    T(alpha) = G (1 - K G)^-1 K (S - mu) (S - alpha)^-1.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from .errors import PreconditionError, SingularShiftError
from .krein import (
    TOL_DISSIPATIVE,
    AngleOperator,
    BlockOperator,
    _frozen,
    dissipativity_defect,
    graph_basis,
)
from .riccati import _k, riccati_residual
from .transfer import COND_LIMIT, transfer_data

#: Certification threshold for ``min Im sigma(A+) >= 0``.
TOL_HALFPLANE = 1e-8
#: Growth bound accepted as "exponential type 0".
TOL_TYPE_ZERO = 1e-6
#: Riccati residual required before a restriction is formed.
TOL_RESTRICT = 1e-8


@dataclass(frozen=True, eq=False)
class RestrictedOperator:
    """``A+`` in the ``x+`` coordinates of the graph of ``K``."""

    matrix: np.ndarray
    source: BlockOperator
    K: AngleOperator
    mu: complex
    consistency: float = 0.0
    q_inverse_norm: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))
        object.__setattr__(self, "mu", complex(self.mu))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: tuple = ()
    halfplane_margin: float | None = None
    halfplane_certified: bool | None = None
    growth_bound: float | None = None
    type_zero: bool | None = None
    decay_certified: bool | None = None
    sector_margin: float | None = None

    def merge(self, other: "SpectralReport") -> "SpectralReport":
        """Fill fields left unset here from ``other``."""
        kw = {k: v for k, v in other.__dict__.items() if v not in (None, ()) and getattr(self, k) in (None, ())}
        return replace(self, **kw)


def restrict(A: BlockOperator, K, mu: complex) -> RestrictedOperator:
    K = K if isinstance(K, AngleOperator) else AngleOperator(K, A.structure)
    td = transfer_data(A, mu)
    res = riccati_residual(A, td, K)
    if res >= TOL_RESTRICT:
        raise PreconditionError(f"K is not invariant to tolerance (Riccati residual {res:.3e})")
    direct = A.A11 + A.A12 @ K.K
    L = (A.A22 - td.mu * np.eye(A.n_minus)) @ (td.F + K.K)
    via_transfer = td.S + td.G @ L
    consistency = float(np.linalg.norm(direct - via_transfer, 2) / max(1.0, np.linalg.norm(direct, 2)))
    # Q^-1 x+ = (x+, K x+), so ||Q^-1|| = sqrt(1 + ||K||^2) <= sqrt(2)
    q_inv = float(np.sqrt(1 + K.norm**2))
    return RestrictedOperator(direct, A, K, td.mu, consistency, q_inv)


def t_alpha(A: BlockOperator, K, mu: complex, alpha: complex) -> np.ndarray:
    """``T(alpha) = G (1 - KG)^-1 K (S - mu) (S - alpha)^-1``."""
    K = _k(K)
    td = transfer_data(A, mu)
    p, m = A.n_plus, A.n_minus
    KG = K @ td.G
    if np.linalg.norm(KG, 2) >= 1:
        raise PreconditionError("||KG|| >= 1; T(alpha) is not defined by a Neumann series")
    S_alpha = td.S - alpha * np.eye(p)
    cond = np.linalg.cond(S_alpha)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularShiftError(f"S - alpha is singular at alpha={complex(alpha)!r} (cond={cond:.3e})")
    inner = np.linalg.solve(np.eye(m) - KG, K @ (td.S - td.mu * np.eye(p)))
    left = td.G @ inner
    return np.linalg.solve(S_alpha.T, left.T).T


def t_alpha_identity_residual(A: BlockOperator, K, mu: complex, alpha: complex) -> float:
    """``||(A+ - alpha) - (1 + T(alpha))(S - alpha)||`` in ``x+`` coordinates."""
    K = _k(K)
    td = transfer_data(A, mu)
    p = A.n_plus
    T = t_alpha(A, K, mu, alpha)
    lhs = A.A11 + A.A12 @ K - alpha * np.eye(p)
    rhs = (np.eye(p) + T) @ (td.S - alpha * np.eye(p))
    return float(np.linalg.norm(lhs - rhs, 2))


def t_alpha_decay(A: BlockOperator, K, mu: complex, tau_grid) -> list[tuple[float, float]]:
    """``||T(-i tau)||`` for each ``tau`` in the grid."""
    return [(float(t), float(np.linalg.norm(t_alpha(A, K, mu, -1j * t), 2))) for t in tau_grid]


def spectrum_halfplane_check(R: RestrictedOperator) -> SpectralReport:
    w = np.linalg.eigvals(R.matrix)
    w = w[np.lexsort((w.real, -w.imag))]
    margin = float(w.imag.min())
    return SpectralReport(
        eigenvalues=tuple(complex(z) for z in w),
        halfplane_margin=margin,
        halfplane_certified=margin >= -TOL_HALFPLANE,
    )


def semigroup_norms(generator: np.ndarray, t_max: float, grid_points: int) -> tuple[np.ndarray, np.ndarray]:
    """``||exp(t B)||_2`` on ``linspace(0, t_max, grid_points)``."""
    ts = np.linspace(0.0, t_max, grid_points)
    n = generator.shape[0]
    step = sla.expm((ts[1] - ts[0]) * generator) if grid_points > 1 else np.eye(n)
    E = np.eye(n, dtype=complex)
    norms = np.empty(grid_points)
    for k in range(grid_points):
        if k:
            E = E @ step
        norms[k] = np.linalg.norm(E, 2)
    return ts, norms


def fit_growth_bound(ts: np.ndarray, norms: np.ndarray) -> float:
    """Least-squares slope of ``log ||exp(tB)||`` over the tail half of the grid."""
    tail = ts >= ts[-1] / 2
    with np.errstate(divide="ignore"):
        logs = np.log(norms[tail])
    if not np.all(np.isfinite(logs)):
        return -np.inf
    return float(np.polyfit(ts[tail], logs, 1)[0])


def default_t_max(R: RestrictedOperator) -> float:
    return 20.0 / max(1.0, float(np.linalg.norm(R.matrix, 2)))


def semigroup_growth(R: RestrictedOperator, t_max: float | None = None, grid_points: int = 200) -> SpectralReport:
    """Fitted growth bound of ``exp(i t A+)`` plus type-0 and decay certificates."""
    t_max = default_t_max(R) if t_max is None else float(t_max)
    if not t_max > 0:
        raise PreconditionError("t_max must be positive")
    if grid_points < 4:
        raise PreconditionError("grid_points must be at least 4")
    ts, norms = semigroup_norms(1j * R.matrix, t_max, grid_points)
    omega = fit_growth_bound(ts, norms)
    delta = dissipativity_defect(R.source)
    decay = bool(delta > TOL_DISSIPATIVE and omega <= -delta / 2)
    return SpectralReport(growth_bound=omega, type_zero=omega <= TOL_TYPE_ZERO, decay_certified=decay)


def field_of_values(B: np.ndarray, n_angles: int = 360) -> np.ndarray:
    """Boundary points of the numerical range of ``B`` from ``n_angles`` support directions."""
    B = np.asarray(B, dtype=complex)
    pts = np.empty(n_angles, dtype=complex)
    for k in range(n_angles):
        rot = np.exp(-2j * np.pi * k / n_angles)
        H = (rot * B + (rot * B).conj().T) / 2
        _, V = np.linalg.eigh(H)
        v = V[:, -1]
        pts[k] = np.vdot(v, B @ v)
    return pts


def sector_check(R: RestrictedOperator, eps: float, n_angles: int = 360) -> float:
    """Distance of the numerical range of ``i A+ - eps`` from the closed right half-plane.

    Every matrix generates a holomorphic semigroup, so this only quantifies
    how far ``i A+ - eps`` sits inside the left half-plane; a positive value
    is the matrix-scale stand-in for the H0 property.
    """
    if not eps > 0:
        raise PreconditionError("eps must be positive")
    B = 1j * R.matrix - eps * np.eye(R.n)
    return float(-field_of_values(B, n_angles).real.max())


def spectral_report(
    R: RestrictedOperator,
    t_max: float | None = None,
    grid_points: int = 200,
    sector_eps: float = 1.0,
) -> SpectralReport:
    rep = spectrum_halfplane_check(R).merge(semigroup_growth(R, t_max, grid_points))
    return replace(rep, sector_margin=sector_check(R, sector_eps))


def spectrum_inclusion_distance(R: RestrictedOperator) -> float:
    """Largest distance from an eigenvalue of ``A+`` to the spectrum of ``A``."""
    inner = np.linalg.eigvals(R.matrix)
    outer = np.linalg.eigvals(R.source.matrix)
    return float(np.abs(inner[:, None] - outer[None, :]).min(axis=1).max())


def eigen_type_residuals(A: BlockOperator) -> np.ndarray:
    """``|Im[Ax, x] - Im(alpha) [x, x]| / (||A|| ||x||^2)`` for each eigenpair."""
    w, X = np.linalg.eig(A.matrix)
    sig = A.structure.signature
    out = np.empty(len(w))
    for k in range(len(w)):
        x = X[:, k]
        lhs = np.vdot(x, sig * (A.matrix @ x)).imag
        rhs = w[k].imag * np.vdot(x, sig * x).real
        out[k] = abs(lhs - rhs) / (max(A.norm, 1e-300) * np.vdot(x, x).real)
    return out


def lower_eigenvector_graph_residuals(A: BlockOperator, K, tol: float = TOL_HALFPLANE) -> np.ndarray:
    """Distance from ``graph(K)`` of each unit eigenvector with ``Im alpha < -tol``."""
    w, X = np.linalg.eig(A.matrix)
    B = graph_basis(_k(K))
    out = []
    for k in np.flatnonzero(w.imag < -tol):
        x = X[:, k] / np.linalg.norm(X[:, k])
        out.append(np.linalg.norm(x - B @ (B.conj().T @ x)))
    return np.array(out)

