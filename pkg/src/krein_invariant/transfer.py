"""Transfer-function quantities of a block operator at a shift ``mu``.

For ``A = [[A11, A12], [A21, A22]]`` and ``A22 - mu`` invertible::

    F(mu) = (A22 - mu)^-1 A21
    G(mu) = A12 (A22 - mu)^-1
    S(mu) = A11 - A12 (A22 - mu)^-1 A21

``S`` is the Schur complement of ``A22 - mu`` in ``A - mu`` shifted back by
``mu``.  The factorisation ``A - mu = U diag(S - mu, A22 - mu) V`` with
``U = [[1, G], [0, 1]]`` and ``V = [[1, 0], [F, 1]]`` is checked numerically
by :func:`frobenius_schur_residual`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedShiftError, PreconditionError
from .krein import BlockOperator, _frozen, hermitian_imag

#: Largest admissible condition number of ``A22 - mu``.
COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class TransferData:
    mu: complex
    F: np.ndarray
    G: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", complex(self.mu))
        for name in ("F", "G", "S"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


@dataclass(frozen=True)
class SectorPath:
    """Ray ``mu = tau * exp(i*angle)`` inside the sector ``eps < arg mu < pi - eps``."""

    epsilon: float
    tau_grid: tuple
    angle: float = np.pi / 2

    def __post_init__(self):
        grid = tuple(float(t) for t in self.tau_grid)
        if not 0 < self.epsilon < np.pi / 2:
            raise PreconditionError("sector aperture epsilon must lie in (0, pi/2)")
        if not self.epsilon <= self.angle <= np.pi - self.epsilon:
            raise PreconditionError("path angle lies outside the sector")
        if not grid or grid[0] <= 0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise PreconditionError("tau_grid must be positive and strictly increasing")
        object.__setattr__(self, "tau_grid", grid)

    def points(self) -> list[complex]:
        direction = np.exp(1j * self.angle) if self.angle != np.pi / 2 else 1j
        return [t * direction for t in self.tau_grid]


def shifted_a22(A: BlockOperator, mu: complex) -> np.ndarray:
    """Return ``A22 - mu`` after checking its conditioning."""
    M = A.A22 - mu * np.eye(A.n_minus)
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedShiftError(
            f"A22 - mu is singular or ill-conditioned at mu={mu!r} (cond={cond:.3e}); choose another shift",
            mu=mu,
            condition=cond,
        )
    return M


def transfer_data(A: BlockOperator, mu: complex) -> TransferData:
    mu = complex(mu)
    M = shifted_a22(A, mu)
    F = np.linalg.solve(M, A.A21)
    G = np.linalg.solve(M.T, A.A12.T).T
    S = A.A11 - A.A12 @ F
    return TransferData(mu, F, G, S)


def _factors(A: BlockOperator, td: TransferData, first_block):
    p, m = A.n_plus, A.n_minus
    U = np.block([[np.eye(p), td.G], [np.zeros((m, p)), np.eye(m)]])
    V = np.block([[np.eye(p), np.zeros((p, m))], [td.F, np.eye(m)]])
    D = np.zeros((p + m, p + m), dtype=complex)
    D[:p, :p] = first_block
    D[p:, p:] = A.A22 - td.mu * np.eye(m)
    return U, D, V


def frobenius_schur_residual(A: BlockOperator, td: TransferData) -> float:
    """Relative residual of both block factorisations at the shift ``td.mu``.

    Checks ``A - mu = U diag(S - mu, A22 - mu) V`` and its J-form
    ``JA + mu = J U diag(S + mu, A22 - mu) V``; returns the larger residual.
    """
    mu = td.mu
    n = A.structure.size
    sig = A.structure.signature

    U, D, V = _factors(A, td, td.S - mu * np.eye(A.n_plus))
    lhs = A.matrix - mu * np.eye(n)
    r1 = np.linalg.norm(lhs - U @ D @ V, 2) / max(np.linalg.norm(lhs, 2), np.finfo(float).tiny)

    U, D, V = _factors(A, td, td.S + mu * np.eye(A.n_plus))
    lhs = sig[:, None] * A.matrix + mu * np.eye(n)
    rhs = sig[:, None] * (U @ D @ V)
    r2 = np.linalg.norm(lhs - rhs, 2) / max(np.linalg.norm(lhs, 2), np.finfo(float).tiny)
    return float(max(r1, r2))


def quadratic_form_terms(A: BlockOperator, td: TransferData, x_plus) -> tuple[complex, complex, complex]:
    """The three terms ``(Sx, x)``, ``(JAv, v)`` and ``mu (Fx, Fx)`` with ``v = (x, -Fx)``."""
    x = np.asarray(x_plus, dtype=complex)
    if x.shape != (A.n_plus,):
        raise PreconditionError(f"x_plus must have length {A.n_plus}")
    Fx = td.F @ x
    v = np.concatenate([x, -Fx])
    JAv = A.structure.signature * (A.matrix @ v)
    return complex(np.vdot(x, td.S @ x)), complex(np.vdot(v, JAv)), td.mu * complex(np.vdot(Fx, Fx))


def quadratic_form_residual(A: BlockOperator, td: TransferData, x_plus) -> float:
    """``|(Sx, x) - (JAv, v) - mu (Fx, Fx)|`` for ``v = (x, -Fx)``."""
    s, q, f = quadratic_form_terms(A, td, x_plus)
    return abs(s - q - f)


def quadratic_form_scale(A: BlockOperator, td: TransferData, x_plus) -> float:
    """Sum of the magnitudes of the three terms; normalises :func:`quadratic_form_residual`."""
    s, q, f = quadratic_form_terms(A, td, x_plus)
    return max(abs(s) + abs(q) + abs(f), np.finfo(float).tiny)


def dissipativity_of_S(A: BlockOperator, td: TransferData) -> float:
    """Smallest eigenvalue of ``Im S(mu)``."""
    return float(np.linalg.eigvalsh(hermitian_imag(td.S))[0])


def g_norm(A: BlockOperator, mu: complex) -> float:
    M = shifted_a22(A, mu)
    G = np.linalg.solve(M.T, A.A12.T).T
    return float(np.linalg.norm(G, 2))


def g_norm_decay(A: BlockOperator, path: SectorPath) -> list[tuple[float, float]]:
    """``||G(mu)||`` along the path, one ``(tau, norm)`` pair per grid point."""
    out = []
    for tau, mu in zip(path.tau_grid, path.points()):
        try:
            out.append((tau, g_norm(A, mu)))
        except IllConditionedShiftError as exc:
            raise IllConditionedShiftError(
                f"resolvent of A22 is singular at grid point tau={tau!r}",
                mu=mu,
                condition=exc.condition,
            ) from exc
    return out


def neumann_bound(A: BlockOperator, tau0: float) -> float:
    """Upper bound for ``tau * ||G(i tau)||`` on ``tau >= tau0 >= 2 ||A22||``.

    Uses ``||A12|| (1 + ||A22||/tau0)`` when ``Im A22 <= 0`` (as for operators
    dissipative in K) and the plain Neumann-series constant
    ``||A12|| (1 + 2 ||A22||/tau0)`` otherwise.
    """
    a22 = float(np.linalg.norm(A.A22, 2))
    a12 = float(np.linalg.norm(A.A12, 2))
    if tau0 < 2 * a22:
        raise PreconditionError("tau0 must be at least 2 ||A22||")
    if np.linalg.eigvalsh(hermitian_imag(A.A22))[-1] <= 1e-12:
        return a12 * (1 + a22 / tau0) if tau0 > 0 else a12
    return a12 * (1 + 2 * a22 / tau0)


def default_shift(A: BlockOperator, max_doublings: int = 80) -> complex:
    """Smallest ``mu = i 2^k`` (``k >= 0``) with ``||G(mu)|| < 1/2``."""
    tau = 1.0
    for _ in range(max_doublings):
        try:
            if g_norm(A, 1j * tau) < 0.5:
                return 1j * tau
        except IllConditionedShiftError:
            pass
        tau *= 2.0
    raise PreconditionError("no shift i*2^k with ||G|| < 1/2 found")
