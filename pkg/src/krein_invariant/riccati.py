"""Angle operators of invariant maximal nonnegative subspaces.

A graph subspace ``{(x, Kx)}`` is A-invariant iff ``K`` solves the Riccati
equation, written either in transfer-function form

    (1 - K G)(A22 - mu)(F + K) = K (S - mu)

or in block form ``A21 + A22 K - K A11 - K A12 K = 0``.  Three routes to a
solution are provided: the fixed-point iteration on
``F + K = (A22 - mu)^-1 (1 - K G)^-1 K (S - mu)``, Galerkin truncation of the
H+ block, and an independent spectral oracle that picks the ``n_plus``
eigenvalues of ``A + i eps P+`` with largest imaginary part.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    ConvergenceError,
    DegenerateSelectionError,
    KreinError,
    NotAGraphError,
    PreconditionError,
)
from .krein import (
    TOL_DISSIPATIVE,
    AngleOperator,
    BlockOperator,
    Subspace,
    angle_gap,
    dissipativity_defect,
    graph_basis,
    graph_operator,
)
from .transfer import TransferData, default_shift, g_norm, transfer_data

log = logging.getLogger(__name__)

#: Relative eigenvalue gap below which the spectral selection is ambiguous.
GAP_TOL = 1e-10
#: Regularisation tried first when the unregularised selection is ambiguous.
TIE_EPS_START = 1e-6


def _k(K) -> np.ndarray:
    return K.K if isinstance(K, AngleOperator) else np.atleast_2d(np.asarray(K, dtype=complex))


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 500
    tol_residual: float = 1e-10
    relaxation: float = 1.0
    epsilon_schedule: tuple = (1e-2, 1e-4, 1e-6, 0.0)

    def __post_init__(self):
        sched = tuple(float(e) for e in self.epsilon_schedule)
        object.__setattr__(self, "epsilon_schedule", sched)
        if self.max_iterations < 1:
            raise PreconditionError("max_iterations must be positive")
        if not self.tol_residual > 0:
            raise PreconditionError("tol_residual must be positive")
        if not 0 < self.relaxation <= 1:
            raise PreconditionError("relaxation must lie in (0, 1]")
        if not sched or sched[-1] != 0 or any(e < 0 for e in sched):
            raise PreconditionError("epsilon_schedule must be nonnegative and end at 0")
        if any(b >= a for a, b in zip(sched, sched[1:])):
            raise PreconditionError("epsilon_schedule must be strictly decreasing")


@dataclass(frozen=True, eq=False)
class GalerkinScheme:
    """Nested orthogonal projections ``P_1 <= P_2 <= ... <= P_last = I`` on H+.

    Stored as one orthonormal basis ``V`` and the list of ranks, so that
    ``P_n = V[:, :r_n] V[:, :r_n]^H``.
    """

    basis: np.ndarray
    ranks: tuple

    def __post_init__(self):
        V = np.array(self.basis, dtype=complex)
        ranks = tuple(int(r) for r in self.ranks)
        n = V.shape[0]
        if V.shape != (n, n) or np.linalg.norm(V.conj().T @ V - np.eye(n), 2) > 1e-12:
            raise PreconditionError("Galerkin basis must be a square unitary matrix")
        if not ranks or ranks[0] < 1 or any(b <= a for a, b in zip(ranks, ranks[1:])):
            raise PreconditionError("ranks must be positive and strictly increasing")
        if ranks[-1] != n:
            raise PreconditionError("last projection must be the identity (rank n_plus)")
        V.setflags(write=False)
        object.__setattr__(self, "basis", V)
        object.__setattr__(self, "ranks", ranks)

    @property
    def projections(self) -> list[np.ndarray]:
        return [self.basis[:, :r] @ self.basis[:, :r].conj().T for r in self.ranks]

    @classmethod
    def from_projections(cls, projections) -> "GalerkinScheme":
        """Build a scheme from explicit nested projection matrices."""
        mats = [np.asarray(P, dtype=complex) for P in projections]
        n = mats[-1].shape[0]
        cols: list[np.ndarray] = []
        ranks = []
        for P in mats:
            if np.linalg.norm(P - P.conj().T, 2) > 1e-12 or np.linalg.norm(P @ P - P, 2) > 1e-12:
                raise PreconditionError("each P_n must be an orthogonal projection")
            prev = np.column_stack(cols) if cols else np.zeros((n, 0), dtype=complex)
            if np.linalg.norm(P @ prev - prev) > 1e-10:
                raise PreconditionError("projections must be nested")
            new = P - prev @ prev.conj().T
            w, U = np.linalg.eigh((new + new.conj().T) / 2)
            cols.extend(U[:, k] for k in np.flatnonzero(w > 0.5))
            ranks.append(len(cols))
        return cls(np.column_stack(cols), tuple(ranks))


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Angle operator together with the diagnostics of how it was found."""

    K: AngleOperator
    mu: complex
    method: str
    iterations: int = 0
    riccati_residual: float = np.nan
    pontryagin_residual: float = np.nan
    invariance_residual: float = np.nan
    oracle_gap: float = np.nan
    fallback: bool = False
    notes: tuple = field(default=())


# ---------------------------------------------------------------------------
# residuals


def riccati_residual(A: BlockOperator, td: TransferData, K) -> float:
    """``||(1 - KG)(A22 - mu)(F + K) - K(S - mu)|| / (1 + ||A||)``.

    Expanding with ``(A22 - mu) F = A21`` shows the residual matrix equals
    ``A21 + A22 K - K A11 - K A12 K``, so this agrees with
    :func:`pontryagin_residual` up to rounding.
    """
    K = _k(K)
    p, m = A.n_plus, A.n_minus
    lhs = (np.eye(m) - K @ td.G) @ (A.A22 - td.mu * np.eye(m)) @ (td.F + K)
    rhs = K @ (td.S - td.mu * np.eye(p))
    return float(np.linalg.norm(lhs - rhs, 2) / (1 + A.norm))


def pontryagin_matrix(A: BlockOperator, K) -> np.ndarray:
    K = _k(K)
    return A.A21 + A.A22 @ K - K @ A.A11 - K @ A.A12 @ K


def pontryagin_residual(A: BlockOperator, K) -> float:
    """``||A21 + A22 K - K A11 - K A12 K|| / (1 + ||A||)``."""
    return float(np.linalg.norm(pontryagin_matrix(A, K), 2) / (1 + A.norm))


def invariance_residual(A: BlockOperator, L) -> float:
    """``||(I - P_L) A P_L||`` for a subspace (or basis with orthonormal columns)."""
    B = L.basis if isinstance(L, Subspace) else np.asarray(L, dtype=complex)
    AB = A.matrix @ B
    return float(np.linalg.norm(AB - B @ (B.conj().T @ AB), 2))


def graph_invariance_residual(A: BlockOperator, K) -> float:
    return invariance_residual(A, graph_basis(_k(K)))


def _clip_unit_ball(K: np.ndarray) -> np.ndarray:
    U, s, Vh = np.linalg.svd(K, full_matrices=False)
    if s.size and s[0] > 1.0:
        K = (U * np.minimum(s, 1.0)) @ Vh
    return K


# ---------------------------------------------------------------------------
# fixed point

#: Iterations between convergence-rate checkpoints of the fixed-point loop.
CHECK_EVERY = 50


def _hopeless(prev: float, res: float, it: int, opts: SolverOptions) -> bool:
    """True when the observed linear rate cannot reach the tolerance within budget."""
    if res >= prev:
        return True
    rate = (res / prev) ** (1.0 / CHECK_EVERY)
    needed = np.log(opts.tol_residual / res) / np.log(rate)
    return needed > 2 * (opts.max_iterations - it)


def solve_fixed_point(
    A: BlockOperator,
    mu: complex,
    opts: SolverOptions = SolverOptions(),
    K0=None,
) -> SolveResult:
    """Iterate ``K <- -F + (A22 - mu)^-1 (1 - KG)^-1 K (S - mu)`` from ``K0 = 0``.

    Each step is blended with the previous iterate by ``opts.relaxation`` and
    projected back onto the unit ball by clipping singular values at one.
    """
    defect = dissipativity_defect(A)
    if defect < -TOL_DISSIPATIVE:
        raise PreconditionError(f"operator is not dissipative in K (defect {defect:.3e})")
    td = transfer_data(A, mu)
    gn = float(np.linalg.norm(td.G, 2))
    if gn >= 0.5:
        raise PreconditionError(
            f"||G(mu)|| = {gn:.3f} >= 1/2 at mu={complex(mu)!r}; increase |mu| along the "
            "imaginary axis (||G|| decays like 1/|mu|)"
        )
    p, m = A.n_plus, A.n_minus
    M = A.A22 - td.mu * np.eye(m)
    S_mu = td.S - td.mu * np.eye(p)
    lu = sla.lu_factor(M)
    K = np.zeros((m, p), dtype=complex) if K0 is None else _k(K0).copy()
    w = opts.relaxation
    res = riccati_residual(A, td, K)
    inv = graph_invariance_residual(A, K) if res < opts.tol_residual else np.inf
    history = [res]
    it = 0
    while res >= opts.tol_residual or inv >= 10 * opts.tol_residual:
        if it >= opts.max_iterations:
            raise ConvergenceError(
                f"fixed-point iteration did not converge in {it} iterations (residual {res:.3e})",
                residual=res,
                iterations=it,
            )
        inner = np.linalg.solve(np.eye(m) - K @ td.G, K @ S_mu)
        K_new = -td.F + sla.lu_solve(lu, inner)
        K = _clip_unit_ball((1 - w) * K + w * K_new)
        res = riccati_residual(A, td, K)
        inv = graph_invariance_residual(A, K) if res < opts.tol_residual else np.inf
        it += 1
        if it % CHECK_EVERY == 0:
            if it >= 2 * CHECK_EVERY and _hopeless(history[-1], res, it, opts):
                raise ConvergenceError(
                    f"fixed-point iteration stalled after {it} iterations (residual {res:.3e})",
                    residual=res,
                    iterations=it,
                )
            history.append(res)
    angle = AngleOperator(K, A.structure)
    return SolveResult(
        angle,
        td.mu,
        "fixed_point",
        iterations=it,
        riccati_residual=res,
        pontryagin_residual=pontryagin_residual(A, K),
        invariance_residual=inv,
    )


# ---------------------------------------------------------------------------
# spectral oracle


def epsilon_regularize(A: BlockOperator, eps: float) -> BlockOperator:
    """``A + i eps P+``: shift the H+ diagonal block by ``i eps``."""
    if eps < 0:
        raise PreconditionError("eps must be nonnegative")
    if eps == 0:
        return A
    M = np.array(A.matrix)
    p = A.n_plus
    M[:p, :p] += 1j * eps * np.eye(p)
    return A.with_matrix(M)


def _upper_selection(A: BlockOperator, scale: float):
    """Schur basis of the ``n_plus`` eigenvalues of largest imaginary part, or None."""
    p = A.n_plus
    w = np.linalg.eigvals(A.matrix)
    im = np.sort(w.imag)[::-1]
    gap = im[p - 1] - im[p]
    if gap <= GAP_TOL * scale:
        return None, gap
    cut = 0.5 * (im[p - 1] + im[p])
    T, Z, sdim = sla.schur(A.matrix, output="complex", sort=lambda x: x.imag > cut)
    if sdim != p:
        return None, gap
    return Z[:, :p], gap


def newton_polish(A: BlockOperator, K, steps: int = 8, tol: float = 1e-14) -> np.ndarray:
    """Newton iteration on ``A21 + A22 K - K A11 - K A12 K = 0``."""
    K = _k(K).copy()
    best, best_res = K, pontryagin_residual(A, K)
    for _ in range(steps):
        if best_res < tol:
            break
        R = pontryagin_matrix(A, K)
        try:
            dK = sla.solve_sylvester(A.A22 - K @ A.A12, -(A.A11 + A.A12 @ K), -R)
        except (np.linalg.LinAlgError, ValueError):
            break
        if not np.all(np.isfinite(dK)):
            break
        K = K + dK
        res = pontryagin_residual(A, K)
        if res < best_res:
            best, best_res = K, res
        else:
            break
    return best


def spectral_angle_operator(A: BlockOperator, tie_epsilon: float = 0.0) -> AngleOperator:
    """Angle operator of the upper spectral subspace of ``A + i tie_epsilon P+``.

    When the ``n_plus``-th and ``(n_plus+1)``-th imaginary parts are too
    close to separate, a larger regularisation is used for the selection and
    the result is continued back to ``tie_epsilon`` by Newton steps on the
    Riccati equation.
    """
    defect = dissipativity_defect(A)
    if defect < -TOL_DISSIPATIVE:
        raise PreconditionError(f"operator is not dissipative in K (defect {defect:.3e})")
    target = epsilon_regularize(A, tie_epsilon)
    scale = max(1.0, A.norm)
    eps = tie_epsilon
    for _ in range(6):
        basis, gap = _upper_selection(epsilon_regularize(A, eps), scale)
        if basis is not None:
            break
        eps = max(100 * eps, TIE_EPS_START * scale)
        log.debug("spectral selection ambiguous (gap %.2e); retrying with eps=%.2e", gap, eps)
    else:
        raise DegenerateSelectionError("spectral selection degenerate")
    try:
        K = graph_operator(Subspace(basis), A.structure)
    except NotAGraphError as exc:
        raise DegenerateSelectionError(f"spectral selection degenerate: {exc}") from exc
    if eps != tie_epsilon or pontryagin_residual(target, K) > 1e-14:
        K = newton_polish(target, K)
        if eps != tie_epsilon and pontryagin_residual(target, K) > 1e-11:
            raise DegenerateSelectionError(
                "spectral selection degenerate: regularised subspace does not continue to eps="
                f"{tie_epsilon!r}"
            )
    K = _clip_unit_ball(K) if np.linalg.norm(K, 2) <= 1 + 1e-8 else K
    try:
        return AngleOperator(K, A.structure)
    except PreconditionError as exc:
        raise DegenerateSelectionError(f"spectral selection degenerate: {exc}") from exc


def regularization_path(A: BlockOperator, schedule=SolverOptions().epsilon_schedule) -> list[AngleOperator]:
    """Spectral angle operators of ``A + i eps P+`` along a decreasing schedule."""
    return [spectral_angle_operator(A, eps) for eps in schedule]


# ---------------------------------------------------------------------------
# pipeline


def _finish(A: BlockOperator, td: TransferData, K: AngleOperator, mu, method, **kw) -> SolveResult:
    return SolveResult(
        K,
        complex(mu),
        method,
        riccati_residual=riccati_residual(A, td, K),
        pontryagin_residual=pontryagin_residual(A, K),
        invariance_residual=graph_invariance_residual(A, K),
        **kw,
    )


def solve(
    A: BlockOperator,
    mu: complex | None = None,
    method: str = "fixed_point",
    opts: SolverOptions = SolverOptions(),
    steps: int | None = None,
    cross_check: bool = True,
) -> SolveResult:
    """Find an A-invariant maximal nonnegative subspace.

    ``method`` is ``"fixed_point"`` (falls back to the spectral oracle on
    non-convergence), ``"spectral"`` or ``"galerkin"`` (``steps`` nested
    truncations).  With ``cross_check`` the result is compared against the
    spectral oracle and the gap recorded.
    """
    defect = dissipativity_defect(A)
    if defect < -TOL_DISSIPATIVE:
        raise PreconditionError(f"operator is not dissipative in K (defect {defect:.3e})")
    mu = default_shift(A) if mu is None else complex(mu)
    td = transfer_data(A, mu)
    notes = []
    oracle = None

    if method == "spectral":
        oracle = spectral_angle_operator(A)
        result = _finish(A, td, oracle, mu, "spectral")
    elif method == "fixed_point":
        try:
            result = _polished(A, td, solve_fixed_point(A, mu, opts))
        except ConvergenceError as exc:
            notes.append(f"fixed point failed: {exc}; using spectral oracle")
            oracle = spectral_angle_operator(A)
            result = _finish(A, td, oracle, mu, "spectral", fallback=True, iterations=exc.iterations or 0)
    elif method == "galerkin":
        scheme = default_galerkin_scheme(A, mu, steps=steps)
        seq = galerkin_sequence(A, scheme, mu, opts)
        result = _polished(A, td, _finish(A, td, seq[-1], mu, "galerkin", iterations=len(seq)))
    else:
        raise PreconditionError(f"unknown method {method!r}")

    if cross_check:
        if oracle is None:
            try:
                oracle = spectral_angle_operator(A)
            except DegenerateSelectionError as exc:
                notes.append(f"oracle unavailable: {exc}")
        if oracle is not None:
            gap = angle_gap(result.K, oracle)
            if gap > 1e-6:
                notes.append(f"solution differs from spectral oracle (gap {gap:.2e})")
            result = _replace(result, oracle_gap=gap)
    return _replace(result, notes=tuple(notes))


def _polished(A: BlockOperator, td: TransferData, r: SolveResult) -> SolveResult:
    """Refine an iterative solution with Newton steps; keep it if the residual drops."""
    K = newton_polish(A, r.K)
    if np.linalg.norm(K, 2) > 1 + 1e-12 or pontryagin_residual(A, K) >= r.pontryagin_residual:
        return r
    K = AngleOperator(_clip_unit_ball(K), A.structure)
    return _finish(A, td, K, r.mu, r.method, iterations=r.iterations, fallback=r.fallback, notes=r.notes)


def _replace(r: SolveResult, **kw) -> SolveResult:
    from dataclasses import replace

    return replace(r, **kw)


# ---------------------------------------------------------------------------
# Galerkin truncation


def default_galerkin_scheme(A: BlockOperator, mu: complex, steps: int | None = None, ranks=None) -> GalerkinScheme:
    """Nested spans of eigenvectors of ``S(mu)^H S(mu)``, smallest eigenvalues first.

    ``ranks`` defaults to doubling ranks ``1, 2, 4, ...`` capped by ``n_plus``;
    ``steps`` keeps only the last ``steps`` of them.
    """
    p = A.n_plus
    td = transfer_data(A, mu)
    _, V = np.linalg.eigh(td.S.conj().T @ td.S)
    if ranks is None:
        ranks, r = [], 1
        while r < p:
            ranks.append(r)
            r *= 2
        ranks.append(p)
        if steps is not None:
            if steps < 1:
                raise PreconditionError("steps must be positive")
            ranks = ranks[-steps:]
    return GalerkinScheme(V, tuple(ranks))


def truncate(A: BlockOperator, V: np.ndarray) -> BlockOperator:
    """Compression ``[[V^H A11 V, V^H A12], [A21 V, A22]]`` in the coordinates of ``V``."""
    return BlockOperator.from_blocks(V.conj().T @ A.A11 @ V, V.conj().T @ A.A12, A.A21 @ V, A.A22)


def galerkin_sequence(
    A: BlockOperator,
    scheme: GalerkinScheme,
    mu: complex,
    opts: SolverOptions = SolverOptions(),
    method: str = "fixed_point",
) -> list[AngleOperator]:
    """Solve the truncated problems and embed each ``K_n`` as ``K_n P_n``."""
    if g_norm(A, mu) >= 0.5:
        raise PreconditionError("||G(mu)|| >= 1/2; increase |mu|")
    out = []
    for n, r in enumerate(scheme.ranks, start=1):
        V = scheme.basis[:, :r]
        An = truncate(A, V)
        try:
            res = solve(An, mu, method=method, opts=opts, cross_check=False)
        except KreinError as exc:
            raise type(exc)(f"Galerkin step {n} (rank {r}): {exc}") from exc
        out.append(AngleOperator(res.K.K @ V.conj().T, A.structure))
    return out


def probe_errors(seq: list[AngleOperator], probes: np.ndarray) -> np.ndarray:
    """``||(K_n - K_last) x||`` for each step ``n`` (rows) and probe column ``x``."""
    last = seq[-1].K
    return np.array([np.linalg.norm((K.K - last) @ probes, axis=0) for K in seq])
