"""Solve -> restrict -> analyse, with the certificates reported by the CLI."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConvergenceError, PreconditionError
from .krein import BlockOperator, dissipativity_defect
from .riccati import SolveResult, SolverOptions, solve
from .spectral import (
    TOL_HALFPLANE,
    RestrictedOperator,
    SpectralReport,
    restrict,
    spectral_report,
)

#: Certificate (a): ``||K|| <= 1 + TOL_CERT_NORM`` and invariance residual below TOL_CERT_INVARIANCE.
TOL_CERT_NORM = 1e-8
TOL_CERT_INVARIANCE = 1e-8


@dataclass(frozen=True, eq=False)
class PipelineResult:
    solve: SolveResult
    restricted: RestrictedOperator
    report: SpectralReport
    defect: float

    @property
    def certificates(self) -> dict[str, bool]:
        return certificates(
            self.solve.K.norm,
            self.solve.invariance_residual,
            self.report.halfplane_margin,
            self.report.growth_bound,
            self.defect,
        )


def certificates(k_norm, invariance, margin, growth_bound, defect) -> dict[str, bool]:
    """Certificates derived from the reported numbers.

    * ``a``: ``||K|| <= 1 + 1e-8`` and invariance residual ``< 1e-8``
    * ``b``: ``min Im sigma(A+) >= -1e-8``
    * ``stable``: defect ``> 0`` and fitted growth bound ``<= -defect/2``
    """
    return {
        "a": bool(k_norm <= 1 + TOL_CERT_NORM and invariance < TOL_CERT_INVARIANCE),
        "b": bool(margin >= -TOL_HALFPLANE),
        "stable": bool(defect > 1e-12 and growth_bound <= -defect / 2),
    }


def run_pipeline(
    A: BlockOperator,
    mu: complex | None = None,
    method: str = "fixed_point",
    steps: int | None = None,
    opts: SolverOptions = SolverOptions(),
    t_max: float | None = None,
    grid_points: int = 200,
    sector_eps: float = 1.0,
) -> PipelineResult:
    sol = solve(A, mu, method=method, opts=opts, steps=steps)
    try:
        R = restrict(A, sol.K, sol.mu)
    except PreconditionError as exc:
        raise ConvergenceError(str(exc), residual=sol.riccati_residual) from exc
    rep = spectral_report(R, t_max=t_max, grid_points=grid_points, sector_eps=sector_eps)
    return PipelineResult(sol, R, rep, dissipativity_defect(A))
