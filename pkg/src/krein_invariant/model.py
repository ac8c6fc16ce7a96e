"""Finite-difference model of the operator ``[[u, d/dx], [d/dx, d^2/dx^2]]`` on ``[0, 1]``.

Both components carry homogeneous Dirichlet conditions (zero ghost values),
so the central first difference ``D`` is antisymmetric and the second
difference ``Lap`` is symmetric.  For real ``u`` this makes ``J A`` Hermitian,
i.e. the discrete operator is selfadjoint in the Krein space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .krein import BlockOperator, _frozen


@dataclass(frozen=True, eq=False)
class ModelProblem:
    n: int
    u_samples: np.ndarray

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise PreconditionError(f"grid resolution n must be an integer >= 3, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        u = np.asarray(self.u_samples)
        u = _frozen(u, dtype=complex if np.iscomplexobj(u) else float)
        if u.shape != (self.n,):
            raise PreconditionError(f"u_samples must have length n={self.n}, got shape {u.shape}")
        object.__setattr__(self, "u_samples", u)

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.h * np.arange(1, self.n + 1)

    @classmethod
    def from_function(cls, n: int, u) -> "ModelProblem":
        """Sample ``u`` (callable or constant) at the interior nodes."""
        if n < 3:
            raise PreconditionError(f"grid resolution n must be >= 3, got {n}")
        x = np.arange(1, n + 1) / (n + 1)
        vals = u(x) if callable(u) else np.full(n, u)
        return cls(n, np.broadcast_to(np.asarray(vals), (n,)))


def first_difference(n: int, h: float) -> np.ndarray:
    """Central ``(x[j+1] - x[j-1]) / 2h`` with zero ghost values."""
    return (np.eye(n, k=1) - np.eye(n, k=-1)) / (2 * h)


def second_difference(n: int, h: float) -> np.ndarray:
    """``(x[j+1] - 2 x[j] + x[j-1]) / h^2`` with zero ghost values."""
    return (np.eye(n, k=1) - 2 * np.eye(n) + np.eye(n, k=-1)) / h**2


def discretize_model(problem: ModelProblem) -> BlockOperator:
    n, h = problem.n, problem.h
    D = first_difference(n, h)
    return BlockOperator.from_blocks(np.diag(problem.u_samples), D, D, second_difference(n, h))


def model_invariant_subspace(problem: ModelProblem, **pipeline_kw):
    """Solve and certify the model operator; returns ``(K, SpectralReport)``."""
    from .pipeline import run_pipeline

    out = run_pipeline(discretize_model(problem), **pipeline_kw)
    return out.solve.K, out.report


def potential(name: str, n: int) -> ModelProblem:
    """Named potentials ``zero``, ``const:c``, ``sin`` (sin(pi x)) and ``x``."""
    if name == "zero":
        return ModelProblem.from_function(n, 0.0)
    if name.startswith("const:"):
        try:
            c = complex(name.split(":", 1)[1])
        except ValueError as exc:
            raise PreconditionError(f"bad constant potential {name!r}") from exc
        return ModelProblem.from_function(n, c.real if c.imag == 0 else c)
    if name == "sin":
        return ModelProblem.from_function(n, lambda x: np.sin(np.pi * x))
    if name == "x":
        return ModelProblem.from_function(n, lambda x: x)
    raise PreconditionError(f"unknown potential {name!r}")
