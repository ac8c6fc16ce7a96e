import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from krein_invariant.errors import PreconditionError, SingularShiftError
from krein_invariant.generators import random_dissipative, random_selfadjoint
from krein_invariant.krein import BlockOperator
from krein_invariant.riccati import solve, spectral_angle_operator
from krein_invariant.spectral import (
    SpectralReport,
    eigen_type_residuals,
    field_of_values,
    fit_growth_bound,
    lower_eigenvector_graph_residuals,
    restrict,
    sector_check,
    semigroup_growth,
    semigroup_norms,
    spectral_report,
    spectrum_halfplane_check,
    spectrum_inclusion_distance,
    t_alpha,
    t_alpha_decay,
    t_alpha_identity_residual,
)

from conftest import decoupled

seeds = st.integers(0, 2**32 - 1)


def restricted(M):
    """Restriction equal to ``M``: decouple ``M`` from a single negative mode, ``K = 0``."""
    M = np.atleast_2d(M)
    A = decoupled(M, [[-1j]])
    return restrict(A, np.zeros((1, M.shape[0])), 4j)


class TestRestrict:
    def test_anchor(self, anchor):
        R = restrict(anchor, [[-1j / 3]], 1j)
        assert abs(R.matrix[0, 0] - 2j) < 1e-15
        assert R.consistency < 1e-15
        assert R.q_inverse_norm == pytest.approx(np.sqrt(10 / 9))

    def test_rejects_non_solution(self, anchor):
        with pytest.raises(PreconditionError, match="not invariant"):
            restrict(anchor, [[0.5]], 1j)

    def test_read_only(self, anchor):
        R = restrict(anchor, [[-1j / 3]], 1j)
        with pytest.raises(ValueError):
            R.matrix[0, 0] = 0

    @pytest.mark.parametrize("seed", range(5))
    def test_two_formulas_agree(self, seed):
        A = random_dissipative(4, 3, seed, defect=0.2)
        res = solve(A)
        R = restrict(A, res.K, res.mu)
        assert R.consistency < 1e-10
        assert spectrum_inclusion_distance(R) < 1e-8


class TestTAlpha:
    def test_vanishes_without_coupling(self, anchor):
        # A12 = 0 gives G = 0
        assert np.all(t_alpha(anchor, [[-1j / 3]], 1j, -1j) == 0)

    def test_singular_shift(self, anchor):
        # S = A11 = 2i when A12 = 0
        with pytest.raises(SingularShiftError):
            t_alpha(anchor, [[-1j / 3]], 1j, 2j)

    def test_large_kg(self):
        # G = 10 / (-2i) = 5i at mu = i
        A = BlockOperator.from_blocks([[0]], [[10]], [[-10]], [[-1j]])
        with pytest.raises(PreconditionError, match="KG"):
            t_alpha(A, [[0.5]], 1j, -1j)

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.floats(0.5, 50), st.floats(-3, 3))
    def test_factor_identity(self, seed, tau, re):
        A = random_dissipative(3, 3, seed, defect=0.1)
        K = spectral_angle_operator(A)
        mu = 4j
        assert t_alpha_identity_residual(A, K, mu, re - 1j * tau) < 1e-10 * (1 + A.norm + tau)

    @pytest.mark.parametrize("seed", range(5))
    def test_decay(self, seed):
        A = random_dissipative(4, 4, seed)
        res = solve(A)
        vals = [v for _, v in t_alpha_decay(A, res.K, res.mu, [1, 10, 100, 1000])]
        assert all(b < a for a, b in zip(vals, vals[1:]))


class TestHalfplane:
    def test_zero(self):
        rep = spectrum_halfplane_check(restricted([[0]]))
        assert rep.halfplane_margin == 0 and rep.halfplane_certified

    def test_upper(self):
        rep = spectrum_halfplane_check(restricted([[2j]]))
        assert rep.halfplane_margin == 2

    def test_lower_is_not_certified(self):
        rep = spectrum_halfplane_check(restricted([[-1e-6j]]))
        assert not rep.halfplane_certified

    def test_sorted_by_imaginary_part(self):
        rep = spectrum_halfplane_check(restricted(np.diag([1j, 3j, 2j])))
        assert [z.imag for z in rep.eigenvalues] == pytest.approx([3, 2, 1])


class TestSemigroup:
    def test_zero_generator(self):
        rep = semigroup_growth(restricted([[0]]))
        assert rep.growth_bound == pytest.approx(0, abs=1e-12)
        assert rep.type_zero

    def test_scalar_decay(self):
        # exp(i t (2i)) = exp(-2t)
        rep = semigroup_growth(restricted([[2j]]), t_max=5)
        assert rep.growth_bound == pytest.approx(-2, abs=1e-10)
        assert rep.type_zero

    def test_nilpotent_norms(self):
        # ||[[1, it], [0, 1]]|| = (t + sqrt(t^2 + 4)) / 2
        N = np.array([[0, 1], [0, 0]])
        ts, norms = semigroup_norms(1j * N, 10, 50)
        assert np.allclose(norms, (ts + np.sqrt(ts**2 + 4)) / 2, rtol=1e-12)

    def test_nilpotent_fit(self):
        ts = np.linspace(0, 20, 200)
        oracle = np.log((ts + np.sqrt(ts**2 + 4)) / 2)
        tail = ts >= 10
        expected = np.polyfit(ts[tail], oracle[tail], 1)[0]
        rep = semigroup_growth(restricted([[0, 1], [0, 0]]), t_max=20)
        assert rep.growth_bound == pytest.approx(expected, rel=1e-10)

    def test_fit_of_exact_exponential(self):
        ts = np.linspace(0, 3, 30)
        assert fit_growth_bound(ts, np.exp(-0.7 * ts)) == pytest.approx(-0.7, abs=1e-12)

    def test_fit_of_vanishing_norms(self):
        ts = np.linspace(0, 1, 10)
        assert fit_growth_bound(ts, np.where(ts > 0.5, 0.0, 1.0)) == -np.inf

    def test_validation(self):
        R = restricted([[1j]])
        with pytest.raises(PreconditionError):
            semigroup_growth(R, t_max=0)
        with pytest.raises(PreconditionError):
            semigroup_growth(R, grid_points=3)

    @pytest.mark.parametrize("seed", range(5))
    def test_uniform_decay(self, seed):
        delta = 0.3
        A = random_dissipative(3, 3, seed, defect=delta)
        res = solve(A)
        rep = semigroup_growth(restrict(A, res.K, res.mu))
        assert rep.growth_bound <= -delta / 2
        assert rep.decay_certified


class TestSector:
    def test_field_of_values_diagonal(self):
        pts = field_of_values(np.diag([1.0, 2j]))
        assert pts.real.max() == pytest.approx(1)
        assert pts.imag.max() == pytest.approx(2)

    def test_scalar(self):
        # i * i - 0.5 = -1.5
        assert sector_check(restricted([[1j]]), 0.5) == pytest.approx(1.5)

    def test_scalar_stronger(self):
        assert sector_check(restricted([[2j]]), 1.0) == pytest.approx(3)

    def test_hermitian_restriction(self):
        # numerical range of i H is on the imaginary axis
        H = np.array([[1.0, 2.0], [2.0, -3.0]])
        assert sector_check(restricted(H), 0.25) == pytest.approx(0.25, abs=1e-12)

    def test_eps_must_be_positive(self):
        with pytest.raises(PreconditionError):
            sector_check(restricted([[1j]]), 0)


class TestReport:
    def test_anchor(self, anchor):
        rep = spectral_report(restrict(anchor, [[-1j / 3]], 1j), t_max=5)
        assert rep.halfplane_margin == pytest.approx(2)
        assert rep.growth_bound == pytest.approx(-2, abs=1e-10)
        # Im(JA) = [[2, -i/2], [i/2, 1]] has smallest eigenvalue 1.5 - 1/sqrt(2)
        assert rep.decay_certified
        assert rep.sector_margin == pytest.approx(3)

    def test_merge_keeps_own_values(self):
        a = SpectralReport(growth_bound=1.0)
        b = SpectralReport(growth_bound=2.0, sector_margin=3.0)
        m = a.merge(b)
        assert m.growth_bound == 1.0 and m.sector_margin == 3.0


class TestEigenvectors:
    @pytest.mark.parametrize("seed", range(5))
    def test_type_identity(self, seed):
        assert eigen_type_residuals(random_dissipative(3, 4, seed)).max() < 1e-12

    def test_anchor_lower_eigenvector(self, anchor):
        # eigenvector (0, 1) against the graph of -i/3: distance^2 = 1 - (1/9)/(10/9)
        d = lower_eigenvector_graph_residuals(anchor, [[-1j / 3]])
        assert d == pytest.approx([3 / np.sqrt(10)])

    @pytest.mark.parametrize("seed", range(5))
    def test_lower_eigenvectors_avoid_graph(self, seed):
        A = random_dissipative(4, 4, seed, defect=0.2)
        d = lower_eigenvector_graph_residuals(A, spectral_angle_operator(A))
        assert len(d) == 4 and d.min() > 1e-6

    def test_selfadjoint_spectrum_inclusion(self):
        A = random_selfadjoint(3, 2, 4)
        R = restrict(A, spectral_angle_operator(A), 4j)
        assert spectrum_inclusion_distance(R) < 1e-8
