import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from krein_invariant.errors import ConvergenceError, DegenerateSelectionError, PreconditionError
from krein_invariant.generators import (
    random_block_operator,
    random_contraction,
    random_dissipative,
    random_selfadjoint,
)
from krein_invariant.krein import (
    AngleOperator,
    BlockOperator,
    Subspace,
    angle_gap,
    dissipativity_defect,
    graph_basis,
)
from krein_invariant.riccati import (
    GalerkinScheme,
    SolverOptions,
    default_galerkin_scheme,
    epsilon_regularize,
    galerkin_sequence,
    graph_invariance_residual,
    invariance_residual,
    pontryagin_residual,
    probe_errors,
    regularization_path,
    riccati_residual,
    solve,
    solve_fixed_point,
    spectral_angle_operator,
)
from krein_invariant.transfer import default_shift, transfer_data

from conftest import decoupled

seeds = st.integers(0, 2**32 - 1)


class TestResiduals:
    def test_zero_angle_without_coupling(self):
        A = BlockOperator.from_blocks([[1j, 2], [0, 1]], [[3], [4]], [[0, 0]], [[-1j]])
        K = AngleOperator.zero(A.structure)
        assert riccati_residual(A, transfer_data(A, 2j), K) == 0

    def test_anchor_solution(self, anchor):
        # Block form by hand: 1 + (-i)(-i/3) - (-i/3)(2i) - 0 = 1 - 1/3 - 2/3 = 0
        K = [[-1j / 3]]
        assert riccati_residual(anchor, transfer_data(anchor, 1j), K) < 1e-15
        assert pontryagin_residual(anchor, K) < 1e-15
        assert invariance_residual(anchor, Subspace(graph_basis(K))) < 1e-14

    def test_pontryagin_collapses_for_zero_angle(self):
        A = random_block_operator(3, 2, seed=4)
        expected = np.linalg.norm(A.A21, 2) / (1 + A.norm)
        assert pontryagin_residual(A, np.zeros((2, 3))) == pytest.approx(expected, rel=1e-14)

    def test_decoupled_zero(self):
        A = decoupled([[1, 2], [3, 4]], [[5j]])
        assert pontryagin_residual(A, np.zeros((1, 2))) == 0

    def test_invariance_of_eigenvector_span(self):
        A = random_block_operator(3, 3, seed=9)
        _, X = np.linalg.eig(A.matrix)
        assert invariance_residual(A, Subspace.from_span(X[:, :2])) < 1e-13

    def test_invariance_of_h_plus_sees_a21(self):
        A = random_block_operator(2, 2, seed=1)
        r = invariance_residual(A, Subspace(np.eye(4)[:, :2]))
        assert r == pytest.approx(np.linalg.norm(A.A21, 2), rel=1e-12)

    def test_random_non_solution_is_separated(self):
        A = random_block_operator(4, 3, seed=2)
        K = random_contraction(3, 4, seed=2)
        assert riccati_residual(A, transfer_data(A, 3j), K) > 1e-3

    @settings(max_examples=100, deadline=None)
    @given(seeds, st.integers(1, 8), st.integers(1, 8))
    def test_two_forms_agree(self, seed, p, m):
        A = random_dissipative(p, m, seed)
        K = random_contraction(m, p, seed)
        mu = complex(0, np.random.default_rng(seed).uniform(0.5, 20))
        r = riccati_residual(A, transfer_data(A, mu), K)
        q = pontryagin_residual(A, K)
        assert abs(r - q) <= 1e-12 * (1 + q)


class TestFixedPoint:
    def test_zero_coupling_is_immediate(self):
        A = BlockOperator.from_blocks([[1j, 1], [0, 2j]], [[1], [1]], [[0, 0]], [[-1j]])
        res = solve_fixed_point(A, 4j)
        assert res.iterations == 0
        assert np.all(res.K.K == 0)

    def test_anchor_at_2i(self, anchor):
        # S - mu = 2i - 2i = 0, so K = -F = -(1/(-3i)) = -i/3 after one step
        res = solve_fixed_point(anchor, 2j)
        assert res.iterations == 1
        assert abs(res.K.K[0, 0] + 1j / 3) < 1e-10

    def test_random_12x12(self):
        A = random_dissipative(6, 6, seed=3, defect=0.5)
        mu = default_shift(A)
        res = solve_fixed_point(A, mu)
        assert res.riccati_residual < 1e-10
        assert res.K.norm <= 1 + 1e-10
        assert res.invariance_residual < 1e-9
        assert angle_gap(res.K, spectral_angle_operator(A)) < 1e-8

    def test_large_g_is_rejected(self):
        # Im(JA) = diag(0, 1) and |G| = |10 / (-2i)| = 5 at mu = i
        A = BlockOperator.from_blocks([[0]], [[10]], [[-10]], [[-1j]])
        with pytest.raises(PreconditionError, match="increase"):
            solve_fixed_point(A, 1j)

    def test_not_dissipative(self):
        A = BlockOperator.from_blocks([[1j]], [[0]], [[0]], [[1j]])
        with pytest.raises(PreconditionError, match="not dissipative"):
            solve_fixed_point(A, 4j)

    def test_non_convergence_carries_residual(self):
        A = random_dissipative(5, 5, seed=1, q_rank=1)
        with pytest.raises(ConvergenceError) as info:
            solve_fixed_point(A, default_shift(A), SolverOptions(max_iterations=3))
        assert info.value.residual > 0 and info.value.iterations <= 3

    def test_relaxation(self, anchor):
        res = solve_fixed_point(anchor, 2j, SolverOptions(relaxation=0.5))
        assert abs(res.K.K[0, 0] + 1j / 3) < 1e-9

    def test_options_validation(self):
        with pytest.raises(PreconditionError):
            SolverOptions(relaxation=0)
        with pytest.raises(PreconditionError):
            SolverOptions(epsilon_schedule=(1e-2, 1e-1, 0))
        with pytest.raises(PreconditionError):
            SolverOptions(epsilon_schedule=(1e-2,))


class TestSpectralOracle:
    def test_decoupled(self):
        A = decoupled([[1j]], [[-1j]])
        assert spectral_angle_operator(A).K[0, 0] == 0

    def test_anchor(self, anchor):
        K = spectral_angle_operator(anchor)
        assert abs(K.K[0, 0] + 1j / 3) < 1e-14
        assert np.linalg.eigvals(anchor.A11 + anchor.A12 @ K.K)[0] == pytest.approx(2j)

    @pytest.mark.parametrize("seed", range(10))
    def test_selfadjoint_pontryagin(self, seed):
        A = random_selfadjoint(3, 5, seed)
        K = spectral_angle_operator(A)
        assert K.norm <= 1 + 1e-8
        assert pontryagin_residual(A, K) < 1e-10
        assert np.linalg.eigvals(A.A11 + A.A12 @ K.K).imag.min() >= -1e-8

    def test_real_tie_needs_regularization(self):
        # J-selfadjoint with all eigenvalues real: the selection is resolved by i eps P+
        A = BlockOperator.from_blocks([[2.0]], [[0.5]], [[-0.5]], [[-1.0]])
        assert np.allclose(np.linalg.eigvals(A.matrix).imag, 0)
        K = spectral_angle_operator(A)
        assert pontryagin_residual(A, K) < 1e-12
        assert K.norm < 1

    def test_degenerate(self):
        # J-selfadjoint nilpotent with a neutral eigenvector: K = -1 is a double root
        A = BlockOperator.from_blocks([[1]], [[1]], [[-1]], [[-1]])
        assert dissipativity_defect(A) == 0
        with pytest.raises(DegenerateSelectionError):
            spectral_angle_operator(A)

    def test_regularization_path_converges(self):
        A = random_dissipative(4, 4, seed=7, defect=0.5)
        path = regularization_path(A)
        assert len(path) == 4
        assert angle_gap(path[-2], path[-1]) < 1e-6
        gaps = [angle_gap(a, b) for a, b in zip(path, path[1:])]
        assert gaps[-1] < gaps[0]


class TestEpsilonRegularize:
    def test_zero_eps_identity(self, anchor):
        assert epsilon_regularize(anchor, 0) is anchor

    def test_zero_operator(self):
        A = BlockOperator.from_blocks([[0]], [[0]], [[0]], [[0]])
        assert np.array_equal(epsilon_regularize(A, 1).matrix, [[1j, 0], [0, 0]])

    def test_anchor(self, anchor):
        Ae = epsilon_regularize(anchor, 0.5)
        assert Ae.A11[0, 0] == 2.5j
        assert np.array_equal(Ae.A12, anchor.A12)
        assert np.array_equal(Ae.A21, anchor.A21)
        assert np.array_equal(Ae.A22, anchor.A22)

    def test_negative(self, anchor):
        with pytest.raises(PreconditionError):
            epsilon_regularize(anchor, -1)


class TestGalerkin:
    def test_decoupled_all_zero(self):
        A = decoupled(np.diag([1j, 2j, 3j, 4j]), np.diag([-1j, -2j]))
        scheme = default_galerkin_scheme(A, 2j, ranks=(1, 2, 4))
        assert all(np.all(K.K == 0) for K in galerkin_sequence(A, scheme, 2j))

    def test_single_step_matches_fixed_point(self):
        A = random_dissipative(4, 4, seed=3, defect=0.5)
        mu = default_shift(A)
        scheme = GalerkinScheme(np.eye(4), (4,))
        seq = galerkin_sequence(A, scheme, mu)
        assert len(seq) == 1
        assert np.allclose(seq[0].K, solve_fixed_point(A, mu).K.K, atol=1e-14)

    def test_random_16x16(self):
        A = random_dissipative(8, 8, seed=12, defect=0.5)
        mu = default_shift(A)
        seq = galerkin_sequence(A, default_galerkin_scheme(A, mu, ranks=(2, 4, 8)), mu)
        probes = np.random.default_rng(0).standard_normal((8, 6))
        err = probe_errors(seq, probes)
        assert np.all(err[-1] == 0)
        assert np.mean(np.all(np.diff(err, axis=0) <= 1e-12, axis=0)) >= 0.5
        assert angle_gap(seq[-1], spectral_angle_operator(A)) < 1e-8

    def test_scheme_validation(self):
        with pytest.raises(PreconditionError):
            GalerkinScheme(np.eye(3), (1, 2))
        with pytest.raises(PreconditionError):
            GalerkinScheme(np.eye(3), (2, 1, 3))

    def test_scheme_from_projections(self):
        V = np.linalg.qr(np.random.default_rng(1).standard_normal((4, 4)))[0]
        Ps = [V[:, :r] @ V[:, :r].T for r in (1, 3, 4)]
        scheme = GalerkinScheme.from_projections(Ps)
        assert scheme.ranks == (1, 3, 4)
        for P, Q in zip(Ps, scheme.projections):
            assert np.allclose(P, Q, atol=1e-12)
            assert np.allclose(Q, Q.conj().T, atol=1e-12) and np.allclose(Q @ Q, Q, atol=1e-12)

    def test_default_scheme_doubling(self):
        A = random_dissipative(5, 2, seed=0)
        assert default_galerkin_scheme(A, 4j).ranks == (1, 2, 4, 5)
        assert default_galerkin_scheme(A, 4j, steps=2).ranks == (4, 5)


class TestPipeline:
    def test_fallback_to_oracle(self):
        A = random_dissipative(5, 5, seed=1, q_rank=1)
        res = solve(A, opts=SolverOptions(max_iterations=3))
        assert res.fallback and res.method == "spectral"
        assert graph_invariance_residual(A, res.K) < 1e-8

    @pytest.mark.parametrize("method", ["fixed_point", "spectral", "galerkin"])
    def test_methods_agree(self, method):
        A = random_dissipative(6, 4, seed=21, defect=0.3)
        res = solve(A, method=method)
        assert res.oracle_gap < 1e-8
        assert res.invariance_residual < 1e-8

    def test_unknown_method(self, anchor):
        with pytest.raises(PreconditionError):
            solve(anchor, method="newton")
