"""Solver behavior: configs, stop rule, closed forms, recovery, cube runs."""

import numpy as np
import pytest

from hypercs import (
    Dictionary,
    GREEDY_SOLVERS,
    NumericalFailure,
    SOLVERS,
    SolverConfig,
    admm,
    biht,
    cosamp,
    fista,
    gomp,
    lasso_objective,
    recover_cube,
    stop_check,
)
from hypercs.solvers import SolverState, StopDecision, derive_pixel_seed

from helpers import partial_fourier, planted_instance

NO_LIMITS = dict(time_limit=None, max_iter=2000)


class TestSolverConfig:
    def test_defaults(self):
        cfg = SolverConfig()
        assert cfg.lam == 0.1
        assert cfg.kappa == 1
        assert cfg.atoms_per_iter == 1
        assert cfg.mu == 0.1
        assert cfg.alpha == 1.8
        assert cfg.epsilon == 1e-8
        assert cfg.time_limit == 2.0
        assert cfg.max_iter is None
        assert cfg.seed == 0

    def test_atoms_per_iter_defaults_to_a_fifth_of_kappa(self):
        assert SolverConfig(kappa=18).atoms_per_iter == 3
        assert SolverConfig(kappa=24).atoms_per_iter == 4
        assert SolverConfig(kappa=4).atoms_per_iter == 1

    def test_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(lam=-1.0)
        with pytest.raises(ValueError):
            SolverConfig(kappa=0)
        with pytest.raises(ValueError):
            SolverConfig(kappa=3, atoms_per_iter=4)
        with pytest.raises(ValueError):
            SolverConfig(mu=0.0)
        with pytest.raises(ValueError):
            SolverConfig(alpha=-0.5)
        with pytest.raises(ValueError):
            SolverConfig(epsilon=0.0)
        with pytest.raises(ValueError):
            SolverConfig(time_limit=0.0)
        with pytest.raises(ValueError):
            SolverConfig(max_iter=0)


class TestStopRule:
    def test_convergence_beats_timeout_and_iteration_cap(self):
        cfg = SolverConfig(epsilon=1e-2, time_limit=1.0, max_iter=5)
        state = SolverState(residual=np.zeros(2), delta=1e-3, iterations=99)
        assert stop_check(state, cfg, elapsed=50.0) is StopDecision.CONVERGED

    def test_timeout_beats_iteration_cap(self):
        cfg = SolverConfig(epsilon=1e-8, time_limit=1.0, max_iter=5)
        state = SolverState(residual=np.zeros(2), delta=1.0, iterations=99)
        assert stop_check(state, cfg, elapsed=1.0) is StopDecision.TIMEOUT

    def test_iteration_cap(self):
        cfg = SolverConfig(epsilon=1e-8, time_limit=None, max_iter=5)
        state = SolverState(residual=np.zeros(2), delta=1.0, iterations=5)
        assert stop_check(state, cfg, elapsed=0.0) is StopDecision.ITER_CAP

    def test_continue_otherwise(self):
        cfg = SolverConfig(epsilon=1e-8, time_limit=None, max_iter=None)
        state = SolverState(residual=np.zeros(2), delta=1.0, iterations=10**6)
        assert stop_check(state, cfg, elapsed=1e9) is StopDecision.CONTINUE

    def test_convergence_is_strict(self):
        cfg = SolverConfig(epsilon=1e-8, time_limit=None)
        state = SolverState(residual=np.zeros(2), delta=1e-8)
        assert stop_check(state, cfg, elapsed=0.0) is StopDecision.CONTINUE


class TestLassoObjective:
    def test_hand_value(self):
        # H = 0.5*||x - y||^2 + lam*||x||_1 with A = I
        d = Dictionary.from_matrix(np.eye(2))
        h = lasso_objective(np.array([1.0, -2.0]), np.zeros(2), d, 0.5)
        assert h == pytest.approx(0.5 * 5.0 + 0.5 * 3.0)

    def test_accepts_a_bare_matrix(self):
        h = lasso_objective(np.array([1.0]), np.array([2.0]), np.eye(1), 0.0)
        assert h == pytest.approx(0.5)


class TestConvexSolvers:
    def test_identity_dictionary_closed_form(self):
        # with A = I the lasso minimizer is the soft threshold of y
        d = Dictionary.from_matrix(np.eye(3))
        y = np.array([2.0, 0.1, -3.0])
        expected = np.array([1.5, 0.0, -2.5])
        for solver in (fista, admm):
            result = solver(y, d, SolverConfig(lam=0.5, **NO_LIMITS))
            assert result.converged
            np.testing.assert_allclose(result.x.real, expected, atol=1e-6)
            np.testing.assert_allclose(result.x.imag, 0.0, atol=1e-8)

    def test_fista_and_admm_reach_the_same_objective(self):
        for seed in range(3):
            d, _, y = planted_instance(24, 10, 4, seed, coeffs="mag")
            cfg = SolverConfig(lam=0.1, time_limit=None, max_iter=200000)
            h_f = lasso_objective(fista(y, d, cfg).x, y, d, cfg.lam)
            h_a = lasso_objective(admm(y, d, cfg).x, y, d, cfg.lam)
            assert abs(h_f - h_a) <= 1e-6 * max(1.0, abs(h_f))

    def test_fista_objective_never_beats_the_zero_vector_by_accident(self):
        d, _, y = planted_instance(16, 7, 3, 0)
        cfg = SolverConfig(lam=0.1, **NO_LIMITS)
        result = fista(y, d, cfg)
        assert lasso_objective(result.x, y, d, cfg.lam) <= lasso_objective(
            np.zeros(16), y, d, cfg.lam
        )

    def test_admm_reports_the_primal_gap(self):
        d, _, y = planted_instance(16, 7, 3, 1)
        result = admm(y, d, SolverConfig(lam=0.1, **NO_LIMITS))
        assert result.admm_gap is not None and result.admm_gap >= 0.0
        assert fista(y, d, SolverConfig(lam=0.1, **NO_LIMITS)).admm_gap is None

    def test_zero_measurements_short_circuit(self):
        d = partial_fourier(8, 3, 0)
        for solver in (fista, admm):
            result = solver(np.zeros(3), d, SolverConfig())
            assert result.converged and result.iterations == 0
            assert result.final_delta == 0.0
            np.testing.assert_array_equal(result.x, np.zeros(8))


class TestGreedySolvers:
    @pytest.mark.parametrize("solver", [gomp, biht, cosamp])
    def test_single_atom_recovered_exactly(self, solver):
        d = partial_fourier(16, 7, 0)
        x0 = np.zeros(16, dtype=complex)
        x0[5] = 2.5
        y = d.matrix @ x0
        cfg = SolverConfig(kappa=1, atoms_per_iter=1, **NO_LIMITS)
        result = solver(y, d, cfg)
        assert result.converged
        # the first pass lands on the answer; one more confirms the zero delta
        assert result.iterations <= 2
        np.testing.assert_allclose(result.x, x0, atol=1e-10)

    @pytest.mark.parametrize("solver", [gomp, biht, cosamp])
    def test_zero_measurements_short_circuit(self, solver):
        d = partial_fourier(16, 7, 0)
        result = solver(np.zeros(7), d, SolverConfig(kappa=2))
        assert result.converged and result.iterations == 0

    @pytest.mark.parametrize("name", GREEDY_SOLVERS)
    def test_output_never_exceeds_kappa_nonzeros(self, name):
        rng = np.random.default_rng(11)
        d = partial_fourier(32, 13, 2)
        for kappa in (1, 3, 5):
            cfg = SolverConfig(kappa=kappa, atoms_per_iter=1, time_limit=None, max_iter=60)
            y = rng.standard_normal(13) + 1j * rng.standard_normal(13)
            result = SOLVERS[name](y, d, cfg)
            assert np.count_nonzero(result.x) <= kappa

    def test_gomp_adds_several_atoms_per_iteration(self):
        d, x0, y = planted_instance(32, 16, 6, 1, coeffs="mag")
        result = gomp(y, d, SolverConfig(kappa=6, atoms_per_iter=3, **NO_LIMITS))
        assert result.converged
        np.testing.assert_allclose(result.x, x0, atol=1e-8)

    def test_gomp_stops_when_the_support_outgrows_the_measurements(self):
        # noise measurements never drive the residual delta to zero, so the
        # accumulated support hits the m ceiling and the last iterate is kept
        rng = np.random.default_rng(12)
        d = partial_fourier(16, 6, 3)
        y = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        result = gomp(y, d, SolverConfig(kappa=6, atoms_per_iter=6, time_limit=None, max_iter=500))
        assert not result.converged
        assert np.count_nonzero(result.x) <= 6

    def test_precondition_validation(self):
        d = partial_fourier(16, 6, 0)
        y = np.ones(6, dtype=complex)
        with pytest.raises(ValueError):
            gomp(y, d, SolverConfig(kappa=7, time_limit=None))  # kappa > m
        with pytest.raises(ValueError):
            biht(y, d, SolverConfig(kappa=7, time_limit=None))
        with pytest.raises(ValueError):
            cosamp(y, d, SolverConfig(kappa=7, time_limit=None))
        with pytest.raises(ValueError):
            cosamp(y, d, SolverConfig(kappa=9, time_limit=None))  # 2*kappa > n


class TestStopIntegration:
    def test_iteration_cap_limits_the_work(self):
        d, _, y = planted_instance(32, 13, 4, 5)
        result = fista(y, d, SolverConfig(lam=1e-4, time_limit=None, max_iter=1))
        assert result.iterations == 1 and not result.converged

    def test_expired_budget_stops_before_the_first_iteration(self):
        d, _, y = planted_instance(32, 13, 4, 6)
        result = fista(y, d, SolverConfig(lam=0.1, time_limit=1e-12))
        assert result.iterations == 0 and not result.converged

    def test_measurement_length_validated(self):
        d = partial_fourier(8, 3, 0)
        with pytest.raises(ValueError):
            fista(np.ones(4), d, SolverConfig())


class TestNumericalFailure:
    def test_non_finite_measurements_raise_with_the_iteration(self):
        d = partial_fourier(8, 3, 0)
        y = np.array([np.nan, 1.0, 1.0], dtype=complex)
        with pytest.raises(NumericalFailure) as info:
            fista(y, d, SolverConfig(lam=0.1, time_limit=None))
        assert info.value.iteration == 1


class TestPixelSeeds:
    def test_deterministic_and_distinct(self):
        assert derive_pixel_seed(3, 7) == derive_pixel_seed(3, 7)
        seeds = {derive_pixel_seed(0, i) for i in range(100)}
        assert len(seeds) == 100
        assert all(0 <= s < 2**63 for s in seeds)


class TestRecoverCube:
    @pytest.fixture
    def measured(self):
        rng = np.random.default_rng(8)
        d = partial_fourier(16, 7, 1)
        x_true = np.zeros((2, 3, 16), dtype=complex)
        for ix in range(2):
            for iy in range(3):
                support = rng.choice(16, size=2, replace=False)
                x_true[ix, iy, support] = rng.uniform(1.0, 2.0, size=2)
        meas = np.einsum("mk,xyk->xym", d.matrix, x_true)
        return d, x_true, meas

    def test_recovers_every_pixel(self, measured):
        d, x_true, meas = measured
        cfg = SolverConfig(kappa=2, atoms_per_iter=1, time_limit=None, max_iter=50)
        cube, stats = recover_cube(meas, d, cfg, "gomp")
        assert cube.shape == (2, 3, 16)
        np.testing.assert_allclose(cube, x_true, atol=1e-8)
        assert stats.n_pixels == 6
        assert stats.n_converged == 6
        assert stats.n_failed == 0
        assert stats.convergence_pct == 100.0
        assert stats.total_iterations == sum(r.iterations for r in stats.results)

    def test_serial_runs_are_reproducible(self, measured):
        d, _, meas = measured
        cfg = SolverConfig(kappa=2, atoms_per_iter=1, time_limit=None, max_iter=50)
        cube1, _ = recover_cube(meas, d, cfg, "cosamp")
        cube2, _ = recover_cube(meas, d, cfg, "cosamp")
        np.testing.assert_array_equal(cube1, cube2)

    def test_worker_pool_matches_the_serial_run(self, measured):
        d, _, meas = measured
        cfg = SolverConfig(kappa=2, atoms_per_iter=1, time_limit=None, max_iter=50)
        serial, stats1 = recover_cube(meas, d, cfg, "gomp", jobs=1)
        pooled, stats2 = recover_cube(meas, d, cfg, "gomp", jobs=2)
        np.testing.assert_array_equal(serial, pooled)
        assert stats1.total_iterations == stats2.total_iterations
        assert stats1.n_converged == stats2.n_converged

    def test_admm_cube_run_uses_the_cached_factorization(self, measured):
        d, _, meas = measured
        cfg = SolverConfig(lam=0.05, alpha=1.8, time_limit=None, max_iter=5000)
        cube, stats = recover_cube(meas, d, cfg, "admm", jobs=2)
        assert stats.n_converged == 6
        assert 1.8 in d._admm_factors

    def test_failed_pixels_are_flagged_not_fatal(self, measured):
        d, _, meas = measured
        meas = meas.copy()
        meas[0, 1, 0] = np.nan
        cfg = SolverConfig(lam=0.1, time_limit=None, max_iter=400)
        cube, stats = recover_cube(meas, d, cfg, "fista")
        assert stats.n_failed == 1
        assert stats.failed_pixels == [(0, 1, 1)]
        assert stats.results[1] is None
        np.testing.assert_array_equal(cube[0, 1], np.zeros(16))
        assert stats.n_converged == 5

    def test_zero_pixels_counted_separately(self):
        d = partial_fourier(8, 3, 0)
        meas = np.zeros((1, 2, 3), dtype=complex)
        cube, stats = recover_cube(meas, d, SolverConfig(kappa=1), "gomp")
        assert stats.n_zero_pixels == 2
        assert stats.n_converged == 2
        assert stats.total_iterations == 0
        np.testing.assert_array_equal(cube, np.zeros((1, 2, 8)))

    def test_input_validation(self, measured):
        d, _, meas = measured
        with pytest.raises(ValueError):
            recover_cube(meas, d, SolverConfig(), "nope")
        with pytest.raises(ValueError):
            recover_cube(meas[:, :, :5], d, SolverConfig(), "fista")
        with pytest.raises(ValueError):
            recover_cube(meas[0], d, SolverConfig(), "fista")
