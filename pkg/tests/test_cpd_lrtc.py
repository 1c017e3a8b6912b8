"""CP-factor completion solver: subproblem oracles and end-to-end recovery."""

import numpy as np
import pytest

from meterfill.cpd_lrtc import (
    CompletionReport,
    FactorSet,
    SolverConfig,
    complete,
    init_factors,
    svt,
    update_auxiliary,
    update_completion,
    update_factors,
    update_multipliers,
)
from meterfill.data import SynthSpec, derive_seed, simulate_missing, synth_load_tensor
from meterfill.benchmark import rse
from meterfill.tensor_ops import cp_reconstruct, fro_norm, khatri_rao, project, unfold


def random_state(dims, rank, seed, with_duals=True):
    rng = np.random.default_rng(seed)
    state = init_factors(dims, rank, rng)
    if with_duals:
        state = FactorSet(
            U=state.U,
            M=tuple(rng.standard_normal(m.shape) for m in state.M),
            Y=tuple(rng.standard_normal(y.shape) for y in state.Y),
        )
    return state


def nuclear_norm(m):
    return np.linalg.svd(m, compute_uv=False).sum()


class TestSvt:
    def test_diagonal(self):
        out = svt(np.diag([5.0, 1.0]), 2.0)
        assert np.allclose(out, np.diag([3.0, 0.0]), atol=1e-12)

    def test_all_below_threshold_gives_zero(self, rng):
        m = 0.1 * rng.standard_normal((4, 3))
        assert np.array_equal(svt(m, 100.0), np.zeros((4, 3)))

    def test_matches_direct_svd_shrink(self, rng):
        m = rng.standard_normal((6, 4))
        u, s, vt = np.linalg.svd(m, full_matrices=False)
        oracle = u @ np.diag(np.maximum(s - 0.5, 0.0)) @ vt
        assert np.linalg.norm(svt(m, 0.5) - oracle) <= 1e-10

    def test_negative_threshold(self):
        with pytest.raises(ValueError):
            svt(np.eye(2), -1.0)


class TestConfigValidation:
    def test_alpha_must_sum_to_one(self):
        with pytest.raises(ValueError):
            SolverConfig(alpha=(0.5, 0.5, 0.5))

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"epsilon": 0.0},
            {"epsilon": 1.0},
            {"rank": 0},
            {"lam": 0.0},
            {"mu0": -1.0},
            {"rho": 0.9},
            {"max_iters": 0},
            {"dual_sign": 0.5},
        ],
    )
    def test_bad_fields(self, kwargs):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)

    def test_factor_set_rank_mismatch(self):
        with pytest.raises(ValueError):
            FactorSet(
                U=(np.ones((2, 2)), np.ones((3, 3)), np.ones((4, 2))),
                M=(np.ones((2, 2)), np.ones((3, 2)), np.ones((4, 2))),
                Y=(np.ones((2, 2)), np.ones((3, 2)), np.ones((4, 2))),
            )

    def test_report_history_length(self):
        with pytest.raises(ValueError):
            CompletionReport(
                completed=np.ones((1, 1, 1)),
                iterations=2,
                converged=True,
                residual_history=(0.1,),
                wall_time=0.0,
                svd_shapes=((1, 1),),
            )


class TestFactorUpdate:
    def test_large_penalty_limit(self, rng):
        # mu >> lam * ||B B^T|| makes the penalty term dominate the solve
        state = random_state((4, 3, 2), 1, seed=1)
        x = rng.standard_normal((4, 3, 2))
        mu = 1e8
        new = update_factors(state, x, lam=1.0, mu=mu)
        for n in range(3):
            expected = state.M[n] + state.Y[n] / mu
            assert np.allclose(new.U[n], expected, atol=1e-6)

    def test_normal_equation_residual(self, rng):
        state = random_state((6, 5, 4), 3, seed=2)
        x = rng.standard_normal((6, 5, 4))
        lam, mu = 1.0, 0.37
        new = update_factors(state, x, lam, mu)
        u_mixed = list(state.U)
        for n in range(3):
            others = [new.U[k] if k < n else u_mixed[k] for k in (2, 1, 0) if k != n]
            kr = khatri_rao(others[0], others[1])
            rhs = lam * (unfold(x, n + 1) @ kr) + mu * state.M[n] + state.Y[n]
            gram = lam * (kr.T @ kr) + mu * np.eye(kr.shape[1])
            resid = np.linalg.norm(rhs - new.U[n] @ gram)
            assert resid <= 1e-8 * np.linalg.norm(rhs)

    def test_gradient_vanishes_at_solution(self, rng):
        # First validate the analytic gradient of the quadratic objective by
        # central finite differences at a generic point, then assert it
        # vanishes at the returned update.
        dims, rank = (6, 5, 4), 3
        lam, mu = 1.0, 0.37

        def gradient(u_n, n, others_kr, xn, m_n, y_n):
            return lam * (u_n @ others_kr.T - xn) @ others_kr + mu * (u_n - m_n - y_n / mu)

        def objective(u_n, n, factors, x, m_n, y_n):
            fs = list(factors)
            fs[n] = u_n
            recon = cp_reconstruct(fs)
            return (
                0.5 * lam * fro_norm(x - recon) ** 2
                + 0.5 * mu * fro_norm(u_n - m_n - y_n / mu) ** 2
            )

        x = rng.standard_normal(dims)
        factors = [rng.standard_normal((d, rank)) for d in dims]
        n = 1
        m_n = rng.standard_normal((dims[n], rank))
        y_n = rng.standard_normal((dims[n], rank))
        others = [factors[k] for k in (2, 1, 0) if k != n]
        kr = khatri_rao(others[0], others[1])
        analytic = gradient(factors[n], n, kr, unfold(x, n + 1), m_n, y_n)
        h = 1e-6
        for i, r in [(0, 0), (2, 1), (4, 2), (1, 1)]:
            up, dn = factors[n].copy(), factors[n].copy()
            up[i, r] += h
            dn[i, r] -= h
            fd = (
                objective(up, n, factors, x, m_n, y_n)
                - objective(dn, n, factors, x, m_n, y_n)
            ) / (2 * h)
            assert fd == pytest.approx(analytic[i, r], rel=1e-4, abs=1e-6)

        state = random_state(dims, rank, seed=3)
        new = update_factors(state, x, lam, mu)
        for n in range(3):
            others = [new.U[k] if k < n else state.U[k] for k in (2, 1, 0) if k != n]
            kr = khatri_rao(others[0], others[1])
            grad = gradient(new.U[n], n, kr, unfold(x, n + 1), state.M[n], state.Y[n])
            assert np.linalg.norm(grad) < 1e-8 * (1 + np.linalg.norm(new.U[n]))

    def test_fixed_point_on_exact_cp_tensor(self, rng):
        rank = 3
        factors = tuple(rng.standard_normal((d, rank)) for d in (6, 5, 4))
        t = cp_reconstruct(factors)
        state = FactorSet(
            U=factors,
            M=tuple(f.copy() for f in factors),
            Y=tuple(np.zeros_like(f) for f in factors),
        )
        new = update_factors(state, t, lam=1.0, mu=0.5)
        for n in range(3):
            scale = np.linalg.norm(factors[n])
            assert np.linalg.norm(new.U[n] - factors[n]) <= 1e-9 * scale


class TestAuxiliaryUpdate:
    def test_zero_weight_is_identity_shift(self):
        state = random_state((4, 3, 2), 2, seed=4)
        mu = 0.7
        new = update_auxiliary(state, (0.0, 0.0, 1.0), mu)
        for n in range(2):
            expected = state.U[n] - state.Y[n] / mu
            assert np.allclose(new.M[n], expected, atol=1e-12)

    def test_small_singular_values_vanish(self, rng):
        u = tuple(1e-3 * rng.standard_normal((d, 2)) for d in (4, 3, 2))
        state = FactorSet(U=u, M=u, Y=tuple(np.zeros_like(f) for f in u))
        new = update_auxiliary(state, (1 / 3, 1 / 3, 1 / 3), mu=1e-4)
        for n in range(3):
            assert np.array_equal(new.M[n], np.zeros_like(u[n]))

    def test_matches_svt_composition(self):
        state = random_state((6, 5, 4), 3, seed=5)
        mu = 0.8
        alpha = (0.2, 0.5, 0.3)
        new = update_auxiliary(state, alpha, mu)
        for n in range(3):
            direct = svt(state.U[n] - state.Y[n] / mu, alpha[n] / mu)
            assert np.allclose(new.M[n], direct, atol=1e-12)

    def test_minimizes_shrinkage_objective(self, rng):
        state = random_state((6, 5, 4), 3, seed=6)
        mu = 0.8
        alpha = (0.2, 0.5, 0.3)
        new = update_auxiliary(state, alpha, mu)
        for n in range(3):
            target = state.U[n] - state.Y[n] / mu
            best = alpha[n] * nuclear_norm(new.M[n]) + 0.5 * mu * np.linalg.norm(
                new.M[n] - target
            ) ** 2
            for _ in range(20):
                pert = new.M[n] + 0.1 * rng.standard_normal(new.M[n].shape)
                val = alpha[n] * nuclear_norm(pert) + 0.5 * mu * np.linalg.norm(
                    pert - target
                ) ** 2
                assert val >= best - 1e-12


class TestCompletionUpdate:
    def test_full_mask_returns_truth(self, rng):
        state = random_state((4, 3, 2), 2, seed=7)
        t = rng.standard_normal((4, 3, 2))
        assert np.array_equal(
            update_completion(state, t, np.ones(t.shape, bool)), t
        )

    def test_empty_mask_returns_reconstruction(self):
        state = random_state((4, 3, 2), 2, seed=8)
        t = np.zeros((4, 3, 2))
        out = update_completion(state, t, np.zeros(t.shape, bool))
        assert np.array_equal(out, cp_reconstruct(state.U))

    def test_entrywise_selector(self, rng):
        state = random_state((4, 3, 2), 2, seed=9)
        t = rng.standard_normal((4, 3, 2))
        mask = rng.random(t.shape) < 0.5
        out = update_completion(state, t, mask)
        recon = cp_reconstruct(state.U)
        for idx in np.ndindex(t.shape):
            expected = t[idx] if mask[idx] else recon[idx]
            assert out[idx] == expected


class TestMultiplierUpdate:
    def test_fixed_point_when_aux_equals_factor(self):
        state = random_state((4, 3, 2), 2, seed=10, with_duals=False)
        new = update_multipliers(state, mu=3.0)
        for n in range(3):
            assert np.array_equal(new.Y[n], state.Y[n])

    def test_unit_gap_example(self):
        u = tuple(np.zeros((d, 1)) for d in (2, 2, 2))
        m = tuple(np.ones((d, 1)) for d in (2, 2, 2))
        state = FactorSet(U=u, M=m, Y=tuple(np.zeros((d, 1)) for d in (2, 2, 2)))
        new = update_multipliers(state, mu=2.0)
        for n in range(3):
            assert np.array_equal(new.Y[n], 2.0 * np.ones((2, 1)))

    def test_formula_oracle(self):
        state = random_state((5, 4, 3), 2, seed=11)
        mu = 0.6
        new = update_multipliers(state, mu)
        for n in range(3):
            assert np.allclose(
                new.Y[n], state.Y[n] + mu * (state.M[n] - state.U[n]), atol=1e-14
            )


class TestComplete:
    def test_fully_observed_exact(self, rng):
        t = rng.standard_normal((5, 6, 4))
        report = complete(t, np.ones(t.shape, bool), SolverConfig(rank=3))
        assert report.converged
        assert report.iterations <= 2
        assert np.array_equal(report.completed, t)

    def test_recovers_rank3_tensor(self):
        sr = synth_load_tensor(SynthSpec(dims=(20, 24, 15), rank=3), seed=43)
        masked = simulate_missing(sr.dataset, 0.3, derive_seed(3, "mask", "0.3"))
        report = complete(masked.tensor, masked.mask, SolverConfig(rank=5))
        assert report.converged
        assert rse(report.completed, sr.dataset.tensor, masked.mask) <= 1.0

    def test_error_grows_with_missing_rate(self):
        sr = synth_load_tensor(SynthSpec(dims=(20, 24, 15), rank=3), seed=43)
        scores = {}
        for rate in (0.3, 0.9):
            masked = simulate_missing(sr.dataset, rate, derive_seed(3, "mask", f"{rate}"))
            report = complete(masked.tensor, masked.mask, SolverConfig(rank=5))
            scores[rate] = rse(report.completed, sr.dataset.tensor, masked.mask)
        assert scores[0.9] > scores[0.3]

    @pytest.mark.parametrize("r,rate", [(1, 0.3), (1, 0.5), (3, 0.3), (3, 0.5), (5, 0.5)])
    def test_exact_recovery_property(self, r, rate):
        sr = synth_load_tensor(SynthSpec(dims=(20, 24, 15), rank=r), seed=40 + r)
        masked = simulate_missing(sr.dataset, rate, derive_seed(r, "mask", f"{rate}"))
        report = complete(masked.tensor, masked.mask, SolverConfig(rank=max(r, 5)))
        assert rse(report.completed, sr.dataset.tensor, masked.mask) <= 5.0

    def test_observed_entries_bitwise_exact(self, rng):
        t = rng.standard_normal((8, 7, 6))
        mask = rng.random(t.shape) < 0.6
        report = complete(t, mask, SolverConfig(rank=2, max_iters=7, epsilon=1e-9))
        assert np.array_equal(project(report.completed, mask), project(t, mask))

    def test_deterministic_reports(self):
        sr = synth_load_tensor(SynthSpec(dims=(10, 12, 8), rank=2), seed=3)
        masked = simulate_missing(sr.dataset, 0.4, 11)
        r1 = complete(masked.tensor, masked.mask, SolverConfig(rank=4, seed=5))
        r2 = complete(masked.tensor, masked.mask, SolverConfig(rank=4, seed=5))
        assert np.array_equal(r1.completed, r2.completed)
        assert r1.residual_history == r2.residual_history
        assert r1.iterations == r2.iterations

    def test_convergence_flag_semantics(self):
        sr = synth_load_tensor(SynthSpec(dims=(10, 12, 8), rank=2), seed=3)
        masked = simulate_missing(sr.dataset, 0.4, 11)
        cfg = SolverConfig(rank=4)
        report = complete(masked.tensor, masked.mask, cfg)
        assert report.converged
        assert report.residual_history[-1] <= cfg.epsilon
        assert all(r > cfg.epsilon for r in report.residual_history[:-1])

        capped = complete(masked.tensor, masked.mask, SolverConfig(rank=4, max_iters=3))
        assert not capped.converged
        assert capped.iterations == 3
        assert all(r > cfg.epsilon for r in capped.residual_history)

    def test_residual_history_length(self):
        sr = synth_load_tensor(SynthSpec(dims=(10, 12, 8), rank=2), seed=3)
        masked = simulate_missing(sr.dataset, 0.4, 11)
        report = complete(masked.tensor, masked.mask, SolverConfig(rank=4))
        assert len(report.residual_history) == report.iterations

    def test_default_rank_resolution(self, rng):
        t = rng.standard_normal((6, 30, 30))
        mask = rng.random(t.shape) < 0.8
        report = complete(t, mask, SolverConfig(max_iters=2, epsilon=1e-9))
        assert report.svd_shapes == ((6, 6), (30, 6), (30, 6))

    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError):
            complete(np.ones((2, 2, 2)), np.zeros((2, 2, 2), bool))

    def test_nan_input_rejected(self):
        t = np.ones((2, 2, 2))
        t[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            complete(t, np.ones(t.shape, bool))
