import numpy as np
import pytest

from focalstack.optimize import (
    BASELINE_METHODS,
    DenoiseProblem,
    PADMMConfig,
    baseline_solve,
    padmm_solve,
)
from focalstack.synth import make_noisy_depth, make_salt_pepper
from oracles import cp_tvl1_reference

ALL = list(BASELINE_METHODS)


class TestBasics:
    def test_unknown_method_rejected(self):
        problem = DenoiseProblem(observed=np.zeros((8, 8)), lam=0.7)
        with pytest.raises(ValueError, match="unknown method"):
            baseline_solve(problem, "gradient_descent")

    @pytest.mark.parametrize("method", ALL)
    def test_constant_image_zero_residual_at_start(self, method):
        obs = np.full((10, 10), 0.3)
        problem = DenoiseProblem(observed=obs, lam=0.7)
        depth, trace = baseline_solve(problem, method, PADMMConfig(max_iters=20))
        assert trace.records[0].residual_norm == 0.0
        assert np.allclose(depth.values, obs)

    @pytest.mark.parametrize("method", ALL)
    def test_trace_shape(self, method):
        _, noisy = make_noisy_depth(0, size=24)
        problem = DenoiseProblem(observed=noisy, lam=0.7)
        _, trace = baseline_solve(problem, method, PADMMConfig(max_iters=40, tol=0.0))
        assert len(trace) <= 40
        assert trace.records[0].k == 0
        assert trace.method == method

    @pytest.mark.parametrize("method", ALL)
    def test_deterministic(self, method):
        _, noisy = make_noisy_depth(1, size=24)
        problem = DenoiseProblem(observed=noisy, lam=0.7)
        _, t1 = baseline_solve(problem, method, PADMMConfig(max_iters=30, tol=0.0))
        _, t2 = baseline_solve(problem, method, PADMMConfig(max_iters=30, tol=0.0))
        assert np.array_equal(t1.energies, t2.energies)
        assert np.array_equal(t1.residuals, t2.residuals)


class TestAgreement:
    def test_fista_matches_reference_at_default_budget(self):
        sp = make_salt_pepper(size=16, seed=7)
        problem = DenoiseProblem(observed=sp, lam=0.7)
        depth, _ = baseline_solve(problem, "fista", PADMMConfig(max_iters=300, tol=0.0))
        ref = cp_tvl1_reference(sp, 0.7, iters=10000)
        assert np.sqrt(np.mean((depth.values - ref) ** 2)) <= 1e-3

    @pytest.mark.parametrize("method", ALL)
    def test_all_methods_reach_reference(self, method):
        # The agreement criterion is about limit points; the O(1/k) methods
        # get a larger budget to reach theirs.
        sp = make_salt_pepper(size=16, seed=7)
        problem = DenoiseProblem(observed=sp, lam=0.7)
        depth, _ = baseline_solve(problem, method, PADMMConfig(max_iters=1000, tol=0.0))
        ref = cp_tvl1_reference(sp, 0.7, iters=10000)
        assert np.sqrt(np.mean((depth.values - ref) ** 2)) <= 1e-3

    @pytest.mark.parametrize("method", ALL)
    def test_residuals_decrease(self, method):
        _, noisy = make_noisy_depth(2, size=32)
        problem = DenoiseProblem(observed=noisy, lam=0.7)
        _, trace = baseline_solve(problem, method, PADMMConfig(max_iters=200, tol=0.0))
        res = trace.residuals
        assert res[-1] < 0.1 * res[1:].max()


class TestOrdering:
    def test_padmm_beats_every_baseline_median(self):
        finals = {m: [] for m in ["padmm"] + ALL}
        cfg = PADMMConfig(max_iters=300, tol=0.0)
        for seed in range(10):
            _, noisy = make_noisy_depth(seed, size=64)
            problem = DenoiseProblem(observed=noisy, lam=0.7)
            _, tr = padmm_solve(problem, cfg)
            finals["padmm"].append(tr.final_residual)
            for m in ALL:
                _, trb = baseline_solve(problem, m, cfg)
                finals[m].append(trb.final_residual)
        med_padmm = np.median(finals["padmm"])
        for m in ALL:
            assert med_padmm <= np.median(finals[m]), (
                f"padmm {med_padmm:.3e} vs {m} {np.median(finals[m]):.3e}"
            )
