import numpy as np
import pytest

from focalstack.optimize import (
    DenoiseProblem,
    IsotropicTV,
    L1Fidelity,
    L2Fidelity,
    SolverTrace,
    TVDualBall,
    TraceRecord,
    energy,
    prox,
    trace_metrics,
)


class TestEnergy:
    def test_zero_at_matching_constant(self):
        obs = np.full((5, 5), 0.4)
        problem = DenoiseProblem(observed=obs, lam=0.7)
        assert energy(problem, obs) == 0.0

    def test_hand_evaluated_two_by_two(self):
        obs = np.array([[0.0, 1.0], [0.0, 1.0]])
        problem = DenoiseProblem(observed=obs, lam=0.7)
        # dx contributes 1 per row, dy contributes 0: TV = 2, fidelity = 0.
        assert np.isclose(energy(problem, obs), 2.0)

    def test_fidelity_independent_of_lambda_at_observation(self):
        rng = np.random.default_rng(0)
        obs = rng.random((6, 6))
        e1 = energy(DenoiseProblem(observed=obs, lam=0.7), obs)
        e2 = energy(DenoiseProblem(observed=obs, lam=5.0), obs)
        assert np.isclose(e1, e2)

    def test_l1_vs_l2_fidelity(self):
        obs = np.zeros((3, 3))
        t = np.full((3, 3), 0.5)
        e_l1 = energy(DenoiseProblem(observed=obs, lam=2.0, fidelity="l1"), t)
        e_l2 = energy(DenoiseProblem(observed=obs, lam=2.0, fidelity="l2"), t)
        assert np.isclose(e_l1, 2.0 * 9 * 0.5)
        assert np.isclose(e_l2, 0.5 * 2.0 * 9 * 0.25)

    def test_validation(self):
        with pytest.raises(ValueError, match="lambda"):
            DenoiseProblem(observed=np.zeros((3, 3)), lam=0.0)
        with pytest.raises(ValueError, match="fidelity"):
            DenoiseProblem(observed=np.zeros((3, 3)), fidelity="huber")
        with pytest.raises(ValueError, match="finite"):
            DenoiseProblem(observed=np.full((2, 2), np.inf))


class TestProx:
    def test_l1_soft_threshold_outside(self):
        term = L1Fidelity(lam=1.0, reference=np.zeros((1, 1)))
        out = prox(term, 1.0, np.array([[3.0]]))
        assert np.isclose(out[0, 0], 2.0)

    def test_l1_soft_threshold_inside(self):
        term = L1Fidelity(lam=1.0, reference=np.zeros((1, 1)))
        out = prox(term, 1.0, np.array([[0.5]]))
        assert out[0, 0] == 0.0

    def test_l1_thresholds_toward_reference(self):
        ref = np.full((2, 2), 5.0)
        term = L1Fidelity(lam=0.5, reference=ref)
        out = prox(term, 2.0, np.full((2, 2), 5.4))
        assert np.allclose(out, 5.0)  # 0.4 < alpha*lam = 1.0

    def test_ball_projection(self):
        term = TVDualBall()
        q = np.zeros((2, 1, 1))
        q[0, 0, 0] = 3.0
        q[1, 0, 0] = 4.0
        out = prox(term, 1.0, q)
        assert np.isclose(out[0, 0, 0], 0.6)
        assert np.isclose(out[1, 0, 0], 0.8)

    def test_ball_projection_identity_inside(self):
        term = TVDualBall()
        q = np.full((2, 3, 3), 0.3)
        assert np.allclose(prox(term, 1.0, q), q)

    def test_isotropic_tv_group_shrink(self):
        term = IsotropicTV()
        q = np.zeros((2, 1, 1))
        q[0, 0, 0] = 3.0
        q[1, 0, 0] = 4.0
        out = prox(term, 1.0, q)  # magnitude 5 shrinks to 4
        assert np.isclose(out[0, 0, 0], 2.4)
        assert np.isclose(out[1, 0, 0], 3.2)
        small = np.full((2, 2, 2), 0.1)
        assert np.allclose(prox(term, 1.0, small), 0.0)

    def test_l2_prox(self):
        ref = np.full((2, 2), 1.0)
        term = L2Fidelity(lam=2.0, reference=ref)
        out = prox(term, 0.5, np.full((2, 2), 3.0))
        assert np.allclose(out, (3.0 + 1.0) / 2.0)

    def test_unknown_term(self):
        with pytest.raises(ValueError, match="unknown term spec"):
            prox(object(), 1.0, np.zeros((2, 2)))

    def test_bad_alpha(self):
        with pytest.raises(ValueError, match="alpha"):
            prox(IsotropicTV(), 0.0, np.zeros((2, 1, 1)))

    @pytest.mark.parametrize(
        "make_term,shape",
        [
            (lambda ref: L1Fidelity(lam=0.7, reference=ref), (6, 6)),
            (lambda ref: L2Fidelity(lam=0.7, reference=ref), (6, 6)),
            (lambda ref: IsotropicTV(), (2, 6, 6)),
            (lambda ref: TVDualBall(), (2, 6, 6)),
        ],
    )
    def test_nonexpansive(self, make_term, shape):
        rng = np.random.default_rng(1)
        ref = rng.standard_normal((6, 6))
        term = make_term(ref)
        for _ in range(250):
            a = 3.0 * rng.standard_normal(shape)
            b = 3.0 * rng.standard_normal(shape)
            alpha = float(rng.uniform(0.05, 2.0))
            pa = prox(term, alpha, a)
            pb = prox(term, alpha, b)
            assert np.sqrt(((pa - pb) ** 2).sum()) <= np.sqrt(((a - b) ** 2).sum()) + 1e-12


class TestTrace:
    def make_trace(self, energies, residuals=None):
        tr = SolverTrace(method="test")
        residuals = residuals or [0.0] * len(energies)
        prev = None
        for k, (e, r) in enumerate(zip(energies, residuals)):
            decay = None if k == 0 else abs(e - prev) / max(energies[0], 1e-12)
            tr.append(TraceRecord(k, e, r, decay, float(k)))
            prev = e
        return tr

    def test_constant_energy_zero_decay(self):
        tr = self.make_trace([5.0, 5.0, 5.0])
        m = trace_metrics(tr)
        assert np.allclose(m["energy_decay"], 0.0)

    def test_geometric_energy_decay(self):
        e0 = 8.0
        energies = [e0 * 2.0**-k for k in range(6)]
        tr = self.make_trace(energies)
        m = trace_metrics(tr)
        expected = [2.0**-k for k in range(1, 6)]
        assert np.allclose(m["energy_decay"], expected)

    def test_single_entry(self):
        tr = self.make_trace([3.0], residuals=[0.25])
        m = trace_metrics(tr)
        assert len(m["energy_decay"]) == 0
        assert m["mean_residual"] == 0.25

    def test_empty_trace_rejected(self):
        with pytest.raises(ValueError, match="empty trace"):
            trace_metrics(SolverTrace(method="x"))

    def test_csv_round_trip(self, tmp_path):
        import csv

        tr = self.make_trace([4.0, 2.0, 1.5], residuals=[0.5, 0.25, 0.125])
        path = tmp_path / "trace.csv"
        tr.to_csv(str(path))
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["iter", "energy", "residual_norm", "energy_decay", "wall_ms"]
        assert len(rows) == 4
        assert rows[1][3] == ""  # no decay at k = 0
        assert float(rows[2][1]) == 2.0
        assert float(rows[3][2]) == 0.125

    def test_convergence_iteration_arms_after_motion(self):
        # Flat warm-up, then motion, then settling.
        tr = SolverTrace(method="x")
        decays = [None, 0.0, 0.0, 0.5, 0.2, 0.005, 0.001]
        for k, d in enumerate(decays):
            tr.append(TraceRecord(k, 1.0, 0.0, d, 0.0))
        assert tr.convergence_iteration(0.01) == 5
