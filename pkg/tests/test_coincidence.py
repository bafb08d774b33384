import numpy as np
import pytest

from tsdsim import errors
from tsdsim.coincidence import (
    PER_PAIR,
    RACE,
    CoincidenceParams,
    JointClickRecord,
    estimate_joint_probabilities,
    estimate_marginal_probabilities,
    mean_joint_time,
    run_pair_trial,
)
from tsdsim.detector import DetectorParams, NoClick
from tsdsim.model import build_scalar_pair_model, singlet_model
from tsdsim.sampling import DiscretizationParams

# strongly correlated regime used for the joint statistics checks
JOINT_DET = DetectorParams(kappa=0.08, threshold=330.0, background=25.0,
                           max_time=400.0)
JOINT_DISC = DiscretizationParams(dt=0.02, max_bins=20_000)


def joint_params(window=1.76, mode=PER_PAIR):
    return CoincidenceParams(JOINT_DET, window, mode)


class TestCoincidenceParams:
    def test_window_bins(self):
        assert joint_params().window_bins(JOINT_DISC) == 88

    def test_zero_window_allowed(self):
        assert joint_params(0.0).window_bins(JOINT_DISC) == 0

    def test_negative_window_rejected(self):
        with pytest.raises(errors.NonFiniteError):
            joint_params(-1.0)

    def test_bad_mode_rejected(self):
        with pytest.raises(errors.ValidationError):
            CoincidenceParams(JOINT_DET, 0.0, counting_mode="both")

    def test_non_integer_window_rejected(self):
        params = CoincidenceParams(JOINT_DET, 0.03)
        with pytest.raises(errors.ValidationError):
            params.window_bins(JOINT_DISC)


class TestRunPairTrial:
    def test_deterministic_coincidence(self):
        model = build_scalar_pair_model(1.0, 25.0)
        r1 = run_pair_trial(model, (0, 0), joint_params(), JOINT_DISC, 5, 0)
        r2 = run_pair_trial(model, (0, 0), joint_params(), JOINT_DISC, 5, 0)
        assert isinstance(r1, JointClickRecord)
        assert (r1.pair, r1.tau1, r1.tau2) == (r2.pair, r2.tau1, r2.tau2)

    def test_window_gates_acceptance(self):
        # shrinking the window to zero can only lose coincidences
        model = build_scalar_pair_model(1.0, 25.0)
        n_wide = n_zero = 0
        for t in range(40):
            wide = run_pair_trial(model, (0, 0), joint_params(), JOINT_DISC, 8, t)
            zero = run_pair_trial(model, (0, 0), joint_params(0.0), JOINT_DISC, 8, t)
            n_wide += isinstance(wide, JointClickRecord)
            n_zero += isinstance(zero, JointClickRecord)
            if isinstance(zero, JointClickRecord):
                assert isinstance(wide, JointClickRecord)
                assert zero.tau1 == zero.tau2
        assert n_zero <= n_wide

    def test_zero_background_rejected(self):
        from tsdsim.model import build_matrix_model

        model = build_matrix_model(singlet_model(25.0).cross_matrix, 0.0)
        with pytest.raises(errors.ZeroBackground):
            run_pair_trial(model, (0, 0), joint_params(), JOINT_DISC, 5, 0)


class TestJointStatistics:
    @pytest.mark.slow
    def test_singlet_anticorrelated_per_pair(self):
        model = singlet_model(25.0)
        report = estimate_joint_probabilities(
            model, joint_params(), JOINT_DISC, 500, 31
        )
        p = report.probabilities.reshape(2, 2)
        np.testing.assert_allclose(report.oracle, [0.0, 0.5, 0.5, 0.0])
        # opposite channels dominate same-channel accidentals
        assert p[0, 1] + p[1, 0] > 0.6
        assert p[0, 0] + p[1, 1] < 0.4
        assert report.diagnostics["counting_mode"] == PER_PAIR

    @pytest.mark.slow
    def test_singlet_anticorrelated_race(self):
        model = singlet_model(25.0)
        report = estimate_joint_probabilities(
            model, joint_params(mode=RACE), JOINT_DISC, 400, 32
        )
        p = report.probabilities.reshape(2, 2)
        assert p[0, 1] + p[1, 0] > 0.6
        assert report.diagnostics["counting_mode"] == RACE

    def test_scalar_pair_single_outcome(self):
        model = build_scalar_pair_model(1.0, 25.0)
        report = estimate_joint_probabilities(
            model, joint_params(), JOINT_DISC, 60, 33
        )
        np.testing.assert_allclose(report.probabilities, [1.0])
        np.testing.assert_allclose(report.oracle, [1.0])
        assert report.total_clicks > 0


class TestMeanJointTime:
    def test_diagnostics_and_determinism(self):
        model = build_scalar_pair_model(1.0, 25.0)
        r1 = mean_joint_time(model, joint_params(), JOINT_DISC, 80, 41)
        r2 = mean_joint_time(model, joint_params(), JOINT_DISC, 80, 41)
        assert r1.tau_mean == r2.tau_mean
        e0, e_d = 25.0, 330.0
        assert r1.ratio == pytest.approx(4 * e0 * r1.tau_mean / e_d ** 2)
        assert r1.diagnostics["sigma2_tau_over_e0"] == pytest.approx(
            r1.tau_mean / e0
        )
        assert r1.regime_violation == (r1.tau_mean / e0 > 0.2)

    def test_multipair_rejected(self):
        model = singlet_model(25.0)
        with pytest.raises(errors.ValidationError):
            mean_joint_time(model, joint_params(), JOINT_DISC, 10, 0)


class TestMarginals:
    def test_singlet_marginals_uniform(self):
        model = singlet_model(25.0)
        det = DetectorParams(kappa=0.08, threshold=150.0, background=25.0,
                             max_time=100.0)
        disc = DiscretizationParams(dt=0.02, max_bins=5_000)
        params = CoincidenceParams(det, 0.0)
        side1, side2 = estimate_marginal_probabilities(
            model, params, disc, 300, 51
        )
        for report in (side1, side2):
            np.testing.assert_allclose(report.oracle, [0.5, 0.5], atol=1e-12)
            assert abs(report.probabilities[0] - 0.5) < 0.1

    def test_scalar_model_rejected(self):
        model = build_scalar_pair_model(1.0, 25.0)
        with pytest.raises(errors.ValidationError):
            estimate_marginal_probabilities(
                model, joint_params(), JOINT_DISC, 10, 0
            )
