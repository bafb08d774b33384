"""End-to-end statistical acceptance checks.

Each test covers one acceptance criterion, prints a single PASS/FAIL line
(visible with pytest -s; pytest -v reports the same verdict per test), and
asserts the stated tolerance.  These tests re-run the full Monte Carlo
pipelines at production scale, so the whole module takes tens of minutes on
one core.
"""

import numpy as np
import pytest

from tsdsim.cli import PRESETS, _child_seeds, main
from tsdsim.coincidence import (
    CoincidenceParams,
    estimate_joint_probabilities,
    estimate_marginal_probabilities,
    mean_joint_time,
)
from tsdsim.detector import (
    DetectorParams,
    estimate_single_probabilities,
    mean_click_time,
)
from tsdsim.gaussian import randomized_check
from tsdsim.model import (
    SingleSignalSpec,
    build_matrix_model,
    build_scalar_pair_model,
    per_bin_covariance_stack,
    rotate_bases,
    singlet_model,
    validate_psd,
)
from tsdsim.oracle import chsh_from_correlations, joint_born, state_from_correlations
from tsdsim.sampling import DiscretizationParams


def verdict(number, ok, detail):
    line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line, flush=True)
    return line


# shared strongly-correlated joint settings (the born-joint / chsh presets)
E0, DT, KAPPA, ED, WINDOW, MAX_T = 25.0, 0.02, 0.08, 330.0, 1.76, 400.0


def joint_setup():
    det = DetectorParams(kappa=KAPPA, threshold=ED, background=E0,
                         max_time=MAX_T)
    params = CoincidenceParams(det, WINDOW)
    disc = DiscretizationParams(dt=DT, max_bins=int(round(MAX_T / DT)))
    return params, disc


@pytest.mark.slow
def test_criterion_01_single_channel_born_rule():
    """m=2, B=diag(0.3, 0.7), no background: P(0) within 0.02 of 0.3."""
    spec = SingleSignalSpec(np.diag([0.3, 0.7]), 0.0)
    det = DetectorParams(kappa=0.01, threshold=4000.0, max_time=25000.0)
    disc = DiscretizationParams(dt=0.01, max_bins=2_500_000)
    rep = estimate_single_probabilities(spec, None, det, disc, 15_000, 1)
    dev = abs(rep.probabilities[0] - 0.3)
    ok = dev <= 0.02 and rep.total_clicks >= 30_000
    verdict(1, ok, f"|P(0) - 0.3| = {dev:.4f} (<= 0.02), "
                   f"clicks = {rep.total_clicks} (>= 30000)")
    assert rep.total_clicks >= 30_000
    assert dev <= 0.02


def test_criterion_02_threshold_power_scaling():
    """tau * sigma^2 / E_d constant within 5% over sigma^2 and E_d grids."""
    ratios = []
    seed = 100
    for sigma2 in (0.5, 1.0, 2.0):
        for e_d in (20.0, 40.0):
            # co-scale the time resolution with the expected click time
            # E_d / sigma^2 so every run resolves its window equally well
            u = e_d / sigma2
            kappa, dt = 8e-4 * u, 2e-4 * u
            det = DetectorParams(kappa=kappa, threshold=e_d,
                                 max_time=2500 * kappa)
            disc = DiscretizationParams(
                dt=dt, max_bins=int(round(2500 * kappa / dt))
            )
            spec = SingleSignalSpec(np.array([[sigma2]]), 0.0)
            res = mean_click_time(spec, det, disc, 4000, seed)
            seed += 1
            assert res.kappa_over_tau <= 0.05
            ratios.append(res.ratio)
    mean_ratio = float(np.mean(ratios))
    max_dev = max(abs(r / mean_ratio - 1.0) for r in ratios)
    ok = max_dev <= 0.05
    verdict(2, ok, f"tau*sigma^2/E_d in [{min(ratios):.4f}, {max(ratios):.4f}], "
                   f"max relative deviation {max_dev:.4f} (<= 0.05)")
    assert max_dev <= 0.05


@pytest.mark.slow
def test_criterion_03_joint_born_rule_singlet():
    """Singlet in z-bases: opposite pairs near 0.5, accidentals <= 0.02."""
    params, disc = joint_setup()
    rep = estimate_joint_probabilities(singlet_model(E0), params, disc,
                                       7000, 2)
    p = rep.probabilities
    ok = (
        rep.total_clicks >= 10_000
        and 0.47 <= p[1] <= 0.53 and 0.47 <= p[2] <= 0.53
        and p[0] <= 0.02 and p[3] <= 0.02
    )
    verdict(3, ok, f"P(+-) = {p[1]:.4f}, P(-+) = {p[2]:.4f} (in [0.47, 0.53]); "
                   f"P(++) = {p[0]:.4f}, P(--) = {p[3]:.4f} (<= 0.02); "
                   f"clicks = {rep.total_clicks} (>= 10000)")
    assert rep.total_clicks >= 10_000
    assert 0.47 <= p[1] <= 0.53
    assert 0.47 <= p[2] <= 0.53
    assert p[0] <= 0.02
    assert p[3] <= 0.02


@pytest.mark.slow
def test_criterion_04_rotated_joint_probability():
    """theta1=0, theta2=pi/8: P(++) within 0.02 of (1/2) sin^2(pi/8)."""
    params, disc = joint_setup()
    model = singlet_model(E0)
    rep = estimate_joint_probabilities(
        rotate_bases(model, 0.0, np.pi / 8), params, disc, 7000, 1
    )
    state = state_from_correlations(model.cross_matrix)
    target = joint_born(state, 0.0, np.pi / 8, +1, +1)
    assert target == pytest.approx(0.5 * np.sin(np.pi / 8) ** 2)
    dev = abs(rep.probabilities[0] - target)
    ok = dev <= 0.02
    verdict(4, ok, f"|P(++) - {target:.4f}| = {dev:.4f} (<= 0.02)")
    assert dev <= 0.02


@pytest.mark.slow
def test_criterion_05_chsh_violation():
    """Canonical angles: S >= 2.2 required; |S - 2 sqrt 2| <= 0.15 target."""
    params, disc = joint_setup()
    model = singlet_model(E0)
    a, a2, b, b2 = (0.0, np.pi / 4, np.pi / 8, 3 * np.pi / 8)
    estimates = []
    min_clicks = None
    for (t1, t2), seed in zip(
        ((a, b), (a, b2), (a2, b), (a2, b2)), _child_seeds(1, 4)
    ):
        rep = estimate_joint_probabilities(
            rotate_bases(model, t1, t2), params, disc, 12_500, seed
        )
        p = rep.probabilities.reshape(2, 2)
        estimates.append(float(p[0, 0] + p[1, 1] - p[0, 1] - p[1, 0]))
        min_clicks = (rep.total_clicks if min_clicks is None
                      else min(min_clicks, rep.total_clicks))
    s = chsh_from_correlations(*estimates)
    target_dev = abs(s - 2 * np.sqrt(2))
    ok = s >= 2.2 and min_clicks >= 10_000
    verdict(5, ok, f"S = {s:.4f} (>= 2.2 required); |S - 2*sqrt(2)| = "
                   f"{target_dev:.4f} (target <= 0.15); min clicks per "
                   f"setting = {min_clicks} (>= 10000)")
    assert min_clicks >= 10_000
    assert s >= 2.2
    assert target_dev <= 0.15


def test_criterion_06_joint_time_scaling():
    """Doubling E_d multiplies tau by 4 +- 10%; doubling E0 or sigma^2
    halves tau +- 10%, inside the weak-signal regime."""
    def tau(sigma2, e0, e_d, seed):
        model = build_scalar_pair_model(np.sqrt(sigma2), e0)
        det = DetectorParams(kappa=0.04, threshold=e_d, background=e0,
                             max_time=400.0)
        params = CoincidenceParams(det, 0.04)
        disc = DiscretizationParams(dt=0.01, max_bins=40_000)
        res = mean_joint_time(model, params, disc, 3000, seed)
        assert not res.regime_violation  # sigma^2 tau / E0 <= 0.2
        return res.tau_mean

    base = tau(1.0, 25.0, 50.0, 200)
    f_ed = tau(1.0, 25.0, 100.0, 201) / base
    f_e0 = tau(1.0, 50.0, 50.0, 202) / base
    f_s2 = tau(2.0, 25.0, 50.0, 203) / base
    ok = (abs(f_ed - 4.0) <= 0.4 and abs(f_e0 - 0.5) <= 0.05
          and abs(f_s2 - 0.5) <= 0.05)
    verdict(6, ok, f"tau factors: 2x E_d -> {f_ed:.3f} (want 4 +- 0.4), "
                   f"2x E0 -> {f_e0:.3f} (want 0.5 +- 0.05), "
                   f"2x sigma^2 -> {f_s2:.3f} (want 0.5 +- 0.05)")
    assert abs(f_ed - 4.0) <= 0.4
    assert abs(f_e0 - 0.5) <= 0.05
    assert abs(f_s2 - 0.5) <= 0.05


@pytest.mark.slow
def test_criterion_07_marginal_born_rule():
    """sigma12 = diag(sqrt 0.3, sqrt 0.7): side marginals within 0.02."""
    model = build_matrix_model(np.diag([np.sqrt(0.3), np.sqrt(0.7)]), 0.0)
    det = DetectorParams(kappa=0.01, threshold=4000.0, max_time=25000.0)
    params = CoincidenceParams(det, 0.0)
    disc = DiscretizationParams(dt=0.01, max_bins=2_500_000)
    side1, side2 = estimate_marginal_probabilities(model, params, disc,
                                                   10_000, 1)
    for rep in (side1, side2):
        np.testing.assert_allclose(rep.oracle, [0.3, 0.7], atol=1e-12)
    dev = max(side1.max_discrepancy, side2.max_discrepancy)
    ok = dev <= 0.02
    verdict(7, ok, f"max marginal deviation from (0.3, 0.7) = {dev:.4f} "
                   f"(<= 0.02)")
    assert dev <= 0.02


def test_criterion_08_quadratic_form_identities():
    """100 randomized analytic-vs-MC cases agree within 3 SE in >= 99."""
    results = randomized_check(100, 100_000, 1)
    n_within = sum(r["within"] for r in results)
    ok = n_within >= 99
    verdict(8, ok, f"analytic vs Monte Carlo within 3*SE in {n_within}/100 "
                   f"cases (>= 99)")
    assert n_within >= 99


def test_criterion_09_kernel_positivity():
    """Per-bin covariances of 20 random matched models are PSD on 1e4 bins."""
    rng = np.random.default_rng(9)
    disc = DiscretizationParams(dt=0.01, max_bins=10_000)
    s = disc.bin_times(0, 10_000)
    failures = 0
    for _ in range(20):
        m = int(rng.integers(2, 4))
        g = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        model = build_matrix_model(g, float(rng.uniform(0.5, 50.0)))
        stack = per_bin_covariance_stack(model, s)
        ev = np.linalg.eigvalsh(stack)
        scale = np.abs(ev).max(axis=1)
        failures += int((ev.min(axis=1) < -1e-10 * scale).sum())
        # spot-check the reference validator on a sample of bins
        for t in range(0, 10_000, 2500):
            assert validate_psd(stack[t])
    ok = failures == 0
    verdict(9, ok, f"PSD failures over 20 models x 10000 bins: {failures} "
                   f"(= 0)")
    assert failures == 0


def test_criterion_10_determinism_across_workers(tmp_path, monkeypatch,
                                                 capsys):
    """Preset reruns with different worker counts are byte-identical."""
    assert "mean-times" in PRESETS
    outputs = {}
    for workers in ("1", "2"):
        monkeypatch.setenv("TSD_WORKERS", workers)
        out_dir = tmp_path / f"workers-{workers}"
        code = main(["mean-times", "--trials", "200", "--seed", "5",
                     "--out", str(out_dir)])
        capsys.readouterr()
        assert code in (0, 2)
        outputs[workers] = (
            (out_dir / "report.txt").read_bytes(),
            (out_dir / "table.csv").read_bytes(),
        )
    ok = outputs["1"] == outputs["2"]
    verdict(10, ok, "report.txt and table.csv byte-identical for 1 and 2 "
                    "workers" if ok else "outputs differ across worker counts")
    assert ok
