"""Joint threshold detection of bi-signal components.

Each side channel runs the calibrated threshold detector of the single-signal
scheme; a joint click of the pair (i, j) requires both first crossings to fall
within the coincidence window.  Pair probabilities are estimated either
per-pair (each pair's joint click rate in isolation, normalized afterwards)
or as a race over all pairs of the full bi-signal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _run
from .detector import (
    DetectorParams,
    MeanTimeResult,
    NoClick,
    ProbabilityReport,
    estimate_single_probabilities,
    first_crossing_scan,
)
from .errors import InsufficientClicks, NonFiniteError, ValidationError
from .model import MATRIX_MATCHED, SingleSignalSpec
from .oracle import state_from_correlations
from .sampling import bi_signal_cache, pair_cache, trial_rng

PER_PAIR = "per-pair"
RACE = "race"


@dataclass(frozen=True)
class CoincidenceParams:
    """Shared detector settings, coincidence window, and counting mode."""

    detector: DetectorParams
    coincidence_window: float = 0.0
    counting_mode: str = PER_PAIR

    def __post_init__(self):
        if not np.isfinite(self.coincidence_window) or self.coincidence_window < 0:
            raise NonFiniteError("coincidence_window must be finite and >= 0")
        if self.counting_mode not in (PER_PAIR, RACE):
            raise ValidationError(
                f"counting_mode must be '{PER_PAIR}' or '{RACE}'"
            )
        object.__setattr__(
            self, "coincidence_window", float(self.coincidence_window)
        )

    def window_bins(self, disc):
        v = self.coincidence_window / disc.dt
        v_int = int(round(v))
        if abs(v - v_int) > 1e-9 * max(1.0, v):
            raise ValidationError(
                f"coincidence_window/dt = {v} must be an integer"
            )
        return v_int


@dataclass(frozen=True)
class JointClickRecord:
    """A coincidence: pair of channels and the two click times."""

    pair: tuple
    tau1: float
    tau2: float
    trial_index: int


def _pair_ctx(args):
    model, i, j, params, disc = args[:5]
    return pair_cache(model, i, j, disc)


def _pair_trial(t, args, cache):
    model, i, j, params, disc, master_seed, pair_index = args
    rng = trial_rng(master_seed, pair_index, t)
    det = params.detector
    first = first_crossing_scan(
        cache, det.window_bins(disc), det.horizon_bins(disc), disc.dt,
        det.kappa, det.background, det.threshold, rng, latch_all=True,
    )
    return int(first[0]), int(first[1])


def run_pair_trial(model, pair, params, disc, master_seed, trial_index=0,
                   pair_index=0):
    """One joint-detection trial of the sub-bi-signal (phi1(i), phi2(j)).

    Both calibrated energies must cross the threshold with click times within
    the coincidence window; the crossing bins are latched, so a trial either
    yields the pair's first matched coincidence or NoClick.
    """
    model.require_joint()
    i, j = pair
    args = (model, i, j, params, disc, int(master_seed), pair_index)
    cache = _pair_ctx(args)
    u1, u2 = _pair_trial(trial_index, args, cache)
    v_bins = params.window_bins(disc)
    if u1 < 0 or u2 < 0 or abs(u1 - u2) > v_bins:
        return NoClick(trial_index)
    return JointClickRecord(
        (i, j), (u1 + 1) * disc.dt, (u2 + 1) * disc.dt, trial_index
    )


def _pair_statistics(first_bins, v_bins, dt, horizon_bins):
    """(clicks, total exposure, joint click times) for one pair's trials."""
    u1 = first_bins[:, 0]
    u2 = first_bins[:, 1]
    matched = (u1 >= 0) & (u2 >= 0) & (np.abs(u1 - u2) <= v_bins)
    tau = np.maximum(u1, u2) + 1.0
    exposure = np.where(matched, tau, float(horizon_bins)) * dt
    return int(matched.sum()), float(exposure.sum()), tau[matched] * dt


def estimate_joint_probabilities(model, params, disc, n_trials, master_seed,
                                 workers=1):
    """Pair click probabilities against the oracle |Psi(ij)|^2.

    Per-pair mode estimates each pair's coincidence rate from independent
    trials and normalizes rates over all pairs.  Race mode simulates the full
    bi-signal and counts the first matched pair per trial.
    """
    model.require_joint()
    if params.counting_mode == RACE:
        return _estimate_joint_race(model, params, disc, n_trials, master_seed,
                                    workers)
    m = model.dim
    det = params.detector
    v_bins = params.window_bins(disc)
    horizon = det.horizon_bins(disc)
    rates = np.zeros((m, m))
    counts = np.zeros((m, m), dtype=np.int64)
    all_taus = []
    for pair_index, (i, j) in enumerate((i, j) for i in range(m) for j in range(m)):
        args = (model, i, j, params, disc, int(master_seed), pair_index)
        res = np.array(
            _run.map_trials(_pair_ctx, _pair_trial, args, n_trials, workers)
        )
        n_clicks, exposure, taus = _pair_statistics(res, v_bins, disc.dt, horizon)
        counts[i, j] = n_clicks
        rates[i, j] = n_clicks / exposure if exposure > 0 else 0.0
        all_taus.append(taus)
    return _joint_report(model, params, disc, counts, rates,
                         np.concatenate(all_taus), int(n_trials))


def _race_ctx(args):
    model, params, disc = args[:3]
    return bi_signal_cache(model, disc)


def _race_trial(t, args, cache):
    model, params, disc, master_seed, v_bins = args
    rng = trial_rng(master_seed, t)
    det = params.detector
    first = first_crossing_scan(
        cache, det.window_bins(disc), det.horizon_bins(disc), disc.dt,
        det.kappa, det.background, det.threshold, rng, latch_all=True,
    )
    m = model.dim
    u1 = first[:m]
    u2 = first[m:]
    matched = (u1[:, None] >= 0) & (u2[None, :] >= 0) & (
        np.abs(u1[:, None] - u2[None, :]) <= v_bins
    )
    if not matched.any():
        return -1, -1
    tau = np.maximum(u1[:, None], u2[None, :])
    tau = np.where(matched, tau, np.iinfo(np.int64).max)
    best = tau.min()
    winners = np.argwhere(tau == best)
    k = 0 if len(winners) == 1 else int(rng.integers(len(winners)))
    i, j = winners[k]
    return int(i) * m + int(j), int(best)


def _estimate_joint_race(model, params, disc, n_trials, master_seed, workers):
    m = model.dim
    v_bins = params.window_bins(disc)
    args = (model, params, disc, int(master_seed), v_bins)
    res = np.array(_run.map_trials(_race_ctx, _race_trial, args, n_trials, workers))
    winners = res[:, 0]
    taus = (res[:, 1][winners >= 0] + 1) * disc.dt
    counts = np.bincount(winners[winners >= 0], minlength=m * m).reshape(m, m)
    total = counts.sum()
    if total == 0:
        raise InsufficientClicks("no joint clicks in race mode")
    return _joint_report(model, params, disc, counts,
                         counts / total, taus, int(n_trials))


def _joint_report(model, params, disc, counts, rates, taus, n_trials):
    m = model.dim
    total_rate = rates.sum()
    if counts.sum() == 0 or total_rate <= 0:
        raise InsufficientClicks("no joint clicks recorded")
    probs = (rates / total_rate).ravel()
    psi = state_from_correlations(model.cross_matrix)
    oracle = np.abs(psi.vector) ** 2
    total_clicks = int(counts.sum())
    std = np.sqrt(np.clip(probs * (1 - probs), 0.0, None) / total_clicks)
    tau_mean = float(taus.mean()) if len(taus) else float("nan")
    tau_se = (
        float(taus.std(ddof=1) / np.sqrt(len(taus))) if len(taus) > 1 else 0.0
    )
    det = params.detector
    sigma2_max = float(np.max(np.abs(model.cross_matrix)) ** 2)
    e0 = model.background_energy
    return ProbabilityReport(
        labels=tuple(f"pair ({i},{j})" for i in range(m) for j in range(m)),
        counts=counts.ravel(),
        probabilities=probs,
        std_errors=std,
        oracle=oracle,
        tau_mean=tau_mean,
        tau_se=tau_se,
        n_trials=n_trials,
        n_successful=total_clicks,
        diagnostics={
            "kappa_over_tau": det.kappa / tau_mean if tau_mean > 0 else float("nan"),
            "sigma2_tau_over_e0": sigma2_max * tau_mean / e0,
            "counting_mode": params.counting_mode,
        },
    )


def mean_joint_time(model, params, disc, n_trials, seed, workers=1):
    """Mean coincidence time of a one-pair model with regime diagnostics.

    Reports the dimensionless products 4 E0 sigma^2 tau / E_d^2 and
    sigma^2 tau / E0; the weak-signal regime requires the latter <= 0.2.
    """
    model.require_joint()
    if model.dim != 1:
        raise ValidationError("mean_joint_time expects a one-pair model")
    det = params.detector
    v_bins = params.window_bins(disc)
    args = (model, 0, 0, params, disc, int(seed), 0)
    res = np.array(_run.map_trials(_pair_ctx, _pair_trial, args, n_trials, workers))
    n_clicks, _, taus = _pair_statistics(
        res, v_bins, disc.dt, det.horizon_bins(disc)
    )
    if n_clicks < 2:
        raise InsufficientClicks("too few joint clicks to estimate a mean time")
    tau_mean = float(taus.mean())
    tau_se = float(taus.std(ddof=1) / np.sqrt(len(taus)))
    sigma2 = float(np.abs(model.cross_matrix[0, 0]) ** 2)
    e0 = model.background_energy
    weak_ratio = sigma2 * tau_mean / e0
    return MeanTimeResult(
        tau_mean=tau_mean,
        tau_se=tau_se,
        n_clicks=n_clicks,
        n_trials=int(n_trials),
        ratio=4.0 * e0 * sigma2 * tau_mean / det.threshold ** 2,
        kappa_over_tau=det.kappa / tau_mean,
        regime_violation=bool(weak_ratio > 0.2),
        diagnostics={
            "sigma2_tau_over_e0": weak_ratio,
            "noclick_rate": 1.0 - n_clicks / int(n_trials),
        },
    )


def estimate_marginal_probabilities(model, params, disc, n_trials, seed,
                                    workers=1):
    """Single-side click probabilities of each bi-signal component.

    Side k is detected as an m-channel single signal with power matrix the
    side's power and the background folded in; the oracle is the diagonal of
    the corresponding reduced density matrix.
    """
    if model.mode != MATRIX_MATCHED:
        raise ValidationError("marginals require a matrix-matched model")
    seeds = [int(s.generate_state(1)[0]) for s in
             np.random.SeedSequence(int(seed)).spawn(2)]
    reports = []
    for k, power in ((1, model.side1_power), (2, model.side2_power)):
        spec = SingleSignalSpec(power, model.background_energy)
        det = DetectorParams(
            kappa=params.detector.kappa,
            threshold=params.detector.threshold,
            background=model.background_energy,
            max_time=params.detector.max_time,
        )
        reports.append(
            estimate_single_probabilities(
                spec, None, det, disc, n_trials, seeds[k - 1], workers
            )
        )
    return tuple(reports)
