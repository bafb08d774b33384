"""Single-signal threshold detection.

A detector smooths the signal amplitude over a window of width kappa, forms
the energy of the smoothed amplitude, subtracts the mean background energy
(calibration), and clicks at the first time the calibrated energy reaches the
threshold.  Detection probabilities are estimated from per-channel click
rates: each channel's renewal rate (clicks per unit exposure time) is
normalized over channels, which is the statistic the click-fraction formula
P(j) ~ sigma_j^2 / Sigma^2 refers to.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _run
from .errors import InsufficientClicks, NonFiniteError, ValidationError
from .oracle import density_from_covariance
from .sampling import CHUNK_BINS, SingleSignalFactors, trial_rng


@dataclass(frozen=True)
class DetectorParams:
    """Smoothing window kappa, threshold, calibration background, run horizon."""

    kappa: float
    threshold: float
    background: float = 0.0
    max_time: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.kappa) or self.kappa <= 0:
            raise NonFiniteError("kappa must be finite and > 0")
        if not np.isfinite(self.threshold) or self.threshold <= 0:
            raise NonFiniteError("threshold must be finite and > 0")
        if not np.isfinite(self.background) or self.background < 0:
            raise NonFiniteError("background must be finite and >= 0")
        max_time = float(self.max_time)
        if max_time <= 0:
            max_time = 2500.0 * self.kappa
        if max_time < 10.0 * self.kappa:
            raise ValidationError("max_time must be at least 10 * kappa")
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "threshold", float(self.threshold))
        object.__setattr__(self, "background", float(self.background))
        object.__setattr__(self, "max_time", max_time)

    def window_bins(self, disc):
        """K = kappa / dt, required to be a positive integer."""
        k = self.kappa / disc.dt
        k_int = int(round(k))
        if k_int < 1 or abs(k - k_int) > 1e-9 * max(1.0, k):
            raise ValidationError(
                f"kappa/dt = {k} must be a positive integer"
            )
        return k_int

    def horizon_bins(self, disc):
        return min(disc.max_bins, int(round(self.max_time / disc.dt)))


@dataclass(frozen=True)
class ClickRecord:
    """One detection event: channel, click time, and originating trial."""

    channel: int
    tau: float
    trial_index: int


@dataclass(frozen=True)
class NoClick:
    """A trial in which no threshold crossing occurred before the horizon."""

    trial_index: int


@dataclass(frozen=True)
class ProbabilityReport:
    """Estimated outcome probabilities next to their analytic oracle values."""

    labels: tuple
    counts: np.ndarray
    probabilities: np.ndarray
    std_errors: np.ndarray
    oracle: np.ndarray
    tau_mean: float
    tau_se: float
    n_trials: int
    n_successful: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def max_discrepancy(self):
        return float(np.max(np.abs(self.probabilities - self.oracle)))

    @property
    def total_clicks(self):
        return int(np.sum(self.counts))


@dataclass(frozen=True)
class MeanTimeResult:
    """Mean click time with regime diagnostics."""

    tau_mean: float
    tau_se: float
    n_clicks: int
    n_trials: int
    ratio: float
    kappa_over_tau: float
    regime_violation: bool
    diagnostics: dict = field(default_factory=dict)


def smoothed_energy(window_buffer, dt, kappa):
    """|(dt/sqrt(kappa)) * sum of the K buffered samples|^2."""
    total = complex(np.sum(np.asarray(window_buffer, dtype=complex)))
    return float(np.abs(total * (dt / np.sqrt(kappa))) ** 2)


def sliding_energies(phi, carry, k_bins, dt, kappa):
    """Smoothed energies for every full window ending inside this chunk.

    phi is the (n, m) block of new per-bin amplitudes; carry holds the last
    k_bins - 1 amplitudes of the previous chunk (None at trial start).
    Returns (energies, new_carry); the r-th energy row corresponds to the
    r-th bin of the chunk when carry is given, otherwise to bin k_bins-1+r.
    """
    full = phi if carry is None else np.concatenate([carry, phi])
    m = phi.shape[1]
    tail = full[-(k_bins - 1):] if k_bins > 1 else full[:0]
    if full.shape[0] < k_bins:
        return np.zeros((0, m)), tail
    cs = np.concatenate([np.zeros((1, m), dtype=complex), np.cumsum(full, axis=0)])
    sums = cs[k_bins:] - cs[:-k_bins]
    energies = np.abs(sums) ** 2 * (dt * dt / kappa)
    return energies, tail


def _rotated_power(model, basis):
    m = model.dim
    u = np.eye(m) if basis is None else np.asarray(basis, dtype=complex)
    if u.shape != (m, m):
        raise ValidationError(f"basis must be {m}x{m}")
    if not np.allclose(u @ u.conj().T, np.eye(m), atol=1e-10):
        raise ValidationError("basis must be unitary")
    return u.conj().T @ model.power_matrix @ u


def first_crossing_scan(factors, k_bins, n_bins, dt, kappa, e0, e_d, rng,
                        latch_all=False):
    """Scan one trial for threshold crossings of the calibrated energy.

    With latch_all=False returns (bin, channels_tied_at_bin) of the first
    crossing, or (None, None).  With latch_all=True returns the array of each
    channel's first crossing bin (-1 where the channel never crossed).
    """
    m = factors.dim
    first = np.full(m, -1, dtype=np.int64)
    carry = None
    t = 0
    while t < n_bins:
        n = min(CHUNK_BINS, n_bins - t)
        phi = factors.sample_block(t, n, rng)
        energies, carry = sliding_energies(phi, carry, k_bins, dt, kappa)
        if energies.shape[0]:
            base = t if t > 0 else k_bins - 1
            crossed = energies - e0 >= e_d
            if latch_all:
                pending = first < 0
                hit = crossed[:, pending]
                any_hit = hit.any(axis=0)
                idx_pending = np.flatnonzero(pending)
                for col, channel in enumerate(idx_pending):
                    if any_hit[col]:
                        first[channel] = base + int(np.argmax(hit[:, col]))
                if not (first < 0).any():
                    return first
            else:
                rows = crossed.any(axis=1)
                if rows.any():
                    r = int(np.argmax(rows))
                    channels = np.flatnonzero(crossed[r])
                    return base + r, channels
        t += n
    if latch_all:
        return first
    return None, None


def run_single_trial(model, basis, det, disc, rng, trial_index=0, factors=None):
    """First-crossing race over the m channels of a single signal.

    The signal covariance per bin is (basis^dagger B basis) s_t + E0 I, the
    calibrated energy is the smoothed energy minus the calibration background,
    and ties between channels crossing at the same bin are broken uniformly
    from the trial's RNG stream.
    """
    if factors is None:
        factors = SingleSignalFactors(
            _rotated_power(model, basis), model.background_energy, disc
        )
    k_bins = det.window_bins(disc)
    n_bins = det.horizon_bins(disc)
    u, channels = first_crossing_scan(
        factors, k_bins, n_bins, disc.dt, det.kappa,
        det.background, det.threshold, rng,
    )
    if u is None:
        return NoClick(trial_index)
    channel = int(channels[0]) if len(channels) == 1 else int(rng.choice(channels))
    return ClickRecord(channel, (u + 1) * disc.dt, trial_index)


def _single_ctx(args):
    model, basis, det, disc = args[:4]
    return SingleSignalFactors(
        _rotated_power(model, basis), model.background_energy, disc
    )


def _latched_trial(t, args, factors):
    model, basis, det, disc, master_seed = args
    rng = trial_rng(master_seed, t)
    k_bins = det.window_bins(disc)
    n_bins = det.horizon_bins(disc)
    return first_crossing_scan(
        factors, k_bins, n_bins, disc.dt, det.kappa,
        det.background, det.threshold, rng, latch_all=True,
    )


def rate_normalized_probabilities(first_bins, dt, horizon_bins):
    """Per-channel renewal rates from latched first-crossing bins, normalized.

    first_bins is (n_trials, m) with -1 where a channel never crossed; the
    rate of channel j is clicks / exposure with exposure the click time, or
    the full horizon for censored trials.  Returns (counts, probabilities,
    std_errors).
    """
    clicked = first_bins >= 0
    counts = clicked.sum(axis=0)
    tau = np.where(clicked, (first_bins + 1) * dt, horizon_bins * dt)
    exposure = tau.sum(axis=0)
    rates = np.where(exposure > 0, counts / np.where(exposure > 0, exposure, 1.0), 0.0)
    total = rates.sum()
    if total <= 0:
        raise InsufficientClicks("no channel ever clicked")
    probs = rates / total
    total_clicks = counts.sum()
    std = np.sqrt(np.clip(probs * (1 - probs), 0.0, None) / max(total_clicks, 1))
    return counts, probs, std


def estimate_single_probabilities(model, basis, det, disc, n_trials,
                                  master_seed, workers=1):
    """Click probabilities of the m channels against the Born-rule oracle.

    Each trial restarts the signal at s = 0 and latches every channel's first
    crossing; probabilities are normalized per-channel click rates.  The
    oracle is the diagonal of rho = B / Tr B in the measurement basis.
    """
    if n_trials < 1:
        raise InsufficientClicks("at least one trial is required")
    args = (model, basis, det, disc, int(master_seed))
    results = _run.map_trials(_single_ctx, _latched_trial, args, n_trials, workers)
    first_bins = np.array(results)
    counts, probs, std = rate_normalized_probabilities(
        first_bins, disc.dt, det.horizon_bins(disc)
    )
    if counts.sum() < 100:
        raise InsufficientClicks(
            f"only {int(counts.sum())} clicks; need at least 100"
        )
    clicked_any = (first_bins >= 0).any(axis=1)
    earliest = np.where(first_bins >= 0, first_bins, np.iinfo(np.int64).max)
    tau_first = (earliest.min(axis=1)[clicked_any] + 1) * disc.dt
    tau_mean = float(tau_first.mean())
    tau_se = float(tau_first.std(ddof=1) / np.sqrt(len(tau_first))) if len(tau_first) > 1 else 0.0
    rho = density_from_covariance(_rotated_power(model, basis))
    oracle = np.real(np.diag(rho.matrix))
    m = model.dim
    noclick_rate = 1.0 - clicked_any.mean()
    return ProbabilityReport(
        labels=tuple(f"channel {j}" for j in range(m)),
        counts=counts,
        probabilities=probs,
        std_errors=std,
        oracle=oracle,
        tau_mean=tau_mean,
        tau_se=tau_se,
        n_trials=int(n_trials),
        n_successful=int(clicked_any.sum()),
        diagnostics={
            "kappa_over_tau": det.kappa / tau_mean,
            "noclick_rate": noclick_rate,
        },
    )


def _scalar_ctx(args):
    model, det, disc = args[:3]
    return SingleSignalFactors(model.power_matrix, model.background_energy, disc)


def _scalar_trial(t, args, factors):
    model, det, disc, master_seed = args
    rng = trial_rng(master_seed, t)
    k_bins = det.window_bins(disc)
    n_bins = det.horizon_bins(disc)
    u, _ = first_crossing_scan(
        factors, k_bins, n_bins, disc.dt, det.kappa,
        det.background, det.threshold, rng,
    )
    return -1 if u is None else u


def mean_click_time(model, det, disc, n_trials, seed, workers=1):
    """Mean first-click time of a single-channel signal, with the scaling
    ratio tau * sigma^2 / E_d and the kappa/tau regime diagnostic."""
    if model.dim != 1:
        raise ValidationError("mean_click_time expects a one-channel model")
    if model.background_energy != 0.0:
        raise ValidationError("mean_click_time is defined for zero background")
    args = (model, det, disc, int(seed))
    bins = np.array(_run.map_trials(_scalar_ctx, _scalar_trial, args, n_trials, workers))
    clicked = bins >= 0
    if clicked.sum() < 2:
        raise InsufficientClicks("too few clicks to estimate a mean time")
    tau = (bins[clicked] + 1) * disc.dt
    tau_mean = float(tau.mean())
    tau_se = float(tau.std(ddof=1) / np.sqrt(len(tau)))
    sigma2 = float(model.power_matrix[0, 0].real)
    kappa_over_tau = det.kappa / tau_mean
    return MeanTimeResult(
        tau_mean=tau_mean,
        tau_se=tau_se,
        n_clicks=int(clicked.sum()),
        n_trials=int(n_trials),
        ratio=tau_mean * sigma2 / det.threshold,
        kappa_over_tau=kappa_over_tau,
        regime_violation=bool(kappa_over_tau > 0.05),
        diagnostics={"noclick_rate": 1.0 - clicked.mean()},
    )


def calibrate_background(e0_true, det, disc, n_trials, seed):
    """Mean smoothed energy of the background-only signal; its expectation is
    the background energy itself, independently of the window position."""
    if n_trials < 10 ** 3:
        raise InsufficientClicks("calibration needs at least 1000 trials")
    if e0_true == 0.0:
        return 0.0, 0.0
    rng = trial_rng(int(seed), 0)
    k_bins = det.window_bins(disc)
    n_bins = min(det.horizon_bins(disc), k_bins + 256)
    scale = np.sqrt(e0_true / disc.dt)
    means = np.empty(int(n_trials))
    for t in range(int(n_trials)):
        x = rng.standard_normal((n_bins, 2))
        phi = (x[:, 0] + 1j * x[:, 1]) * (scale * np.sqrt(0.5))
        energies, _ = sliding_energies(
            phi[:, None], None, k_bins, disc.dt, det.kappa
        )
        means[t] = energies.mean()
    return float(means.mean()), float(means.std(ddof=1) / np.sqrt(len(means)))
