"""Discretized sampling of delta-correlated complex Gaussian (bi-)signals.

The continuum signal has covariance C(s1) * delta(s1 - s2); on a grid of width
dt the per-bin covariance becomes C(s_t) / dt with the midpoint bin time
s_t = (t + 1/2) dt, and samples at distinct bins are independent.  Sampling
draws z = F w with F a square-root factor of the per-bin covariance and w a
standard circularly-symmetric complex Gaussian vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError, NotPSD
from .model import pair_covariance_stack, per_bin_covariance_stack, validate_psd

CHUNK_BINS = 4096

SQRT_HALF = np.sqrt(0.5)


@dataclass(frozen=True)
class DiscretizationParams:
    """Time step and horizon of the bin grid; bin time is s_t = (t + 1/2) dt."""

    dt: float
    max_bins: int

    def __post_init__(self):
        if not np.isfinite(self.dt) or self.dt <= 0:
            raise NonFiniteError("dt must be finite and > 0")
        if int(self.max_bins) < 1:
            raise NonFiniteError("max_bins must be >= 1")
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "max_bins", int(self.max_bins))

    def bin_times(self, t0, n):
        return (np.arange(t0, t0 + n) + 0.5) * self.dt


@dataclass(frozen=True)
class BinSample:
    """One per-bin draw: complex amplitude vector at a given bin index."""

    bin_index: int
    values: np.ndarray


def trial_rng(master_seed, *key):
    """Deterministic per-trial substream: the same (seed, key) always yields
    the same generator, regardless of how trials are distributed over workers."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(seq)


def standard_complex(rng, shape):
    """Circularly-symmetric complex normal with E z conj(z) = 1 per entry."""
    x = rng.standard_normal(shape + (2,))
    return (x[..., 0] + 1j * x[..., 1]) * SQRT_HALF


def matrix_sqrt_psd(m):
    """Square-root factor F with F F^dagger = m.

    Strictly positive matrices go through the triangular decomposition;
    semidefinite ones fall back to an eigendecomposition with negative
    eigenvalues clipped to zero.
    """
    arr = np.asarray(m, dtype=complex)
    if not validate_psd(arr):
        raise NotPSD("matrix_sqrt_psd requires a PSD matrix")
    try:
        return np.linalg.cholesky(arr)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(arr)
        return v * np.sqrt(np.clip(w, 0.0, None))[None, :]


def _factor_stack(cov_stack):
    """Batched eigendecomposition square roots of a (n, d, d) Hermitian stack."""
    w, v = np.linalg.eigh(cov_stack)
    return v * np.sqrt(np.clip(w, 0.0, None))[:, None, :]


class FactorCache:
    """Per-bin square-root factors of C(s_t)/dt, built lazily in fixed chunks.

    Chunks are immutable once built, so a warmed cache can be shared read-only
    across workers; factor(t) * factor(t)^dagger reproduces the per-bin
    covariance to factorization accuracy.
    """

    def __init__(self, cov_stack_fn, disc, dim):
        self._fn = cov_stack_fn
        self._disc = disc
        self.dim = dim
        self._chunks = {}

    def _chunk(self, c):
        cached = self._chunks.get(c)
        if cached is None:
            t0 = c * CHUNK_BINS
            n = min(CHUNK_BINS, self._disc.max_bins - t0)
            s = self._disc.bin_times(t0, n)
            cached = _factor_stack(self._fn(s) / self._disc.dt)
            cached.setflags(write=False)
            self._chunks[c] = cached
        return cached

    def factors(self, t0, n):
        """(n, d, d) factor stack for bins t0 .. t0+n-1."""
        parts = []
        t = t0
        end = t0 + n
        while t < end:
            c, off = divmod(t, CHUNK_BINS)
            chunk = self._chunk(c)
            take = min(end - t, chunk.shape[0] - off)
            parts.append(chunk[off:off + take])
            t += take
        return parts[0] if len(parts) == 1 else np.concatenate(parts)

    def factor(self, t):
        return self.factors(t, 1)[0]

    def sample_block(self, t0, n, rng):
        """(n, d) complex draws z_t = F(t) w_t for bins t0 .. t0+n-1."""
        f = self.factors(t0, n)
        w = standard_complex(rng, (n, self.dim))
        return np.einsum("tij,tj->ti", f, w)


def bi_signal_cache(model, disc):
    """Factor cache for the full 2m-dimensional bi-signal."""
    return FactorCache(
        lambda s: per_bin_covariance_stack(model, s), disc, 2 * model.dim
    )


def pair_cache(model, i, j, disc):
    """Factor cache for the 2-dimensional sub-bi-signal (phi1(i), phi2(j))."""
    return FactorCache(
        lambda s: pair_covariance_stack(model, i, j, s), disc, 2
    )


class SingleSignalFactors:
    """Fast per-bin factors for an m-channel single signal.

    The per-bin covariance (B s_t + E0 I)/dt shares the eigenbasis of B for
    every bin, so one eigendecomposition serves the whole grid:
    F(s) = V diag(sqrt((lambda s + E0)/dt)).
    """

    def __init__(self, power_matrix, e0, disc):
        b = np.asarray(power_matrix, dtype=complex)
        self._disc = disc
        self._e0 = float(e0)
        self.dim = b.shape[0]
        lam, v = np.linalg.eigh(b)
        self._lam = np.clip(lam, 0.0, None)
        self._v = v

    def factors(self, t0, n):
        s = self._disc.bin_times(t0, n)
        d = np.sqrt((self._lam[None, :] * s[:, None] + self._e0) / self._disc.dt)
        return self._v[None] * d[:, None, :]

    def factor(self, t):
        return self.factors(t, 1)[0]

    def sample_block(self, t0, n, rng):
        s = self._disc.bin_times(t0, n)
        d = np.sqrt((self._lam[None, :] * s[:, None] + self._e0) / self._disc.dt)
        w = standard_complex(rng, (n, self.dim))
        scaled = w * d
        if self.dim == 1 or np.array_equal(self._v, np.eye(self.dim)):
            return scaled
        return scaled @ self._v.T


def sample_bin(model, t, disc, rng, cache=None):
    """One per-bin draw of the full bi-signal at bin t."""
    if cache is None:
        cache = bi_signal_cache(model, disc)
    z = cache.sample_block(t, 1, rng)[0]
    return BinSample(int(t), z)
