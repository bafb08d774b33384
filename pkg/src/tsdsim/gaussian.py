"""Means and correlations of quadratic forms under complex Gaussian laws.

For a zero-mean circularly-symmetric complex Gaussian with covariance D and a
Hermitian form f_A(phi) = <A phi, phi>:

    E f_A             = Tr(D A)
    E f_{A1} f_{A2}   = Tr(D A1) Tr(D A2) + Tr(D A2 D A1)

and for a bipartite law with blocks D11, D12, D21, D22 and one-sided forms:

    E f_{A1} f_{A2}   = Tr(D11 A1) Tr(D22 A2) + Tr(D12 A2 D21 A1).

The analytic formulas act as an independent oracle for the detector
derivations; Monte Carlo counterparts validate them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadPartition, DimensionMismatch, NotPSD
from .model import check_hermitian, validate_psd
from .sampling import matrix_sqrt_psd, standard_complex

MAX_DIM = 64


@dataclass(frozen=True)
class GaussianLaw:
    """Zero-mean circular complex Gaussian with Hermitian PSD covariance.

    An optional block partition (d1, d2) with d1 + d2 = d marks the law as
    bipartite for the block correlation formula.
    """

    covariance: np.ndarray
    partition: tuple | None = None

    def __post_init__(self):
        d = check_hermitian(self.covariance, name="covariance")
        if d.shape[0] > MAX_DIM:
            raise DimensionMismatch(f"dimension capped at {MAX_DIM}")
        if not validate_psd(d):
            raise NotPSD("covariance is not positive semidefinite")
        if self.partition is not None:
            d1, d2 = (int(x) for x in self.partition)
            if d1 < 1 or d2 < 1 or d1 + d2 != d.shape[0]:
                raise BadPartition(
                    f"partition {self.partition} inconsistent with dim {d.shape[0]}"
                )
            object.__setattr__(self, "partition", (d1, d2))
        d.setflags(write=False)
        object.__setattr__(self, "covariance", d)

    @property
    def dim(self):
        return self.covariance.shape[0]

    def blocks(self):
        if self.partition is None:
            raise BadPartition("law has no block partition")
        d1, _ = self.partition
        d = self.covariance
        return d[:d1, :d1], d[:d1, d1:], d[d1:, :d1], d[d1:, d1:]


@dataclass(frozen=True)
class QuadraticForm:
    """Hermitian matrix A of the form phi -> <A phi, phi>."""

    matrix: np.ndarray

    def __post_init__(self):
        a = check_hermitian(self.matrix, name="quadratic form")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @property
    def dim(self):
        return self.matrix.shape[0]


def _check_dims(law, *forms):
    for f in forms:
        if f.dim != law.dim:
            raise DimensionMismatch(
                f"form dim {f.dim} does not match law dim {law.dim}"
            )


def quadratic_mean(law, form):
    """E f_A = Tr(D A)."""
    _check_dims(law, form)
    return float(np.trace(law.covariance @ form.matrix).real)


def quadratic_correlation(law, form1, form2):
    """E f_{A1} f_{A2} = Tr(D A1) Tr(D A2) + Tr(D A2 D A1)."""
    _check_dims(law, form1, form2)
    d = law.covariance
    a1, a2 = form1.matrix, form2.matrix
    value = np.trace(d @ a1) * np.trace(d @ a2) + np.trace(d @ a2 @ d @ a1)
    return float(value.real)


def quadratic_correlation_block(law, form1, form2):
    """Bipartite version with A1 acting on side 1 and A2 on side 2:
    Tr(D11 A1) Tr(D22 A2) + Tr(D12 A2 D21 A1)."""
    if law.partition is None:
        raise BadPartition("block correlation requires a partitioned law")
    d1, d2 = law.partition
    if form1.dim != d1 or form2.dim != d2:
        raise BadPartition(
            f"forms of dims ({form1.dim}, {form2.dim}) do not match partition ({d1}, {d2})"
        )
    d11, d12, d21, d22 = law.blocks()
    a1, a2 = form1.matrix, form2.matrix
    value = np.trace(d11 @ a1) * np.trace(d22 @ a2) + np.trace(d12 @ a2 @ d21 @ a1)
    return float(value.real)


def embed_block_forms(law, form1, form2):
    """Lift one-sided forms to the full space (A1 + 0 and 0 + A2), so the
    block formula can be cross-checked against the full-space one."""
    if law.partition is None:
        raise BadPartition("embedding requires a partitioned law")
    d1, d2 = law.partition
    full1 = np.zeros((law.dim, law.dim), dtype=complex)
    full2 = np.zeros((law.dim, law.dim), dtype=complex)
    full1[:d1, :d1] = form1.matrix
    full2[d1:, d1:] = form2.matrix
    return QuadraticForm(full1), QuadraticForm(full2)


def _sample(law, n_samples, rng):
    f = matrix_sqrt_psd(law.covariance)
    w = standard_complex(rng, (int(n_samples), law.dim))
    return w @ f.T


def _form_values(phi, form):
    return np.einsum("ti,ij,tj->t", phi.conj(), form.matrix, phi).real


def mc_quadratic_mean(law, form, n_samples, seed):
    """Monte Carlo estimate of E f_A: (estimate, standard error)."""
    _check_dims(law, form)
    if n_samples < 10 ** 3:
        raise ValueError("n_samples must be >= 1000")
    rng = np.random.default_rng(seed)
    vals = _form_values(_sample(law, n_samples, rng), form)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(len(vals)))


def random_hermitian(rng, d):
    g = standard_complex(rng, (d, d))
    return QuadraticForm(0.5 * (g + g.conj().T))


def random_psd_law(rng, d, partition=None):
    g = standard_complex(rng, (d, d))
    return GaussianLaw(g @ g.conj().T, partition)


def randomized_check(n_cases, n_samples, seed):
    """Validate the analytic identities against Monte Carlo on random cases.

    Each case draws a random PSD law and two random Hermitian forms at a
    random dimension d <= 8 and checks both the mean and the correlation
    identity within 3 standard errors.  Returns a list of per-case dicts.
    """
    rng = np.random.default_rng(seed)
    results = []
    for _ in range(int(n_cases)):
        d = int(rng.integers(2, 9))
        law = random_psd_law(rng, d)
        form1 = random_hermitian(rng, d)
        form2 = random_hermitian(rng, d)
        mean_exact = quadratic_mean(law, form1)
        corr_exact = quadratic_correlation(law, form1, form2)
        case_seed = int(rng.integers(2 ** 63))
        mean_mc, mean_se = mc_quadratic_mean(law, form1, n_samples, case_seed)
        corr_mc, corr_se = mc_quadratic_correlation(
            law, form1, form2, n_samples, case_seed + 1
        )
        results.append({
            "dim": d,
            "mean_exact": mean_exact,
            "mean_mc": mean_mc,
            "mean_se": mean_se,
            "corr_exact": corr_exact,
            "corr_mc": corr_mc,
            "corr_se": corr_se,
            "within": (
                abs(mean_mc - mean_exact) <= 3 * mean_se
                and abs(corr_mc - corr_exact) <= 3 * corr_se
            ),
        })
    return results


def mc_quadratic_correlation(law, form1, form2, n_samples, seed):
    """Monte Carlo estimate of E f_{A1} f_{A2}: (estimate, standard error)."""
    _check_dims(law, form1, form2)
    if n_samples < 10 ** 3:
        raise ValueError("n_samples must be >= 1000")
    rng = np.random.default_rng(seed)
    phi = _sample(law, n_samples, rng)
    vals = _form_values(phi, form1) * _form_values(phi, form2)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(len(vals)))
