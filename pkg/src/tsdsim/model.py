"""Statistical law of single signals and bi-signals.

A single signal is described by a Hermitian PSD power matrix plus an optional
white background energy.  A bi-signal is described by its cross-correlation
matrix together with the two side power matrices derived from it; the per-bin
covariance of the discretized process follows from these ingredients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllZeroCrossMatrix,
    DimensionMismatch,
    NonFiniteError,
    NotHermitian,
    NotPSD,
    ZeroBackground,
    ZeroCross,
    ZeroTrace,
)

PSD_REL_TOL = 1e-10
HERM_REL_TOL = 1e-12

SCALAR_MATCHED = "scalar-matched"
MATRIX_MATCHED = "matrix-matched"


def _as_complex_matrix(m, name="matrix"):
    arr = np.array(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr.view(float))):
        raise NonFiniteError(f"{name} contains non-finite entries")
    return arr


def check_hermitian(m, rel_tol=HERM_REL_TOL, name="matrix"):
    arr = _as_complex_matrix(m, name)
    scale = max(np.abs(arr).max(), 1.0)
    if np.abs(arr - arr.conj().T).max() > rel_tol * scale * 10:
        raise NotHermitian(f"{name} is not Hermitian within tolerance")
    return 0.5 * (arr + arr.conj().T)


def validate_psd(m, rel_tol=PSD_REL_TOL):
    """True iff the Hermitian matrix has min eigenvalue >= -rel_tol * spectral scale.

    Raises NotHermitian when the symmetry check fails.
    """
    arr = check_hermitian(m, name="psd candidate")
    ev = np.linalg.eigvalsh(arr)
    scale = np.abs(ev).max() if ev.size else 0.0
    if scale == 0.0:
        return True
    return bool(ev.min() >= -rel_tol * scale)


@dataclass(frozen=True)
class SingleSignalSpec:
    """Power matrix B (Hermitian PSD, trace > 0) and background energy E0 >= 0."""

    power_matrix: np.ndarray
    background_energy: float = 0.0

    def __post_init__(self):
        b = check_hermitian(self.power_matrix, name="power_matrix")
        if not validate_psd(b):
            raise NotPSD("power_matrix is not positive semidefinite")
        if np.trace(b).real <= 0:
            raise ZeroTrace("power_matrix must have positive trace")
        if not np.isfinite(self.background_energy) or self.background_energy < 0:
            raise NonFiniteError("background_energy must be finite and >= 0")
        b.setflags(write=False)
        object.__setattr__(self, "power_matrix", b)
        object.__setattr__(self, "background_energy", float(self.background_energy))

    @property
    def dim(self):
        return self.power_matrix.shape[0]


@dataclass(frozen=True)
class CorrelationModel:
    """Full statistical law of a bi-signal.

    cross_matrix holds the inter-side correlation amplitudes; side1_power and
    side2_power are the per-side power matrices consistent with it; the
    background energy enters every per-bin covariance.  Joint detection is
    refused when background_energy == 0.
    """

    cross_matrix: np.ndarray
    side1_power: np.ndarray
    side2_power: np.ndarray
    background_energy: float
    mode: str

    def __post_init__(self):
        c = _as_complex_matrix(self.cross_matrix, "cross_matrix")
        s1 = check_hermitian(self.side1_power, name="side1_power")
        s2 = check_hermitian(self.side2_power, name="side2_power")
        if not (c.shape == s1.shape == s2.shape):
            raise DimensionMismatch("cross and side matrices must share a shape")
        for name, mat in (("side1_power", s1), ("side2_power", s2)):
            if not validate_psd(mat):
                raise NotPSD(f"{name} is not positive semidefinite")
        if not np.isfinite(self.background_energy) or self.background_energy < 0:
            raise NonFiniteError("background_energy must be finite and >= 0")
        for arr in (c, s1, s2):
            arr.setflags(write=False)
        object.__setattr__(self, "cross_matrix", c)
        object.__setattr__(self, "side1_power", s1)
        object.__setattr__(self, "side2_power", s2)
        object.__setattr__(self, "background_energy", float(self.background_energy))

    @property
    def dim(self):
        return self.cross_matrix.shape[0]

    @property
    def total_cross_power(self):
        """Sum of |sigma12(ij)|^2 over all pairs."""
        return float(np.sum(np.abs(self.cross_matrix) ** 2))

    @property
    def joint_detection_allowed(self):
        return self.background_energy > 0.0

    def require_joint(self):
        if not self.joint_detection_allowed:
            raise ZeroBackground(
                "joint detection requires a positive background energy"
            )


@dataclass(frozen=True)
class PerBinCovariance:
    """Hermitian 2m x 2m covariance block evaluated at signal time s."""

    time: float
    matrix: np.ndarray = field(repr=False)


def build_matrix_model(sigma12, e0):
    """Bi-signal model whose side powers are derived from the cross matrix.

    side1 = sigma12 sigma12^dagger and side2 = sigma12^dagger sigma12.  With
    these matched powers the full per-bin covariance is positive semidefinite
    at every signal time: in the singular basis sigma12 = U S V^dagger the
    2m x 2m matrix decouples into per-mode 2 x 2 blocks with determinant
    (s_k^2 t - E0)^2 >= 0.  side2 is the entrywise conjugate of the side-2
    reduced density matrix of the state built from sigma12; the two share
    their diagonal in every measurement basis, so click statistics agree.
    """
    c = _as_complex_matrix(sigma12, "sigma12")
    if not np.any(c != 0):
        raise AllZeroCrossMatrix("sigma12 must have a nonzero entry")
    if not np.isfinite(e0) or e0 < 0:
        raise NonFiniteError("e0 must be finite and >= 0")
    side1 = c @ c.conj().T
    side2 = c.conj().T @ c
    return CorrelationModel(c, side1, side2, float(e0), MATRIX_MATCHED)


def build_scalar_pair_model(sigma12_entry, e0):
    """One-channel-per-side model with matched powers |sigma12|^2 on both sides."""
    z = complex(sigma12_entry)
    if z == 0:
        raise ZeroCross("sigma12 entry must be nonzero")
    if not (np.isfinite(z.real) and np.isfinite(z.imag) and np.isfinite(e0)):
        raise NonFiniteError("inputs must be finite")
    if e0 <= 0:
        raise ZeroBackground("the scalar pair model requires e0 > 0")
    p = np.array([[abs(z) ** 2]])
    return CorrelationModel(np.array([[z]]), p, p.copy(), float(e0), SCALAR_MATCHED)


def per_bin_covariance(model, s):
    """Covariance of the 2m-dimensional bi-signal at signal time s (before /dt).

    Diagonal blocks: side_k power * s + E0 * I.  Off-diagonal block:
    2 sqrt(E0) * sigma12 * sqrt(s).
    """
    if s < 0:
        raise NonFiniteError("s must be >= 0")
    m = model.dim
    e0 = model.background_energy
    top = model.side1_power * s + e0 * np.eye(m)
    bot = model.side2_power * s + e0 * np.eye(m)
    off = 2.0 * np.sqrt(e0) * model.cross_matrix * np.sqrt(s)
    mat = np.block([[top, off], [off.conj().T, bot]])
    mat = 0.5 * (mat + mat.conj().T)
    return PerBinCovariance(float(s), mat)


def per_bin_covariance_stack(model, s_values):
    """Vectorized per_bin_covariance: (n, 2m, 2m) array for an array of times."""
    s = np.asarray(s_values, dtype=float)
    m = model.dim
    e0 = model.background_energy
    n = s.shape[0]
    out = np.zeros((n, 2 * m, 2 * m), dtype=complex)
    eye = np.eye(m)
    out[:, :m, :m] = model.side1_power[None] * s[:, None, None] + e0 * eye
    out[:, m:, m:] = model.side2_power[None] * s[:, None, None] + e0 * eye
    off = 2.0 * np.sqrt(e0) * model.cross_matrix[None] * np.sqrt(s)[:, None, None]
    out[:, :m, m:] = off
    out[:, m:, :m] = np.conj(np.transpose(off, (0, 2, 1)))
    return out


def pair_covariance_stack(model, i, j, s_values):
    """(n, 2, 2) covariance stack for the sub-bi-signal (phi1(i), phi2(j))."""
    s = np.asarray(s_values, dtype=float)
    e0 = model.background_energy
    a = model.side1_power[i, i].real * s + e0
    b = model.side2_power[j, j].real * s + e0
    c = 2.0 * np.sqrt(e0) * model.cross_matrix[i, j] * np.sqrt(s)
    out = np.empty((s.shape[0], 2, 2), dtype=complex)
    out[:, 0, 0] = a
    out[:, 1, 1] = b
    out[:, 0, 1] = c
    out[:, 1, 0] = np.conj(c)
    return out


def singlet_model(e0, scale=1.0):
    """Matrix-matched model whose normalized cross matrix is the singlet state."""
    if e0 <= 0 or scale <= 0:
        raise NonFiniteError("e0 and scale must be positive")
    c = scale * np.array([[0.0, 1.0], [-1.0, 0.0]]) / np.sqrt(2.0)
    return build_matrix_model(c, e0)


def rotation(theta):
    """Real polarization-basis rotation [[cos, -sin], [sin, cos]]."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def rotate_bases(model, theta1, theta2):
    """Re-express the cross matrix in rotated measurement bases on each side.

    New cross matrix: R(theta1)^T sigma12 R(theta2); side powers are rebuilt
    from it, so the rotated model is again matrix-matched.
    """
    if model.dim != 2:
        raise DimensionMismatch("basis rotation is implemented for m=2 models")
    r1 = rotation(theta1)
    r2 = rotation(theta2)
    rotated = r1.conj().T @ model.cross_matrix @ r2.conj()
    return build_matrix_model(rotated, model.background_energy)
