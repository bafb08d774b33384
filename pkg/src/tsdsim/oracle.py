"""Analytic quantum-mechanical reference values.

Density matrices from power matrices, Born probabilities, the bipartite state
vector built from a cross-correlation matrix, partial traces, joint
probabilities in rotated measurement bases, the two-outcome correlation
function, and the CHSH combination.  All functions are pure and exact up to
floating point; every simulated statistic is compared against them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllZero, NotPSD, ZeroTrace
from .model import check_hermitian, rotation, validate_psd

CANONICAL_CHSH_ANGLES = (0.0, np.pi / 4, np.pi / 8, 3 * np.pi / 8)

TSIRELSON_BOUND = 2.0 * np.sqrt(2.0)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian PSD matrix of unit trace."""

    matrix: np.ndarray

    def __post_init__(self):
        rho = check_hermitian(self.matrix, name="density matrix")
        if not validate_psd(rho):
            raise NotPSD("density matrix is not positive semidefinite")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > 1e-12:
            raise ZeroTrace(f"density matrix trace {tr} is not 1")
        rho.setflags(write=False)
        object.__setattr__(self, "matrix", rho)

    @property
    def dim(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class QuantumState:
    """Normalized complex vector on a bipartite space of dimension m*m.

    The pair index (i, j) is flattened as i*m + j throughout the package.
    """

    vector: np.ndarray

    def __post_init__(self):
        psi = np.array(self.vector, dtype=complex).ravel()
        m = int(round(np.sqrt(psi.size)))
        if m * m != psi.size:
            raise AllZero(f"state length {psi.size} is not a perfect square")
        norm = np.linalg.norm(psi)
        if abs(norm - 1.0) > 1e-12:
            raise AllZero(f"state norm {norm} is not 1")
        psi.setflags(write=False)
        object.__setattr__(self, "vector", psi)

    @property
    def side_dim(self):
        return int(round(np.sqrt(self.vector.size)))

    def as_matrix(self):
        """Reshape to m x m with rows indexing side 1 and columns side 2."""
        m = self.side_dim
        return self.vector.reshape(m, m)


def density_from_covariance(b):
    """rho = B / Tr B."""
    arr = check_hermitian(b, name="power matrix")
    tr = np.trace(arr).real
    if tr <= 0:
        raise ZeroTrace("power matrix must have positive trace")
    return DensityMatrix(arr / tr)


def born_probability(rho, e_j):
    """<e_j| rho |e_j> for a unit vector e_j."""
    v = np.asarray(e_j, dtype=complex).ravel()
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > 1e-9:
        raise AllZero(f"projection vector norm {norm} is not 1")
    return float(np.real(v.conj() @ rho.matrix @ v))


def state_from_correlations(sigma12):
    """Psi(ij) = sigma12(ij) / ||sigma12||_F, flattened as i*m + j."""
    arr = np.asarray(sigma12, dtype=complex)
    norm = np.linalg.norm(arr)
    if norm == 0:
        raise AllZero("cross matrix is identically zero")
    return QuantumState((arr / norm).ravel())


def partial_trace(state, side):
    """Reduced density matrix of side 1 or side 2."""
    psi = state.as_matrix()
    if side == 1:
        rho = psi @ psi.conj().T
    elif side == 2:
        rho = psi.T @ psi.conj()
    else:
        raise ValueError("side must be 1 or 2")
    return DensityMatrix(rho)


def basis_vector(theta, outcome):
    """Measurement vector of the given outcome (+1 -> column 0, -1 -> column 1)
    of the rotated basis R(theta)."""
    col = 0 if outcome > 0 else 1
    return rotation(theta)[:, col].astype(complex)


def joint_born(state, theta1, theta2, i, j):
    """|<e_i(theta1) (x) e_j(theta2), Psi>|^2 for outcomes i, j in {+1, -1}."""
    if state.side_dim != 2:
        raise ValueError("joint_born is defined for two-channel sides")
    e1 = basis_vector(theta1, i)
    e2 = basis_vector(theta2, j)
    amp = e1.conj() @ state.as_matrix() @ e2.conj()
    return float(np.abs(amp) ** 2)


def joint_born_table(state, theta1, theta2):
    """2x2 array of joint probabilities, rows outcome +1/-1 on side 1."""
    return np.array(
        [
            [joint_born(state, theta1, theta2, +1, +1),
             joint_born(state, theta1, theta2, +1, -1)],
            [joint_born(state, theta1, theta2, -1, +1),
             joint_born(state, theta1, theta2, -1, -1)],
        ]
    )


def correlation(state, theta1, theta2):
    """E = P(++) + P(--) - P(+-) - P(-+) with outcomes valued +1/-1."""
    p = joint_born_table(state, theta1, theta2)
    return float(p[0, 0] + p[1, 1] - p[0, 1] - p[1, 0])


def chsh_value(state, a, a_prime, b, b_prime):
    """S = |E(a,b) - E(a,b')| + |E(a',b) + E(a',b')|."""
    e_ab = correlation(state, a, b)
    e_ab2 = correlation(state, a, b_prime)
    e_a2b = correlation(state, a_prime, b)
    e_a2b2 = correlation(state, a_prime, b_prime)
    return float(abs(e_ab - e_ab2) + abs(e_a2b + e_a2b2))


def chsh_from_correlations(e_ab, e_ab2, e_a2b, e_a2b2):
    """Same combination applied to externally estimated correlations."""
    return float(abs(e_ab - e_ab2) + abs(e_a2b + e_a2b2))
