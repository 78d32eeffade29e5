"""Maps between the linear mixing circuit and the effective coupling matrix.

A recirculated linear-optics circuit with unitary single-pass scattering
matrix S_R induces an effective beam-splitter Hamiltonian between the
cavities.  With the round-trip matrix S_RL = S_R^T S_R, the effective
coupling is

    C = Im M,   M = S_RL (1 - S_RL)^{-1},

which is always real and symmetric.  Conversely, every real symmetric C
is realized by some symmetric unitary S_R; the constructive inverse used
here diagonalizes C with a real orthogonal basis and places each
eigenvalue lam on the unit circle at angle theta with lam = cot(theta/2)/2.
"""

from __future__ import annotations

import numpy as np


class MixingError(ValueError):
    """Raised for non-unitary scattering input or a singular recirculation."""


UNITARITY_TOL = 1e-10
SYMMETRY_TOL = 1e-12
SINGULARITY_TOL = 1e-8


def coupling_from_scattering(scattering: np.ndarray) -> np.ndarray:
    """Effective cavity-cavity coupling matrix induced by a mixing circuit.

    Args:
        scattering: unitary M x M single-pass scattering matrix S_R.

    Returns:
        Real symmetric M x M coupling matrix (units of the cavity linewidth).

    Raises:
        MixingError: if the input is not unitary to 1e-10, or the loop is
            resonant (an eigenvalue of S_R^T S_R within 1e-8 of +1, where
            the recirculation geometric series diverges).
    """
    S = np.asarray(scattering, dtype=complex)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise MixingError(f"scattering matrix must be square, got shape {S.shape}")
    M_dim = S.shape[0]
    defect = np.linalg.norm(S.conj().T @ S - np.eye(M_dim), ord=2)
    if defect > UNITARITY_TOL:
        raise MixingError(f"scattering matrix is not unitary (defect {defect:.2e})")

    loop = S.T @ S
    eigs = np.linalg.eigvals(loop)
    gap = np.min(np.abs(eigs - 1.0))
    if gap < SINGULARITY_TOL:
        raise MixingError(
            f"recirculation is resonant: loop eigenvalue within {gap:.2e} of 1"
        )

    mixing = loop @ np.linalg.inv(np.eye(M_dim) - loop)
    coupling = (mixing - mixing.conj().T) / 2j
    # The anti-Hermitian part above is Hermitian by construction; for a
    # symmetric unitary loop it is moreover real symmetric.
    residue = np.linalg.norm(coupling.imag, ord="fro")
    if residue > UNITARITY_TOL:
        raise MixingError(f"coupling came out complex (residue {residue:.2e})")
    return np.ascontiguousarray(coupling.real)


def scattering_from_coupling(coupling: np.ndarray) -> np.ndarray:
    """A symmetric unitary scattering matrix realizing a target coupling.

    Inverse of :func:`coupling_from_scattering` up to gauge freedom: the
    returned S_R is symmetric, and round-tripping through
    ``coupling_from_scattering`` reproduces the input.

    Args:
        coupling: real symmetric M x M matrix; any such matrix is realizable.

    Raises:
        MixingError: if the input is not real symmetric to 1e-12.
    """
    C = np.asarray(coupling, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise MixingError(f"coupling matrix must be square, got shape {C.shape}")
    if np.linalg.norm(C - C.T, ord="fro") > SYMMETRY_TOL:
        raise MixingError("coupling matrix must be symmetric")

    lam, O = np.linalg.eigh(C)
    # lam = cot(theta/2)/2 with theta/2 in (0, pi) picks the branch that is
    # smooth through lam = 0 (theta = pi, i.e. S_R = i O O^T there).
    theta = 2.0 * np.arctan2(1.0, 2.0 * lam)
    phases = np.exp(0.5j * theta)
    return (O * phases) @ O.T
