"""Exact piecewise-constant time evolution.

Each control bin contributes U_p = exp(-i H_p dt_p), evaluated exactly
through the eigendecomposition of the real symmetric H_p.  A schedule of
bins composes right to left (bin 1 acts first):

    U = U_P ... U_2 U_1.

The eigendecompositions are also what the analytic gradient consumes, so
propagation and differentiation share one code path (see `objective`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import HilbertSpace, Operator, StateVector
from .model import ControlBin, NonlinearKind, build_hamiltonian

HERMITICITY_TOL = 1e-12

# Test hook: relative amplitude error applied to every exponential factor,
# so the verification suite can prove the unitarity oracle actually catches
# a broken matrix exponential.  (A phase error would stay unitary and hide.)
_EXPM_PERTURBATION = 0.0


@dataclass(frozen=True)
class Propagator:
    """Unitary evolution operator on one sector."""

    matrix: np.ndarray
    space: HilbertSpace

    def apply(self, state: StateVector) -> StateVector:
        if state.space is not self.space:
            raise ValueError("propagator applied outside its sector")
        return StateVector(self.space, self.matrix @ state.amplitudes)

    def unitarity_defect(self) -> float:
        d = self.matrix.shape[0]
        return float(np.linalg.norm(self.matrix.conj().T @ self.matrix - np.eye(d), ord=2))


def expm_step(hamiltonian: Operator, dt: float) -> Propagator:
    """exp(-i H dt) through the eigendecomposition of a Hermitian H."""
    H = hamiltonian.matrix
    defect = np.linalg.norm(H - H.conj().T, ord="fro")
    if defect > HERMITICITY_TOL * max(1.0, np.linalg.norm(H, ord="fro")):
        raise ValueError(f"Hamiltonian is not Hermitian (defect {defect:.2e})")
    lam, V = np.linalg.eigh(H)
    phases = (1.0 + _EXPM_PERTURBATION) * np.exp(-1j * lam * dt)
    U = (V * phases) @ V.conj().T if np.iscomplexobj(H) else (V * phases) @ V.T
    return Propagator(U, hamiltonian.domain)


def evolve(
    space: HilbertSpace,
    coupling: np.ndarray,
    bins: list[ControlBin],
    kind: NonlinearKind,
) -> Propagator:
    """Compose the exact propagator of a whole control schedule on a sector."""
    if not bins:
        raise ValueError("schedule must contain at least one bin")
    U = np.eye(space.dim, dtype=complex)
    for bin in bins:
        if bin.dt <= 0:
            raise ValueError(f"bin duration must be positive, got {bin.dt}")
        H = build_hamiltonian(space, coupling, bin, kind)
        U = expm_step(H, bin.dt).matrix @ U
    return Propagator(U, space)
