"""Sector Hamiltonians for driven cavity networks with one nonlinearity.

Within one excitation sector the Hamiltonian of the network is

    H = sum_m dc_m n_m  +  sum_{n<m} C_nm sqrt(k_n k_m) (a_n^+ a_m + h.c.)  +  H_NL

with H_NL either self-phase modulation, -sum_m n_m (n_m - 1), or a resonant
emitter term  sum_m (sigma_m a_m^+ + h.c.) + sum_m de_m sigma_m^+ sigma_m.
All rates are expressed in units of the nonlinear rate (the Kerr shift or
the emitter coupling g), which is therefore fixed at 1.  Every term is real
symmetric in the Fock basis, so Hamiltonians are returned as float arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .hilbert import HilbertSpace, Operator, sector_operators


class NonlinearKind(str, Enum):
    """Which nonlinearity every cavity carries."""

    SPM = "spm"
    TLE = "tle"


@dataclass(frozen=True)
class ControlBin:
    """Physical control values held constant over one time bin.

    Attributes:
        kappa: per-mode coupling rates into the mixing circuit, >= 0.
        delta_c: per-mode cavity detunings.
        delta_e: per-mode emitter detunings (TLE networks only).
        dt: bin duration, > 0.
    """

    kappa: np.ndarray
    delta_c: np.ndarray
    delta_e: np.ndarray | None
    dt: float


def coupling_energies(coupling: np.ndarray, kappa: np.ndarray, pair_index) -> np.ndarray:
    """Hop amplitudes C_nm sqrt(k_n k_m) for each mode pair n < m."""
    return np.array([coupling[n, m] * np.sqrt(kappa[n] * kappa[m]) for n, m in pair_index])


def build_hamiltonian(
    space: HilbertSpace,
    coupling: np.ndarray,
    bin: ControlBin,
    kind: NonlinearKind,
) -> Operator:
    """Assemble the sector Hamiltonian for one control bin.

    Args:
        space: excitation sector to represent the Hamiltonian in.
        coupling: real symmetric M x M mixing-circuit coupling matrix.
        bin: physical control values for the bin.
        kind: nonlinearity of the network.

    Returns:
        Hermitian (real symmetric) Operator on `space`.
    """
    M = space.layout.num_modes
    kappa = np.asarray(bin.kappa, dtype=float)
    delta_c = np.asarray(bin.delta_c, dtype=float)
    if kappa.shape != (M,) or delta_c.shape != (M,):
        raise ValueError(f"controls must have one entry per mode (M={M})")
    if np.any(kappa < 0):
        raise ValueError("kappa rates must be non-negative")

    ops = sector_operators(space)
    diag = ops.occupations @ delta_c

    if kind is NonlinearKind.SPM:
        if bin.delta_e is not None:
            raise ValueError("delta_e has no meaning for a Kerr network")
        diag = diag - ops.spm_diagonal
    elif kind is NonlinearKind.TLE:
        if space.layout.num_emitters != M:
            raise ValueError("TLE network needs one emitter per mode")
        delta_e = np.zeros(M) if bin.delta_e is None else np.asarray(bin.delta_e, dtype=float)
        if delta_e.shape != (M,):
            raise ValueError(f"delta_e must have one entry per mode (M={M})")
        diag = diag + ops.emitter_bits @ delta_e
    else:
        raise ValueError(f"unknown nonlinearity {kind!r}")

    H = np.diag(diag)
    energies = coupling_energies(coupling, kappa, ops.pair_index)
    if ops.pair_hops.size:
        H = H + np.tensordot(energies, ops.pair_hops, axes=1)
    if kind is NonlinearKind.TLE:
        H = H + ops.jc_matrix
    return Operator(H, space, space)
