"""Speed limits and the exact circuit construction they derive from.

For a Kerr network, a dual-rail CZ works by routing both photons into one
mode pair, letting self-phase modulation accumulate a conditional phase,
and unrouting.  The conditional phase grows at most at twice the Kerr rate,
so reaching phase pi/2 - x costs at least (pi/4 - x/2) / chi3 of time, and
stopping x short of the full phase leaves an infidelity sin^2(x/2).
Inverting that law gives the minimum duration to reach a target infidelity

    T_min(I) = (pi/4 - arcsin(sqrt(I))) / chi3.

`analytic_cz_circuit` builds the matching explicit sequence (two balanced
mixing layers around a free Kerr evolution, plus -pi/2 phase shifts on the
second rail of each qubit) and is exact at full conditional phase, which
anchors the numerical tests of the bound.
"""

from __future__ import annotations

import math

import numpy as np

from .hilbert import CavityLayout, Operator, build_space, sector_operators
from .propagate import Propagator, expm_step

CHI3 = 1.0  # all durations in units of the inverse Kerr rate


def cz_min_duration(target_infidelity: float) -> float:
    """Shortest possible dual-rail CZ duration at a given infidelity budget."""
    if not 0.0 <= target_infidelity < 1.0:
        raise ValueError(f"target infidelity must lie in [0, 1), got {target_infidelity}")
    return (math.pi / 4.0 - math.asin(math.sqrt(target_infidelity))) / CHI3


def phase_offset_infidelity(x: float) -> float:
    """Infidelity of a CZ whose conditional phase misses pi/2 by x."""
    return math.sin(x / 2.0) ** 2


def analytic_cz_circuit(spm_phase: float = math.pi / 2) -> Propagator:
    """Explicit CZ sequence on four Kerr modes in the two-photon sector.

    Layers, first to last: -pi/2 phase shifts on modes 1 and 3 (the second
    rail of each qubit); a balanced mixing layer pairing modes (0, 3) and
    (1, 2); free Kerr evolution accumulating `spm_phase` of two-photon
    phase; the same mixing layer again.  At spm_phase = pi/2 this is
    exactly CZ; at pi/2 - x its infidelity is sin^2(x/2).
    """
    layout = CavityLayout(num_modes=4, per_mode_cutoff=2)
    space = build_space(layout, 2)
    ops = sector_operators(space)

    def balanced_mixer(u: int, l: int) -> np.ndarray:
        """exp(i pi/2 n_l) exp(-i pi/4 (a_u^+ a_l + h.c.)) exp(i pi/2 n_l):
        maps a_u -> (a_u + a_l)/sqrt2, a_l -> (a_u - a_l)/sqrt2, squares to 1."""
        phase_l = np.exp(0.5j * math.pi * ops.occupations[:, l])
        hop = ops.pair_hops[ops.pair_index.index((min(u, l), max(u, l)))]
        rot = expm_step(Operator(hop, space, space), math.pi / 4.0).matrix
        return (phase_l[:, None] * rot) * phase_l[None, :]

    mixer = balanced_mixer(0, 3) @ balanced_mixer(1, 2)
    kerr = np.exp(0.5j * spm_phase * ops.spm_diagonal)
    shift = np.exp(-0.5j * math.pi * (ops.occupations[:, 1] + ops.occupations[:, 3]))

    U = (mixer * kerr[None, :]) @ mixer * shift[None, :]
    return Propagator(U, space)


def decomposition_durations(target_infidelity: float = 1e-3) -> dict:
    """Duration accounting for the three ways to build a dual-rail Toffoli.

    Compares the directly synthesized six-mode gate (duration 2.0 at the
    library defaults) against the two circuit factorizations: six two-qubit
    CZ gates, or three qubit-qutrit CZ gates.  Per-gate figures use the
    analytic bound at `target_infidelity` and the optimized durations
    reachable at the library's default task settings.  The qubit-qutrit
    route is often quoted with a nominal bound of 2.32; that number matches
    neither three bound-durations at this infidelity (2.26) nor the
    zero-infidelity limit 3 pi/4 = 2.36, so both computed values are
    reported alongside it and the mismatch is flagged.
    """
    per_gate_bound = cz_min_duration(target_infidelity)
    direct = 2.0
    qq_opt = 6 * 0.773
    qt_opt = 3 * 0.89
    return {
        "direct": {"gates": 1, "optimized_total": direct},
        "qubit_qubit_cz": {
            "gates": 6,
            "per_gate_bound": per_gate_bound,
            "bound_total": 6 * per_gate_bound,
            "optimized_per_gate": 0.773,
            "optimized_total": qq_opt,
            "speedup_vs_direct": qq_opt / direct,
        },
        "qubit_qutrit_cz": {
            "gates": 3,
            "per_gate_bound": per_gate_bound,
            "bound_total": 3 * per_gate_bound,
            "zero_error_bound_total": 3 * math.pi / 4.0,
            "nominal_bound_total": 2.32,
            "bound_mismatch": True,
            "optimized_per_gate": 0.89,
            "optimized_total": qt_opt,
            "speedup_vs_direct": qt_opt / direct,
        },
    }
