"""Analytic cost gradient against central finite differences.

The exact gradient runs through the eigenbasis divided-difference kernel, so
these checks stress random spectra (including near-degenerate ones), both
nonlinearity kinds, trainable and hard-wired mixing matrices, and every
penalty weight combination.
"""

import numpy as np
import pytest

from cavnet.controls import Bounds, GroupInit, InitSpec, TrainFlags, initialize
from cavnet.hilbert import CavityLayout, StateVector, build_space, ket
from cavnet.model import NonlinearKind
from cavnet.objective import PenaltyWeights, cost, cost_and_gradient, make_batch

BOUNDS = Bounds(tau_min=0.012, tau_max=0.05, kappa_max=15.0, delta_c_range=12.0, delta_e_range=8.0)
FD_STEP = 1e-6
REL_TOL = 1e-5
ABS_FLOOR = 1e-8


def random_instance(seed, kind, M, total, trainable=TrainFlags(), P=5, num_pairs=2):
    rng = np.random.default_rng(seed)
    emitters = M if kind is NonlinearKind.TLE else 0
    layout = CavityLayout(num_modes=M, num_emitters=emitters, per_mode_cutoff=4)
    space = build_space(layout, total_excitation=total)
    pairs = []
    for _ in range(num_pairs):
        v = rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)
        w = rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)
        pairs.append((v / np.linalg.norm(v), w / np.linalg.norm(w)))
    batch = make_batch([(StateVector(space, a), StateVector(space, b)) for a, b in pairs])
    spec = InitSpec(
        x=GroupInit(0.0, 0.6),
        d_c=GroupInit(0.0, 0.8),
        d_e=GroupInit(0.0, 0.8),
        k=GroupInit(0.0, 0.7),
        c=GroupInit(0.0, 1.0),
    )
    params = initialize(spec, M, P, kind, trainable, seed=seed)
    return params, batch


def check_instance(params, batch, kind, weights, rng, num_directions=8):
    bd, grad = cost_and_gradient(params, BOUNDS, batch, kind, weights)
    flat = params.to_flat()
    mask = params.trainable_mask()
    assert grad.shape == flat.shape
    # frozen groups carry exactly zero gradient
    assert np.all(grad[~mask] == 0.0)
    # components far below the gradient scale are FD-noise dominated, so the
    # relative error is floored at a small fraction of that scale
    scale = float(np.max(np.abs(grad[mask]))) if mask.any() else 0.0
    floor = max(ABS_FLOOR, 1e-3 * scale)
    idx = rng.choice(np.flatnonzero(mask), size=min(num_directions, mask.sum()), replace=False)
    for j in idx:
        fp, fm = flat.copy(), flat.copy()
        fp[j] += FD_STEP
        fm[j] -= FD_STEP
        cp = cost(params.from_flat(fp), BOUNDS, batch, kind, weights).total
        cm = cost(params.from_flat(fm), BOUNDS, batch, kind, weights).total
        fd = (cp - cm) / (2 * FD_STEP)
        err = abs(grad[j] - fd) / max(abs(fd), floor)
        assert err <= REL_TOL, f"param {j}: analytic {grad[j]:.3e} vs fd {fd:.3e} (rel {err:.2e})"
    return bd


CASES = [
    # (seed, kind, M, total excitation, trainable, weights)
    (0, NonlinearKind.SPM, 2, 1, TrainFlags(), PenaltyWeights()),
    (1, NonlinearKind.SPM, 2, 2, TrainFlags(), PenaltyWeights(kappa=0.05)),
    (2, NonlinearKind.SPM, 3, 2, TrainFlags(), PenaltyWeights(kappa=0.02, delta_c=0.01)),
    (3, NonlinearKind.SPM, 3, 3, TrainFlags(), PenaltyWeights()),
    (4, NonlinearKind.SPM, 4, 1, TrainFlags(), PenaltyWeights(delta_c=0.04)),
    (5, NonlinearKind.SPM, 4, 2, TrainFlags(c=False), PenaltyWeights()),
    (6, NonlinearKind.SPM, 2, 3, TrainFlags(x=False), PenaltyWeights(kappa=0.1)),
    (7, NonlinearKind.SPM, 3, 1, TrainFlags(x=False, c=False), PenaltyWeights(kappa=0.015, delta_c=0.006)),
    (8, NonlinearKind.SPM, 2, 2, TrainFlags(d_c=False), PenaltyWeights()),
    (9, NonlinearKind.SPM, 3, 2, TrainFlags(k=False), PenaltyWeights(delta_c=0.02)),
    (10, NonlinearKind.TLE, 2, 1, TrainFlags(), PenaltyWeights()),
    (11, NonlinearKind.TLE, 2, 2, TrainFlags(), PenaltyWeights(kappa=0.03)),
    (12, NonlinearKind.TLE, 3, 1, TrainFlags(), PenaltyWeights(delta_e=0.02)),
    (13, NonlinearKind.TLE, 3, 2, TrainFlags(), PenaltyWeights(kappa=0.01, delta_c=0.01, delta_e=0.01)),
    (14, NonlinearKind.TLE, 2, 3, TrainFlags(c=False), PenaltyWeights()),
    (15, NonlinearKind.TLE, 2, 2, TrainFlags(x=False), PenaltyWeights(delta_e=0.05)),
    (16, NonlinearKind.TLE, 3, 1, TrainFlags(d_e=False), PenaltyWeights()),
    (17, NonlinearKind.TLE, 2, 1, TrainFlags(x=False, c=False), PenaltyWeights(kappa=0.02, delta_e=0.003)),
    (18, NonlinearKind.SPM, 5, 1, TrainFlags(), PenaltyWeights()),
    (19, NonlinearKind.TLE, 2, 2, TrainFlags(k=False, d_c=False), PenaltyWeights(kappa=0.04)),
    (20, NonlinearKind.SPM, 3, 2, TrainFlags(), PenaltyWeights(kappa=0.2, delta_c=0.2)),
    (21, NonlinearKind.TLE, 3, 2, TrainFlags(x=False), PenaltyWeights()),
]


@pytest.mark.parametrize("seed,kind,M,total,trainable,weights", CASES)
def test_gradient_matches_finite_differences(seed, kind, M, total, trainable, weights):
    params, batch = random_instance(seed, kind, M, total, trainable)
    rng = np.random.default_rng(1000 + seed)
    check_instance(params, batch, kind, weights, rng)


def test_gradient_through_near_degenerate_spectrum():
    # pin all raw controls to zero: every bin Hamiltonian then has large
    # exactly-degenerate eigenspaces, exercising the divided-difference limit
    layout = CavityLayout(num_modes=3, per_mode_cutoff=3)
    space = build_space(layout, total_excitation=2)
    batch = make_batch([(ket(space, (2, 0, 0)), ket(space, (0, 0, 2)))])
    spec = InitSpec(c=GroupInit(0.0, 1.0))  # nonzero mixing, flat signals
    params = initialize(spec, 3, 4, NonlinearKind.SPM, seed=42)
    rng = np.random.default_rng(99)
    check_instance(params, batch, NonlinearKind.SPM, PenaltyWeights(kappa=0.01), rng)


def test_gradient_multi_sector_batch():
    layout = CavityLayout(num_modes=2, per_mode_cutoff=3)
    s1 = build_space(layout, total_excitation=1)
    s2 = build_space(layout, total_excitation=2)
    batch = make_batch(
        [
            (ket(s1, (1, 0)), ket(s1, (0, 1))),
            (ket(s2, (1, 1)), ket(s2, (2, 0))),
            (ket(s2, (0, 2)), ket(s2, (0, 2))),
        ]
    )
    spec = InitSpec(
        x=GroupInit(0.0, 0.4),
        d_c=GroupInit(0.0, 0.6),
        k=GroupInit(0.3, 0.5),
        c=GroupInit(0.0, 1.0),
    )
    params = initialize(spec, 2, 6, NonlinearKind.SPM, seed=17)
    rng = np.random.default_rng(18)
    check_instance(params, batch, NonlinearKind.SPM, PenaltyWeights(kappa=0.05, delta_c=0.02), rng)


def test_gradient_zero_when_everything_frozen():
    trainable = TrainFlags(x=False, d_c=False, d_e=False, k=False, c=False)
    params, batch = random_instance(30, NonlinearKind.SPM, 2, 1, trainable)
    _, grad = cost_and_gradient(params, BOUNDS, batch, NonlinearKind.SPM)
    assert np.all(grad == 0.0)
