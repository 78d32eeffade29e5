"""Infidelity, smoothness penalty, and the assembled training cost."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cavnet.controls import Bounds, ControlParams, GroupInit, InitSpec, TrainFlags, initialize, materialize
from cavnet.hilbert import CavityLayout, StateVector, build_space, ket
from cavnet.model import NonlinearKind
from cavnet.objective import (
    LOG_CLAMP,
    PenaltyWeights,
    cost,
    effective_bandwidth,
    infidelity,
    make_batch,
    mean_overlap,
    schedule_unitaries,
    smoothness_penalty,
    smoothness_penalty_gradient,
)
from cavnet.propagate import Propagator, evolve

BOUNDS = Bounds(tau_min=0.01, tau_max=0.03, kappa_max=12.0, delta_c_range=9.0, delta_e_range=6.0)


def penalty_by_hand(u, dt):
    """Independent loop-based evaluation of the jump-energy ratio."""
    u = [0.0, *u, 0.0]
    dt = [dt[0], *dt, dt[-1]]
    num = 0.0
    for p in range(1, len(u)):
        h = 0.5 * (dt[p] + dt[p - 1])
        num += (u[p] - u[p - 1]) ** 2 / h
    den = 1.0 + sum(ui * ui * ti for ui, ti in zip(u[1:-1], dt[1:-1]))
    return num / den


def test_penalty_single_unit_bin():
    # one bin at height 1 for unit time: two unit jumps over unit gaps
    assert smoothness_penalty(np.array([1.0]), np.array([1.0])) == pytest.approx(1.0, abs=1e-15)
    assert effective_bandwidth(np.array([1.0]), np.array([1.0])) == pytest.approx(
        np.sqrt(2.0), abs=1e-15
    )


def test_penalty_matches_reference_loop():
    rng = np.random.default_rng(10)
    for _ in range(20):
        P = rng.integers(1, 12)
        u = rng.normal(size=P)
        dt = rng.uniform(0.1, 2.0, size=P)
        assert smoothness_penalty(u, dt) == pytest.approx(penalty_by_hand(u, dt), rel=1e-12)


def test_penalty_constant_signal_only_pays_edges():
    # interior jumps vanish; only turn-on and turn-off contribute
    u = np.full(6, 2.0)
    dt = np.full(6, 0.5)
    num = 2 * (2.0**2 / 0.5)
    den = 1.0 + 6 * 2.0**2 * 0.5
    assert smoothness_penalty(u, dt) == pytest.approx(num / den, rel=1e-14)


def test_penalty_zero_signal():
    u = np.zeros(5)
    dt = np.full(5, 0.3)
    assert smoothness_penalty(u, dt) == 0.0
    with pytest.raises(ValueError):
        effective_bandwidth(u, dt)


def test_penalty_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    h = 1e-6
    for _ in range(10):
        P = rng.integers(1, 9)
        u = rng.normal(size=P)
        dt = rng.uniform(0.2, 1.5, size=P)
        du, ddt = smoothness_penalty_gradient(u, dt)
        for j in range(P):
            up, um = u.copy(), u.copy()
            up[j] += h
            um[j] -= h
            fd = (smoothness_penalty(up, dt) - smoothness_penalty(um, dt)) / (2 * h)
            assert fd == pytest.approx(du[j], rel=1e-5, abs=1e-9)
            tp, tm = dt.copy(), dt.copy()
            tp[j] += h
            tm[j] -= h
            fd = (smoothness_penalty(u, tp) - smoothness_penalty(u, tm)) / (2 * h)
            assert fd == pytest.approx(ddt[j], rel=1e-5, abs=1e-9)


@given(st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_penalty_non_negative(P, seed):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=P)
    dt = rng.uniform(0.05, 3.0, size=P)
    assert smoothness_penalty(u, dt) >= 0.0


# ----------------------------------------------------------------------
# batches and overlaps


def two_mode_single_photon():
    layout = CavityLayout(num_modes=2, per_mode_cutoff=2)
    return build_space(layout, total_excitation=1)


def test_make_batch_groups_by_sector():
    space1 = two_mode_single_photon()
    layout = space1.layout
    space2 = build_space(layout, total_excitation=2)
    p1 = (ket(space1, (1, 0)), ket(space1, (0, 1)))
    p2 = (ket(space2, (2, 0)), ket(space2, (0, 2)))
    p3 = (ket(space1, (0, 1)), ket(space1, (1, 0)))
    batch = make_batch([p1, p2, p3])
    assert batch.num_pairs == 3
    assert batch.spaces == (space1, space2)
    assert batch.groups[0].inputs.shape == (space1.dim, 2)
    assert batch.groups[1].inputs.shape == (space2.dim, 1)


def test_make_batch_rejects_cross_sector_pairs():
    space1 = two_mode_single_photon()
    space2 = build_space(space1.layout, total_excitation=2)
    with pytest.raises(ValueError):
        make_batch([(ket(space1, (1, 0)), ket(space2, (2, 0)))])


def test_make_batch_rejects_unnormalized_states():
    space = two_mode_single_photon()
    bad = StateVector(space, 0.5 * ket(space, (1, 0)).amplitudes)
    with pytest.raises(ValueError):
        make_batch([(bad, ket(space, (0, 1)))])
    with pytest.raises(ValueError):
        make_batch([])


def test_mean_overlap_accepts_propagator_list_or_matrix():
    space = two_mode_single_photon()
    batch = make_batch([(ket(space, (1, 0)), ket(space, (0, 1)))])
    U = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    prop = Propagator(U, space)
    a1 = mean_overlap(batch, prop)
    a2 = mean_overlap(batch, [prop])
    a3 = mean_overlap(batch, [U])
    assert a1 == a2 == a3
    # basis order is (0, 1), (1, 0); the swap sends (1, 0) to (0, 1)
    assert a1 == pytest.approx(1.0)


def test_mean_overlap_rejects_sector_mismatch():
    space = two_mode_single_photon()
    other = build_space(space.layout, total_excitation=2)
    batch = make_batch([(ket(space, (1, 0)), ket(space, (0, 1)))])
    wrong = Propagator(np.eye(other.dim, dtype=complex), other)
    with pytest.raises(ValueError):
        mean_overlap(batch, wrong)
    with pytest.raises(ValueError):
        mean_overlap(batch, [wrong, wrong])


def test_infidelity_global_phase_invariant():
    rng = np.random.default_rng(12)
    space = build_space(CavityLayout(num_modes=3, per_mode_cutoff=3), total_excitation=2)
    A = rng.normal(size=(space.dim, space.dim)) + 1j * rng.normal(size=(space.dim, space.dim))
    U, _ = np.linalg.qr(A)
    v = rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)
    v /= np.linalg.norm(v)
    src = StateVector(space, v)
    dst = StateVector(space, U @ v)
    batch = make_batch([(src, dst)])
    base = infidelity(batch, [U])
    for phi in (0.3, 1.7, -2.5):
        assert abs(infidelity(batch, [np.exp(1j * phi) * U]) - base) < 1e-14


def test_infidelity_coherent_vs_incoherent_average():
    # opposite-sign perfect transfers cancel coherently: the mean overlap
    # vanishes even though each pair is individually perfect
    space = two_mode_single_photon()
    plus = make_batch(
        [(ket(space, (1, 0)), ket(space, (1, 0))), (ket(space, (0, 1)), ket(space, (0, 1)))]
    )
    U = np.diag([1.0, -1.0]).astype(complex)
    assert infidelity(plus, [np.eye(2, dtype=complex)]) == pytest.approx(0.0, abs=1e-15)
    assert infidelity(plus, [U]) == pytest.approx(1.0, abs=1e-15)


# ----------------------------------------------------------------------
# assembled cost


def make_problem_pieces(kind=NonlinearKind.SPM, M=2, P=4, seed=0):
    emitters = M if kind is NonlinearKind.TLE else 0
    layout = CavityLayout(num_modes=M, num_emitters=emitters, per_mode_cutoff=3)
    space = build_space(layout, total_excitation=1)
    occ = lambda m: tuple(1 if i == m else 0 for i in range(M))
    if kind is NonlinearKind.TLE:
        zero_e = (0,) * M
        pairs = [(ket(space, occ(0), zero_e), ket(space, occ(1), zero_e))]
    else:
        pairs = [(ket(space, occ(0)), ket(space, occ(1)))]
    batch = make_batch(pairs)
    spec = InitSpec(
        x=GroupInit(0.0, 0.3),
        d_c=GroupInit(0.0, 0.5),
        d_e=GroupInit(0.0, 0.5),
        k=GroupInit(0.2, 0.4),
        c=GroupInit(0.0, 1.0),
    )
    params = initialize(spec, M, P, kind, seed=seed)
    return params, batch


def test_cost_breakdown_is_consistent():
    for kind in NonlinearKind:
        params, batch = make_problem_pieces(kind=kind, seed=3)
        weights = PenaltyWeights(kappa=0.02, delta_c=0.01, delta_e=0.005 if kind is NonlinearKind.TLE else 0.0)
        bd = cost(params, BOUNDS, batch, kind, weights)
        sched = materialize(params, BOUNDS)
        M = params.num_modes
        expected = {
            "kappa": np.mean([smoothness_penalty(sched.kappa[m], sched.dt) for m in range(M)]),
            "delta_c": np.mean([smoothness_penalty(sched.delta_c[m], sched.dt) for m in range(M)]),
        }
        if kind is NonlinearKind.TLE:
            expected["delta_e"] = np.mean(
                [smoothness_penalty(sched.delta_e[m], sched.dt) for m in range(M)]
            )
        assert set(bd.penalties) == set(expected)
        for name, val in expected.items():
            assert bd.penalties[name] == pytest.approx(val, rel=1e-12)
        w = {"kappa": weights.kappa, "delta_c": weights.delta_c, "delta_e": weights.delta_e}
        total = bd.log_infidelity + sum(w[n] * bd.penalties[n] for n in bd.penalties)
        assert bd.total == pytest.approx(total, rel=1e-12)
        assert bd.log_infidelity == pytest.approx(np.log(bd.infidelity), rel=1e-12)
        assert not bd.clamped
        for name, bw in bd.bandwidths.items():
            assert bw.shape == (M,)


def test_cost_matches_direct_propagation():
    params, batch = make_problem_pieces(kind=NonlinearKind.SPM, seed=5)
    bd = cost(params, BOUNDS, batch, NonlinearKind.SPM)
    sched = materialize(params, BOUNDS)
    props = schedule_unitaries(sched, batch.spaces, NonlinearKind.SPM)
    assert bd.infidelity == pytest.approx(infidelity(batch, props), abs=1e-14)
    # and against the straight evolve-based propagator
    direct = evolve(batch.spaces[0], sched.coupling, sched.bins(), NonlinearKind.SPM)
    assert bd.infidelity == pytest.approx(infidelity(batch, direct), abs=1e-12)


def test_perfect_gate_hits_log_clamp():
    space = two_mode_single_photon()
    batch = make_batch([(ket(space, (1, 0)), ket(space, (1, 0)))])
    # identity already achieves the target: zero infidelity, clamped log
    params = ControlParams(
        x=np.zeros(1),
        d_c=np.zeros((2, 1)),
        d_e=None,
        k=np.full((2, 1), -1e8),  # kappa ~ 0
        c_upper=np.zeros(1),
    )
    bd = cost(params, BOUNDS, batch, NonlinearKind.SPM)
    assert bd.infidelity < 1e-12
    assert bd.clamped
    assert bd.log_infidelity == pytest.approx(np.log(LOG_CLAMP))


def test_delta_e_weight_rejected_for_kerr_network():
    params, batch = make_problem_pieces(kind=NonlinearKind.SPM)
    with pytest.raises(ValueError):
        cost(params, BOUNDS, batch, NonlinearKind.SPM, PenaltyWeights(delta_e=0.1))


def test_tle_cost_requires_emitter_parameters():
    params, batch = make_problem_pieces(kind=NonlinearKind.TLE)
    stripped = ControlParams(
        x=params.x, d_c=params.d_c, d_e=None, k=params.k, c_upper=params.c_upper
    )
    with pytest.raises(ValueError):
        cost(stripped, BOUNDS, batch, NonlinearKind.TLE)


def test_schedule_unitaries_are_unitary():
    params, batch = make_problem_pieces(kind=NonlinearKind.TLE, P=8, seed=9)
    sched = materialize(params, BOUNDS)
    props = schedule_unitaries(sched, batch.spaces, NonlinearKind.TLE)
    assert len(props) == len(batch.spaces)
    for prop, space in zip(props, batch.spaces):
        assert prop.space is space
        assert prop.unitarity_defect() < 1e-13
