"""Squashing maps, parameter flattening, and seeded initialization."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cavnet.controls import (
    Bounds,
    ControlParams,
    GroupInit,
    InitSpec,
    TrainFlags,
    coupling_matrix,
    initialize,
    materialize,
)
from cavnet.model import NonlinearKind

BOUNDS = Bounds(tau_min=0.01, tau_max=0.03, kappa_max=12.0, delta_c_range=9.0, delta_e_range=6.0)


def make_params(rng, M=3, P=5, kind=NonlinearKind.SPM, trainable=TrainFlags()):
    return initialize(
        InitSpec(
            x=GroupInit(0.0, 1.0),
            d_c=GroupInit(0.0, 1.0),
            d_e=GroupInit(0.0, 1.0),
            k=GroupInit(0.0, 1.0),
            c=GroupInit(0.0, 1.0),
        ),
        M,
        P,
        kind,
        trainable,
        rng=rng,
    )


def test_duration_squash_saturates_at_bounds():
    M, P = 2, 4
    params = ControlParams(
        x=np.array([-40.0, 0.0, 40.0, 40.0]),
        d_c=np.zeros((M, P)),
        d_e=None,
        k=np.zeros((M, P)),
        c_upper=np.zeros(1),
    )
    sched = materialize(params, BOUNDS)
    assert sched.dt[0] == pytest.approx(BOUNDS.tau_min, abs=1e-15)
    assert sched.dt[1] == pytest.approx(0.5 * (BOUNDS.tau_min + BOUNDS.tau_max))
    assert sched.dt[2] == pytest.approx(BOUNDS.tau_max, abs=1e-15)


def test_physical_signals_respect_bounds():
    rng = np.random.default_rng(0)
    for kind in NonlinearKind:
        params = make_params(rng, kind=kind)
        # exercise the extreme raw values too
        params = params.from_flat(params.to_flat() * 50.0)
        sched = materialize(params, BOUNDS)
        assert np.all(sched.dt >= BOUNDS.tau_min - 1e-15)
        assert np.all(sched.dt <= BOUNDS.tau_max + 1e-15)
        assert np.all(sched.kappa >= 0.0)
        assert np.all(sched.kappa <= BOUNDS.kappa_max + 1e-12)
        assert np.all(np.abs(sched.delta_c) <= 0.5 * BOUNDS.delta_c_range + 1e-12)
        if kind is NonlinearKind.TLE:
            assert np.all(np.abs(sched.delta_e) <= 0.5 * BOUNDS.delta_e_range + 1e-12)
        else:
            assert sched.delta_e is None


def test_pinned_duration_is_exact():
    bounds = Bounds(tau_min=0.025, tau_max=0.025, kappa_max=5.0, delta_c_range=5.0)
    params = ControlParams(
        x=np.linspace(-3, 3, 80),
        d_c=np.zeros((2, 80)),
        d_e=None,
        k=np.zeros((2, 80)),
        c_upper=np.zeros(1),
    )
    sched = materialize(params, bounds)
    assert np.all(sched.dt == 0.025)
    assert sched.duration == pytest.approx(2.0, abs=1e-12)
    assert np.all(sched.ddt_dx == 0.0)


def test_renormalized_amplitudes_scale_with_duration():
    # physical kappa = kappa_ren / dt: halving dt doubles the rate
    params = ControlParams(
        x=np.array([0.0]),
        d_c=np.zeros((2, 1)),
        d_e=None,
        k=np.full((2, 1), 0.3),
        c_upper=np.zeros(1),
    )
    tight = Bounds(tau_min=0.01, tau_max=0.01, kappa_max=12.0, delta_c_range=9.0)
    loose = Bounds(tau_min=0.02, tau_max=0.02, kappa_max=12.0, delta_c_range=9.0)
    k_tight = materialize(params, tight).kappa
    k_loose = materialize(params, loose).kappa
    assert np.allclose(k_tight, k_loose)  # same fraction of kappa_max either way
    assert np.allclose(
        materialize(params, tight).kappa_ren * 2.0, materialize(params, loose).kappa_ren
    )


def test_squash_slopes_match_finite_differences():
    rng = np.random.default_rng(1)
    params = make_params(rng, M=2, P=6, kind=NonlinearKind.TLE)
    h = 1e-6

    def schedules(p):
        return materialize(p, BOUNDS)

    base = schedules(params)
    flat = params.to_flat()
    # duration slope against x
    for j in range(3):
        fp, fm = flat.copy(), flat.copy()
        fp[j] += h
        fm[j] -= h
        fd = (schedules(params.from_flat(fp)).dt[j] - schedules(params.from_flat(fm)).dt[j]) / (2 * h)
        assert fd == pytest.approx(base.ddt_dx[j], rel=1e-6)
    # renormalized kappa slope against k, entry (m, p) = (1, 2)
    j = 6 + 12 + 12 + 1 * 6 + 2  # x, d_c, d_e blocks then k row-major
    fp, fm = flat.copy(), flat.copy()
    fp[j] += h
    fm[j] -= h
    fd = (
        schedules(params.from_flat(fp)).kappa_ren[1, 2]
        - schedules(params.from_flat(fm)).kappa_ren[1, 2]
    ) / (2 * h)
    assert fd == pytest.approx(base.dkappa_ren[1, 2], rel=1e-6)


def test_flat_round_trip():
    rng = np.random.default_rng(2)
    for kind in NonlinearKind:
        params = make_params(rng, M=3, P=4, kind=kind)
        flat = params.to_flat()
        back = params.from_flat(flat)
        assert np.array_equal(back.x, params.x)
        assert np.array_equal(back.d_c, params.d_c)
        assert np.array_equal(back.k, params.k)
        assert np.array_equal(back.c_upper, params.c_upper)
        if kind is NonlinearKind.TLE:
            assert np.array_equal(back.d_e, params.d_e)
        with pytest.raises(ValueError):
            params.from_flat(flat[:-1])


@given(m=st.integers(2, 5), p=st.integers(1, 7), tle=st.booleans())
def test_flat_length_and_mask(m, p, tle):
    rng = np.random.default_rng(m * 100 + p)
    kind = NonlinearKind.TLE if tle else NonlinearKind.SPM
    trainable = TrainFlags(x=False, c=False)
    params = make_params(rng, M=m, P=p, kind=kind, trainable=trainable)
    flat = params.to_flat()
    expected = p + (2 + int(tle)) * m * p + m * (m - 1) // 2
    assert flat.shape == (expected,)
    mask = params.trainable_mask()
    assert mask.shape == flat.shape
    assert not mask[:p].any()  # x frozen
    assert not mask[-(m * (m - 1) // 2):].any()  # c frozen
    assert mask[p : p + m * p].all()  # d_c trainable


def test_initialization_stream_is_stable_across_settings():
    # noise scales the draw, so changing offsets or noise levels must not
    # shift which underlying normals each group consumes
    spec_a = InitSpec(x=GroupInit(0.0, 1.0), d_c=GroupInit(0.0, 1.0), k=GroupInit(0.0, 1.0), c=GroupInit(0.0, 1.0))
    spec_b = InitSpec(x=GroupInit(5.0, 2.0), d_c=GroupInit(-1.0, 1.0), k=GroupInit(0.0, 1.0), c=GroupInit(0.0, 1.0))
    pa = initialize(spec_a, 3, 4, NonlinearKind.SPM, seed=9)
    pb = initialize(spec_b, 3, 4, NonlinearKind.SPM, seed=9)
    assert np.allclose(pb.x, 5.0 + 2.0 * pa.x)
    assert np.allclose(pb.d_c, -1.0 + pa.d_c)
    assert np.array_equal(pb.k, pa.k)
    assert np.array_equal(pb.c_upper, pa.c_upper)


def test_initialization_seed_reproducible():
    spec = InitSpec(x=GroupInit(0.0, 0.1), d_c=GroupInit(0.0, 0.1), k=GroupInit(0.0, 0.1), c=GroupInit(0.0, 1.0))
    a = initialize(spec, 4, 50, NonlinearKind.SPM, seed=3)
    b = initialize(spec, 4, 50, NonlinearKind.SPM, seed=3)
    c = initialize(spec, 4, 50, NonlinearKind.SPM, seed=4)
    assert np.array_equal(a.to_flat(), b.to_flat())
    assert not np.array_equal(a.to_flat(), c.to_flat())


def test_fixed_coupling_overrides_draw():
    C = np.array([[0.0, 1.0, -0.5], [1.0, 0.0, 2.0], [-0.5, 2.0, 0.0]])
    spec = InitSpec(c=GroupInit(0.0, 1.0))
    params = initialize(spec, 3, 2, NonlinearKind.SPM, fixed_coupling=C, seed=0)
    assert np.array_equal(params.c_upper, np.array([1.0, -0.5, 2.0]))
    assert np.array_equal(coupling_matrix(params.c_upper, 3), C)


def test_coupling_matrix_shape():
    c_upper = np.array([1.0, 2.0, 3.0])
    C = coupling_matrix(c_upper, 3)
    assert np.array_equal(C, C.T)
    assert np.all(np.diag(C) == 0.0)
    assert C[0, 1] == 1.0 and C[0, 2] == 2.0 and C[1, 2] == 3.0


def test_bounds_validation():
    with pytest.raises(ValueError):
        Bounds(tau_min=0.0, tau_max=1.0, kappa_max=1.0, delta_c_range=1.0)
    with pytest.raises(ValueError):
        Bounds(tau_min=0.2, tau_max=0.1, kappa_max=1.0, delta_c_range=1.0)
    with pytest.raises(ValueError):
        Bounds(tau_min=0.1, tau_max=0.2, kappa_max=-1.0, delta_c_range=1.0)


def test_schedule_bins_match_arrays():
    rng = np.random.default_rng(5)
    params = make_params(rng, M=2, P=3, kind=NonlinearKind.TLE)
    sched = materialize(params, BOUNDS)
    bins = sched.bins()
    assert len(bins) == 3
    for p, b in enumerate(bins):
        assert b.dt == sched.dt[p]
        assert np.array_equal(b.kappa, sched.kappa[:, p])
        assert np.array_equal(b.delta_c, sched.delta_c[:, p])
        assert np.array_equal(b.delta_e, sched.delta_e[:, p])
