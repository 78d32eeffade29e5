"""Gate infidelity, smoothness penalties, and their exact gradients.

The figure of merit for a synthesized operation is the coherently averaged
overlap between propagated inputs and targets,

    I = 1 - | (1/N) sum_n <target_n | U | input_n> |^2,

which forgives one global phase and penalizes relative phases.  The training
cost adds bandwidth penalties on the physical control signals:

    E = ln I + sum_u w_u (1/M) sum_m penalty(u_m),

with I clamped below at 1e-16 so the logarithm stays finite on exact
solutions.

Gradients are computed analytically.  Writing each bin in renormalized form
h_p = H_p dt_p, the propagator U_p = exp(-i h_p) is differentiated through
its eigenbasis: for a direction D,

    dU = V (F o (V^T D V)) V^T,   F_ij = (e^{-i l_i} - e^{-i l_j}) / (l_i - l_j),

evaluated in the cancellation-free form F_ij = -i e^{-i(l_i+l_j)/2}
sinc((l_i-l_j)/2) which is exact through the degenerate limit.  Summing the
pair overlaps first reduces the whole bin to one matrix

    W_p = V (F o G) V^T,    G = (A*/N) sum_n conj(V^T phi_n) (V^T psi_n)^T,

after which every parameter of the bin costs one sparse trace tr(D W_p).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .controls import Bounds, ControlParams, ControlSchedule, materialize
from .hilbert import HilbertSpace, StateVector, sector_operators
from .model import NonlinearKind
from . import propagate
from .propagate import Propagator

LOG_CLAMP = 1e-16
NORMALIZATION_TOL = 1e-10


@dataclass(frozen=True)
class SectorGroup:
    """All task pairs living in one excitation sector, stacked as columns."""

    space: HilbertSpace
    inputs: np.ndarray
    targets: np.ndarray


@dataclass(frozen=True)
class TaskBatch:
    """Input/target pairs of one synthesis task, grouped by sector."""

    groups: tuple[SectorGroup, ...]

    @property
    def num_pairs(self) -> int:
        return sum(g.inputs.shape[1] for g in self.groups)

    @property
    def spaces(self) -> tuple[HilbertSpace, ...]:
        return tuple(g.space for g in self.groups)


def make_batch(pairs: list[tuple[StateVector, StateVector]]) -> TaskBatch:
    """Group (input, target) state pairs by sector, preserving order."""
    if not pairs:
        raise ValueError("a task needs at least one state pair")
    by_space: dict[int, list] = {}
    order: list[HilbertSpace] = []
    for src, dst in pairs:
        if dst.space is not src.space:
            raise ValueError("input and target of a pair must share a sector")
        for s in (src, dst):
            if abs(s.norm() - 1.0) > NORMALIZATION_TOL:
                raise ValueError(f"task states must be normalized (norm {s.norm()})")
        key = id(src.space)
        if key not in by_space:
            by_space[key] = []
            order.append(src.space)
        by_space[key].append((src.amplitudes, dst.amplitudes))
    groups = []
    for space in order:
        cols = by_space[id(space)]
        inputs = np.stack([c[0] for c in cols], axis=1)
        targets = np.stack([c[1] for c in cols], axis=1)
        groups.append(SectorGroup(space, inputs, targets))
    return TaskBatch(tuple(groups))


@dataclass(frozen=True)
class PenaltyWeights:
    """Weights of the bandwidth penalties on each physical signal."""

    kappa: float = 0.0
    delta_c: float = 0.0
    delta_e: float = 0.0


@dataclass(frozen=True)
class CostBreakdown:
    """One cost evaluation, split into its reported pieces.

    Attributes:
        infidelity: Eq. figure of merit I, clipped into [0, 1].
        log_infidelity: ln of the clamped I.
        penalties: per-signal mode-averaged smoothness penalties (unweighted).
        total: training cost E.
        bandwidths: per-signal arrays of per-mode effective bandwidths
            (NaN for identically zero signals).
        clamped: True when I fell below the logarithm clamp.
    """

    infidelity: float
    log_infidelity: float
    penalties: dict[str, float]
    total: float
    bandwidths: dict[str, np.ndarray] = field(repr=False)
    clamped: bool = False


def mean_overlap(batch: TaskBatch, propagators) -> complex:
    """Coherent average (1/N) sum_n <target_n|U|input_n> over the batch."""
    if isinstance(propagators, Propagator):
        propagators = [propagators]
    if len(propagators) != len(batch.groups):
        raise ValueError("need one propagator per sector group")
    total = 0.0 + 0.0j
    for grp, prop in zip(batch.groups, propagators):
        U = prop.matrix if isinstance(prop, Propagator) else np.asarray(prop)
        if isinstance(prop, Propagator) and prop.space is not grp.space:
            raise ValueError("propagator sector does not match batch group")
        total += np.sum(np.conj(grp.targets) * (U @ grp.inputs))
    return complex(total / batch.num_pairs)


def infidelity(batch: TaskBatch, propagators) -> float:
    """Coherently averaged gate infidelity of a (list of) propagator(s)."""
    A = mean_overlap(batch, propagators)
    return max(0.0, 1.0 - abs(A) ** 2)


# ----------------------------------------------------------------------
# smoothness penalty of one piecewise-constant signal


def _padded_diffs(u: np.ndarray, dt: np.ndarray):
    """Bin-to-bin jumps of a signal that starts and ends at zero.

    Returns (d, h): the P + 1 jumps, including the turn-on and turn-off
    edges, and the average durations 0.5 (dt_p + dt_{p-1}) weighting them,
    with the boundary bins extended outward (dt_0 := dt_1, dt_{P+1} := dt_P).
    """
    u_pad = np.concatenate(([0.0], u, [0.0]))
    dt_pad = np.concatenate(([dt[0]], dt, [dt[-1]]))
    d = np.diff(u_pad)
    h = 0.5 * (dt_pad[1:] + dt_pad[:-1])
    return d, h


def smoothness_penalty(u: np.ndarray, dt: np.ndarray) -> float:
    """Discrete |du/dt|^2 integral over a regularized signal energy.

    penalty = sum_p |u_p - u_{p-1}|^2 / (0.5 (dt_p + dt_{p-1}))
              / (1 + sum_p |u_p|^2 dt_p)

    The +1 keeps the penalty defined for signals that vanish identically.
    """
    u = np.asarray(u, dtype=float)
    dt = np.asarray(dt, dtype=float)
    d, h = _padded_diffs(u, dt)
    num = float(np.sum(d * d / h))
    den = 1.0 + float(np.sum(u * u * dt))
    return num / den


def smoothness_penalty_gradient(u: np.ndarray, dt: np.ndarray):
    """Exact (d penalty / d u, d penalty / d dt) for one signal row."""
    u = np.asarray(u, dtype=float)
    dt = np.asarray(dt, dtype=float)
    P = len(u)
    d, h = _padded_diffs(u, dt)
    num = float(np.sum(d * d / h))
    den = 1.0 + float(np.sum(u * u * dt))

    r = 2.0 * d / h
    dnum_du = r[:-1] - r[1:]
    dden_du = 2.0 * u * dt

    # Each edge term p = 1 .. P+1 depends on the (aliased) bins around it.
    coef = -0.5 * d * d / (h * h)
    pad_map = np.concatenate(([0], np.arange(P), [P - 1]))
    dnum_ddt = np.zeros(P)
    np.add.at(dnum_ddt, pad_map[1:], coef)
    np.add.at(dnum_ddt, pad_map[:-1], coef)
    dden_ddt = u * u

    du = (dnum_du * den - num * dden_du) / den**2
    ddt = (dnum_ddt * den - num * dden_ddt) / den**2
    return du, ddt


def effective_bandwidth(u: np.ndarray, dt: np.ndarray) -> float:
    """Root ratio of the jump integral to the (unregularized) signal energy."""
    u = np.asarray(u, dtype=float)
    dt = np.asarray(dt, dtype=float)
    energy = float(np.sum(u * u * dt))
    if energy == 0.0:
        raise ValueError("bandwidth of an identically zero signal is undefined")
    d, h = _padded_diffs(u, dt)
    return float(np.sqrt(np.sum(d * d / h) / energy))


# ----------------------------------------------------------------------
# batched per-sector spectral machinery


@dataclass(frozen=True)
class _SectorSpectra:
    """Eigensystem of every renormalized bin Hamiltonian in one sector."""

    ops: object
    lam: np.ndarray  # (P, d) eigenvalues
    V: np.ndarray  # (P, d, d) real orthogonal eigenvectors
    U: np.ndarray  # (P, d, d) bin propagators exp(-i h_p)
    sqrtkk: np.ndarray  # (Q, P) sqrt(kren_n kren_m) per mode pair
    energies: np.ndarray  # (Q, P) C_nm sqrt(kren_n kren_m)


def _spectra(schedule: ControlSchedule, space: HilbertSpace, kind: NonlinearKind) -> _SectorSpectra:
    ops = sector_operators(space)
    dt = schedule.dt
    P, d = len(dt), space.dim

    diag = (ops.occupations @ schedule.delta_c_ren).T  # (P, d)
    if kind is NonlinearKind.SPM:
        diag = diag - dt[:, None] * ops.spm_diagonal[None, :]
    else:
        if schedule.delta_e_ren is None:
            raise ValueError("TLE network needs emitter detuning parameters")
        diag = diag + (ops.emitter_bits @ schedule.delta_e_ren).T

    kren = schedule.kappa_ren
    pairs = ops.pair_index
    if pairs:
        qn = np.array([n for n, _ in pairs])
        qm = np.array([m for _, m in pairs])
        sqrtkk = np.sqrt(kren[qn, :] * kren[qm, :])
        cvals = schedule.coupling[qn, qm]
        energies = cvals[:, None] * sqrtkk
    else:
        sqrtkk = np.zeros((0, P))
        energies = np.zeros((0, P))

    H = np.zeros((P, d, d))
    idx = np.arange(d)
    H[:, idx, idx] = diag
    if len(pairs):
        H += np.tensordot(energies.T, ops.pair_hops, axes=([1], [0]))
    if kind is NonlinearKind.TLE:
        H += dt[:, None, None] * ops.jc_matrix

    lam, V = np.linalg.eigh(H)
    phases = (1.0 + propagate._EXPM_PERTURBATION) * np.exp(-1j * lam)
    U = (V * phases[:, None, :]) @ V.transpose(0, 2, 1)
    return _SectorSpectra(ops, lam, V, U, sqrtkk, energies)


def schedule_unitaries(
    schedule: ControlSchedule, spaces, kind: NonlinearKind
) -> list[Propagator]:
    """Composed schedule propagator on each requested sector."""
    out = []
    for space in spaces:
        spec = _spectra(schedule, space, kind)
        U = np.eye(space.dim, dtype=complex)
        for p in range(len(schedule.dt)):
            U = spec.U[p] @ U
        out.append(Propagator(U, space))
    return out


def _divided_difference_kernel(lam: np.ndarray) -> np.ndarray:
    """F_ij for f(x) = exp(-i x), exact through degenerate eigenvalues."""
    mu = 0.5 * (lam[:, :, None] + lam[:, None, :])
    delta = lam[:, :, None] - lam[:, None, :]
    return -1j * np.exp(-1j * mu) * np.sinc(delta / (2.0 * np.pi))


# ----------------------------------------------------------------------
# cost and gradient


def _signal_specs(schedule: ControlSchedule, weights: PenaltyWeights, kind: NonlinearKind):
    """(name, weight, physical signal, renormalized, slope) per penalized signal."""
    specs = [
        ("kappa", weights.kappa, schedule.kappa, schedule.kappa_ren, schedule.dkappa_ren),
        ("delta_c", weights.delta_c, schedule.delta_c, schedule.delta_c_ren, schedule.ddelta_c_ren),
    ]
    if kind is NonlinearKind.TLE:
        specs.append(
            ("delta_e", weights.delta_e, schedule.delta_e, schedule.delta_e_ren, schedule.ddelta_e_ren)
        )
    elif weights.delta_e != 0.0:
        raise ValueError("delta_e penalty weight is meaningless for a Kerr network")
    return specs


def cost(
    params: ControlParams,
    bounds: Bounds,
    batch: TaskBatch,
    kind: NonlinearKind,
    weights: PenaltyWeights = PenaltyWeights(),
) -> CostBreakdown:
    """Training cost E = ln I + weighted smoothness penalties."""
    breakdown, _ = _evaluate(params, bounds, batch, kind, weights, want_grad=False)
    return breakdown


def cost_and_gradient(
    params: ControlParams,
    bounds: Bounds,
    batch: TaskBatch,
    kind: NonlinearKind,
    weights: PenaltyWeights = PenaltyWeights(),
):
    """Cost breakdown plus its exact gradient over the flat raw parameters.

    Frozen parameter groups receive exactly zero entries, so the returned
    vector can be fed to the optimizer unmasked.
    """
    return _evaluate(params, bounds, batch, kind, weights, want_grad=True)


def gradient(
    params: ControlParams,
    bounds: Bounds,
    batch: TaskBatch,
    kind: NonlinearKind,
    weights: PenaltyWeights = PenaltyWeights(),
) -> np.ndarray:
    return cost_and_gradient(params, bounds, batch, kind, weights)[1]


def _evaluate(params, bounds, batch, kind, weights, want_grad):
    if kind is NonlinearKind.TLE and params.d_e is None:
        raise ValueError("TLE network needs d_e parameters")
    schedule = materialize(params, bounds)
    M, P = params.num_modes, params.num_bins
    dt = schedule.dt
    N_task = batch.num_pairs

    sectors = []
    overlaps = []
    for grp in batch.groups:
        if grp.space.layout.num_modes != M:
            raise ValueError("task sector does not match the parameter mode count")
        spec = _spectra(schedule, grp.space, kind)
        fwd = np.empty((P + 1, grp.space.dim, grp.inputs.shape[1]), dtype=complex)
        fwd[0] = grp.inputs
        for p in range(P):
            fwd[p + 1] = spec.U[p] @ fwd[p]
        overlaps.append(np.sum(np.conj(grp.targets) * fwd[P], axis=0))
        sectors.append((grp, spec, fwd))

    A = complex(np.sum(np.concatenate(overlaps)) / N_task)
    infid = max(0.0, 1.0 - abs(A) ** 2)
    clamped = infid < LOG_CLAMP
    log_infid = float(np.log(max(infid, LOG_CLAMP)))

    penalties = {}
    bandwidths = {}
    total = log_infid
    sig_specs = _signal_specs(schedule, weights, kind)
    for name, w, u_phys, _, _ in sig_specs:
        vals = np.array([smoothness_penalty(u_phys[m], dt) for m in range(M)])
        penalties[name] = float(np.mean(vals))
        bw = np.full(M, np.nan)
        for m in range(M):
            energy = float(np.sum(u_phys[m] ** 2 * dt))
            if energy > 0.0:
                bw[m] = effective_bandwidth(u_phys[m], dt)
        bandwidths[name] = bw
        total += w * penalties[name]

    breakdown = CostBreakdown(
        infidelity=infid,
        log_infidelity=log_infid,
        penalties=penalties,
        total=float(total),
        bandwidths=bandwidths,
        clamped=clamped,
    )
    if not want_grad:
        return breakdown, None

    # --- dI / d(renormalized amplitudes), accumulated over sectors -------
    g_dc_ren = np.zeros((M, P))
    g_de_ren = np.zeros((M, P)) if kind is NonlinearKind.TLE else None
    g_k_ren = np.zeros((M, P))
    g_c = np.zeros(len(params.c_upper))
    g_dt = np.zeros(P)

    pair_weight = np.conj(A) / N_task
    for grp, spec, fwd in sectors:
        ops = spec.ops
        VT = spec.V.transpose(0, 2, 1)

        bwd = np.empty_like(fwd[:-1])
        bwd[P - 1] = grp.targets
        for p in range(P - 2, -1, -1):
            bwd[p] = spec.U[p + 1].conj().T @ bwd[p + 1]

        beta = VT @ bwd  # (P, d, n) eigenbasis backward states
        zeta = VT @ fwd[:-1]  # (P, d, n) eigenbasis forward states
        G = pair_weight * np.einsum("pin,pjn->pij", np.conj(beta), zeta)
        K = _divided_difference_kernel(spec.lam) * G
        W = spec.V @ K @ VT  # (P, d, d); dI/dtheta = -2 Re tr(D_theta W_p)

        diagW = np.einsum("paa->pa", W)
        g_dc_ren += -2.0 * np.real(np.einsum("pa,am->mp", diagW, ops.occupations))
        if kind is NonlinearKind.SPM:
            g_dt += 2.0 * np.real(diagW @ ops.spm_diagonal)
        else:
            g_de_ren += -2.0 * np.real(np.einsum("pa,am->mp", diagW, ops.emitter_bits))
            g_dt += -2.0 * np.real(np.einsum("ab,pba->p", ops.jc_matrix, W))

        if ops.pair_index:
            qn = np.array([n for n, _ in ops.pair_index])
            qm = np.array([m for _, m in ops.pair_index])
            trn = -2.0 * np.real(np.einsum("qab,pba->qp", ops.pair_hops, W))
            g_c += np.sum(spec.sqrtkk * trn, axis=1)
            tw = spec.energies * trn
            kren = schedule.kappa_ren
            with np.errstate(divide="ignore", invalid="ignore"):
                contrib_n = np.where(kren[qn, :] > 0.0, tw / (2.0 * kren[qn, :]), 0.0)
                contrib_m = np.where(kren[qm, :] > 0.0, tw / (2.0 * kren[qm, :]), 0.0)
            np.add.at(g_k_ren, qn, contrib_n)
            np.add.at(g_k_ren, qm, contrib_m)

    # --- chain to raw parameters ------------------------------------------
    dE_dI = 0.0 if clamped else 1.0 / infid
    grad_x = dE_dI * g_dt * schedule.ddt_dx
    grad_dc = dE_dI * g_dc_ren * schedule.ddelta_c_ren
    grad_de = None if g_de_ren is None else dE_dI * g_de_ren * schedule.ddelta_e_ren
    grad_k = dE_dI * g_k_ren * schedule.dkappa_ren
    grad_c = dE_dI * g_c

    # --- bandwidth penalty gradients ---------------------------------------
    for name, w, u_phys, u_ren, slope in sig_specs:
        if w == 0.0:
            continue
        dPdu = np.empty((M, P))
        dPddt = np.empty((M, P))
        for m in range(M):
            dPdu[m], dPddt[m] = smoothness_penalty_gradient(u_phys[m], dt)
        scale = w / M
        target = {"kappa": grad_k, "delta_c": grad_dc, "delta_e": grad_de}[name]
        target += scale * dPdu * (slope / dt)
        grad_x += scale * np.sum(dPddt + dPdu * (-u_ren / dt**2), axis=0) * schedule.ddt_dx

    parts = [grad_x, grad_dc.ravel()]
    if params.d_e is not None:
        parts.append(grad_de.ravel())
    parts += [grad_k.ravel(), grad_c]
    flat = np.concatenate(parts)
    flat[~params.trainable_mask()] = 0.0
    return breakdown, flat
