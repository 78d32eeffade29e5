"""Raw optimization parameters and their map to bounded physical controls.

The optimizer works on unconstrained reals; squashing maps enforce the
hardware bounds.  Durations use a logistic map into [tau_min, tau_max] and
the per-bin amplitudes use arctan maps.  Amplitudes are parameterized in
"renormalized" form, i.e. already multiplied by the bin duration:

    dt_p        = tau_min + (tau_max - tau_min) / (1 + exp(-x_p))
    (k dt)_mp   = tau_min * kappa_max * (arctan(k_mp)/pi + 1/2)
    (dc dt)_mp  = tau_min * delta_c_range * arctan(d_mp)/pi
    (de dt)_mp  = tau_min * delta_e_range * arctan(d_mp)/pi

Because dt_p >= tau_min, the physical rates (renormalized / dt_p) respect
kappa in [0, kappa_max], |dc| <= delta_c_range / 2, |de| <= delta_e_range / 2
for every value of the raw parameters.  The mode-mixing matrix is trained
directly through its upper triangle, unsquashed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import ControlBin, NonlinearKind


@dataclass(frozen=True)
class Bounds:
    """Hardware limits of the tunable network.

    Attributes:
        tau_min: shortest realizable bin duration (> 0).
        tau_max: longest bin duration (>= tau_min).
        kappa_max: largest coupling rate into the mixing circuit.
        delta_c_range: full cavity detuning range (physical values live in
            [-delta_c_range / 2, +delta_c_range / 2]).
        delta_e_range: full emitter detuning range (TLE networks).
    """

    tau_min: float
    tau_max: float
    kappa_max: float
    delta_c_range: float
    delta_e_range: float = 0.0

    def __post_init__(self):
        if self.tau_min <= 0:
            raise ValueError(f"tau_min must be positive, got {self.tau_min}")
        if self.tau_max < self.tau_min:
            raise ValueError("tau_max must be >= tau_min")
        if self.kappa_max < 0 or self.delta_c_range < 0 or self.delta_e_range < 0:
            raise ValueError("amplitude ranges must be non-negative")


@dataclass(frozen=True)
class TrainFlags:
    """Which parameter groups the optimizer may move; frozen groups keep
    their initial values and receive exactly zero gradient."""

    x: bool = True
    d_c: bool = True
    d_e: bool = True
    k: bool = True
    c: bool = True


@dataclass(frozen=True)
class ControlParams:
    """Raw (unconstrained) control parameters of one schedule.

    Attributes:
        x: (P,) duration parameters.
        d_c: (M, P) cavity detuning parameters.
        d_e: (M, P) emitter detuning parameters, None for Kerr networks.
        k: (M, P) coupling-rate parameters.
        c_upper: (M (M-1) / 2,) upper triangle of the mixing matrix, row-major.
        trainable: per-group freeze flags.
    """

    x: np.ndarray
    d_c: np.ndarray
    d_e: np.ndarray | None
    k: np.ndarray
    c_upper: np.ndarray
    trainable: TrainFlags = TrainFlags()

    def __post_init__(self):
        M, P = self.d_c.shape
        if self.x.shape != (P,) or self.k.shape != (M, P):
            raise ValueError("parameter group shapes disagree")
        if self.d_e is not None and self.d_e.shape != (M, P):
            raise ValueError("parameter group shapes disagree")
        if self.c_upper.shape != (M * (M - 1) // 2,):
            raise ValueError(f"c_upper must hold the {M}x{M} upper triangle")

    @property
    def num_modes(self) -> int:
        return self.d_c.shape[0]

    @property
    def num_bins(self) -> int:
        return self.d_c.shape[1]

    def group_sizes(self) -> list[tuple[str, int]]:
        M, P = self.d_c.shape
        sizes = [("x", P), ("d_c", M * P)]
        if self.d_e is not None:
            sizes.append(("d_e", M * P))
        sizes += [("k", M * P), ("c_upper", len(self.c_upper))]
        return sizes

    def to_flat(self) -> np.ndarray:
        """Concatenate groups in the fixed order x, d_c, d_e, k, c_upper."""
        parts = [self.x, self.d_c.ravel()]
        if self.d_e is not None:
            parts.append(self.d_e.ravel())
        parts += [self.k.ravel(), self.c_upper]
        return np.concatenate(parts)

    def from_flat(self, flat: np.ndarray) -> "ControlParams":
        """Rebuild a parameter set with the same shapes from a flat vector."""
        M, P = self.d_c.shape
        expected = sum(n for _, n in self.group_sizes())
        if flat.shape != (expected,):
            raise ValueError(f"flat vector must have length {expected}")
        pos = 0

        def take(n):
            nonlocal pos
            chunk = np.array(flat[pos : pos + n])
            pos += n
            return chunk

        x = take(P)
        d_c = take(M * P).reshape(M, P)
        d_e = take(M * P).reshape(M, P) if self.d_e is not None else None
        k = take(M * P).reshape(M, P)
        c_upper = take(M * (M - 1) // 2)
        return replace(self, x=x, d_c=d_c, d_e=d_e, k=k, c_upper=c_upper)

    def trainable_mask(self) -> np.ndarray:
        """Boolean mask over the flat vector, False on frozen groups."""
        t = self.trainable
        flags = {"x": t.x, "d_c": t.d_c, "d_e": t.d_e, "k": t.k, "c_upper": t.c}
        return np.concatenate(
            [np.full(n, flags[name], dtype=bool) for name, n in self.group_sizes()]
        )


def coupling_matrix(c_upper: np.ndarray, num_modes: int) -> np.ndarray:
    """Symmetric zero-diagonal mixing matrix from its upper triangle."""
    C = np.zeros((num_modes, num_modes))
    rows, cols = np.triu_indices(num_modes, k=1)
    C[rows, cols] = c_upper
    C[cols, rows] = c_upper
    return C


@dataclass(frozen=True)
class ControlSchedule:
    """Materialized schedule: bounded physical controls plus the pieces the
    gradient needs (renormalized amplitudes and squashing-map slopes)."""

    dt: np.ndarray
    kappa_ren: np.ndarray
    delta_c_ren: np.ndarray
    delta_e_ren: np.ndarray | None
    coupling: np.ndarray
    ddt_dx: np.ndarray
    dkappa_ren: np.ndarray
    ddelta_c_ren: np.ndarray
    ddelta_e_ren: np.ndarray | None

    @property
    def duration(self) -> float:
        return float(np.sum(self.dt))

    @property
    def kappa(self) -> np.ndarray:
        """Physical coupling rates, shape (M, P)."""
        return self.kappa_ren / self.dt

    @property
    def delta_c(self) -> np.ndarray:
        return self.delta_c_ren / self.dt

    @property
    def delta_e(self) -> np.ndarray | None:
        return None if self.delta_e_ren is None else self.delta_e_ren / self.dt

    def bins(self) -> list[ControlBin]:
        kappa, delta_c, delta_e = self.kappa, self.delta_c, self.delta_e
        return [
            ControlBin(
                kappa=kappa[:, p],
                delta_c=delta_c[:, p],
                delta_e=None if delta_e is None else delta_e[:, p],
                dt=float(self.dt[p]),
            )
            for p in range(len(self.dt))
        ]


def materialize(params: ControlParams, bounds: Bounds) -> ControlSchedule:
    """Squash raw parameters into a physical schedule within `bounds`."""
    span = bounds.tau_max - bounds.tau_min
    sig = 1.0 / (1.0 + np.exp(-params.x))
    dt = bounds.tau_min + span * sig
    ddt_dx = span * sig * (1.0 - sig)

    k_scale = bounds.tau_min * bounds.kappa_max
    kappa_ren = k_scale * (np.arctan(params.k) / np.pi + 0.5)
    dkappa_ren = k_scale / (np.pi * (1.0 + params.k**2))

    c_scale = bounds.tau_min * bounds.delta_c_range
    delta_c_ren = c_scale * np.arctan(params.d_c) / np.pi
    ddelta_c_ren = c_scale / (np.pi * (1.0 + params.d_c**2))

    delta_e_ren = ddelta_e_ren = None
    if params.d_e is not None:
        e_scale = bounds.tau_min * bounds.delta_e_range
        delta_e_ren = e_scale * np.arctan(params.d_e) / np.pi
        ddelta_e_ren = e_scale / (np.pi * (1.0 + params.d_e**2))

    return ControlSchedule(
        dt=dt,
        kappa_ren=kappa_ren,
        delta_c_ren=delta_c_ren,
        delta_e_ren=delta_e_ren,
        coupling=coupling_matrix(params.c_upper, params.num_modes),
        ddt_dx=ddt_dx,
        dkappa_ren=dkappa_ren,
        ddelta_c_ren=ddelta_c_ren,
        ddelta_e_ren=ddelta_e_ren,
    )


@dataclass(frozen=True)
class GroupInit:
    """Initialization of one parameter group: offset + noise * N(0, 1)."""

    offset: float = 0.0
    noise: float = 0.0


@dataclass(frozen=True)
class InitSpec:
    """Seeded random initialization of every parameter group.

    Draws come from a PCG64 generator in the fixed stream order
    x -> d_c -> d_e -> k -> c_upper (row-major within each group); for Kerr
    networks the d_e block is skipped.  Noise factors scale the draws, so
    two specs with equal shapes consume identical streams regardless of
    their offsets and noise levels.
    """

    x: GroupInit = GroupInit()
    d_c: GroupInit = GroupInit()
    d_e: GroupInit = GroupInit()
    k: GroupInit = GroupInit()
    c: GroupInit = GroupInit()


def initialize(
    spec: InitSpec,
    num_modes: int,
    num_bins: int,
    kind: NonlinearKind,
    trainable: TrainFlags = TrainFlags(),
    fixed_coupling: np.ndarray | None = None,
    seed: int = 0,
    rng: np.random.Generator | None = None,
) -> ControlParams:
    """Draw a raw parameter set for a fresh optimization restart.

    Args:
        fixed_coupling: if given, the upper triangle of this matrix replaces
            the random c_upper draw (used for hard-wired mixing circuits).
        seed: PCG64 seed; restart r of a run uses seed + r.
        rng: draw from this generator instead of a fresh PCG64(seed).
    """
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(seed))

    def draw(group: GroupInit, shape):
        return group.offset + group.noise * rng.standard_normal(shape)

    M, P = num_modes, num_bins
    x = draw(spec.x, P)
    d_c = draw(spec.d_c, (M, P))
    d_e = draw(spec.d_e, (M, P)) if kind is NonlinearKind.TLE else None
    k = draw(spec.k, (M, P))
    c_upper = draw(spec.c, M * (M - 1) // 2)
    if fixed_coupling is not None:
        C = np.asarray(fixed_coupling, dtype=float)
        rows, cols = np.triu_indices(M, k=1)
        c_upper = C[rows, cols].copy()
    return ControlParams(x=x, d_c=d_c, d_e=d_e, k=k, c_upper=c_upper, trainable=trainable)
