"""Fixed-excitation Hilbert spaces for networks of cavities and emitters.

Every simulation in this package lives in a sector with a fixed total
excitation number (photons plus excited emitters).  The closed network
Hamiltonian commutes with that total, so sectors never mix and each one
can be represented by a small dense matrix block.

Basis states are ordered lexicographically by (occupations, emitter bits),
which fixes the matrix representation of every operator exactly and makes
runs reproducible across machines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np


class SectorError(ValueError):
    """Raised when a requested sector is empty or inconsistent with a layout."""


@dataclass(frozen=True)
class CavityLayout:
    """Static description of the network: cavity count, emitter count, cutoff.

    Attributes:
        num_modes: number of cavity modes M (>= 1).
        num_emitters: number of two-level emitters; either 0 or one per mode.
        per_mode_cutoff: maximum photon number representable in one mode.
            Must be at least the total excitation of any sector simulated,
            otherwise the sector basis would be silently truncated.
    """

    num_modes: int
    num_emitters: int = 0
    per_mode_cutoff: int = 8

    def __post_init__(self):
        if self.num_modes < 1:
            raise ValueError(f"need at least one mode, got {self.num_modes}")
        if self.num_emitters not in (0, self.num_modes):
            raise ValueError(
                "emitters must be absent or one per mode, got "
                f"{self.num_emitters} for {self.num_modes} modes"
            )
        if self.per_mode_cutoff < 1:
            raise ValueError(f"per_mode_cutoff must be positive, got {self.per_mode_cutoff}")


@dataclass(frozen=True)
class BasisState:
    """One Fock-space basis state: photon occupations plus emitter bits."""

    occupations: tuple[int, ...]
    emitters: tuple[int, ...] = ()

    @property
    def total_excitation(self) -> int:
        return sum(self.occupations) + sum(self.emitters)

    def label(self) -> str:
        occ = " ".join(str(n) for n in self.occupations)
        if self.emitters:
            return occ + " | " + " ".join(str(e) for e in self.emitters)
        return occ


@dataclass(frozen=True, eq=False)
class HilbertSpace:
    """A fixed-total-excitation sector of a cavity network.

    The basis is the list of all states with the given total, sorted
    lexicographically on (occupations, emitters).  Matrix representations
    of operators returned by this module follow that index order.
    """

    layout: CavityLayout
    total_excitation: int
    basis: tuple[BasisState, ...]
    index: dict[BasisState, int] = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def index_of(self, state: BasisState) -> int:
        try:
            return self.index[state]
        except KeyError:
            raise SectorError(f"state {state.label()!r} not in sector") from None

    def basis_lines(self) -> list[str]:
        """Text dump of basis states, one `n1 ... nM | e1 ... eM` line per index."""
        return [s.label() for s in self.basis]


def _compositions(total: int, slots: int, cap: int):
    """All occupation tuples of length `slots` summing to `total`, each <= cap."""
    if slots == 1:
        if total <= cap:
            yield (total,)
        return
    for head in range(min(total, cap) + 1):
        for rest in _compositions(total - head, slots - 1, cap):
            yield (head,) + rest


@lru_cache(maxsize=None)
def build_space(layout: CavityLayout, total_excitation: int) -> HilbertSpace:
    """Enumerate the sector with the given conserved total excitation.

    Raises:
        SectorError: if the sector has no basis states (cutoff too small to
            hold the requested excitation) or if the cutoff would truncate
            the sector for a multimode layout, which would break unitarity.
    """
    if total_excitation < 0:
        raise SectorError(f"total excitation must be >= 0, got {total_excitation}")
    min_photons = max(0, total_excitation - layout.num_emitters)
    if layout.num_modes * layout.per_mode_cutoff < min_photons:
        raise SectorError(
            f"sector {total_excitation} is empty at cutoff {layout.per_mode_cutoff}"
        )
    if layout.per_mode_cutoff < total_excitation and layout.num_modes > 1:
        # A single mode can in principle hold every photon in the sector;
        # a smaller cutoff silently deletes basis states and the dynamics
        # would leak amplitude.
        raise SectorError(
            f"per_mode_cutoff {layout.per_mode_cutoff} truncates sector "
            f"{total_excitation}; raise the cutoff to at least the sector total"
        )

    states = []
    bit_choices = list(product((0, 1), repeat=layout.num_emitters))
    for bits in bit_choices:
        photons = total_excitation - sum(bits)
        if photons < 0:
            continue
        for occ in _compositions(photons, layout.num_modes, layout.per_mode_cutoff):
            states.append(BasisState(occ, bits))
    states.sort(key=lambda s: (s.occupations, s.emitters))
    if not states:
        raise SectorError(
            f"sector {total_excitation} is empty at cutoff {layout.per_mode_cutoff}"
        )
    index = {s: i for i, s in enumerate(states)}
    return HilbertSpace(layout, total_excitation, tuple(states), index)


def sector_dimension(num_modes: int, total: int) -> int:
    """Dimension of an emitterless sector: photons over modes, stars and bars."""
    return math.comb(total + num_modes - 1, total)


@dataclass(frozen=True)
class StateVector:
    """Complex amplitudes over the basis of one sector."""

    space: HilbertSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.space.dim,):
            raise ValueError(f"amplitude shape {amps.shape} != ({self.space.dim},)")
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.space, self.amplitudes / n)

    def overlap(self, other: "StateVector") -> complex:
        if other.space is not self.space:
            raise SectorError("overlap between different sectors")
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class Operator:
    """Dense matrix mapping one sector to another (usually the same one)."""

    matrix: np.ndarray
    domain: HilbertSpace
    codomain: HilbertSpace

    def __matmul__(self, other):
        if isinstance(other, Operator):
            if other.codomain is not self.domain:
                raise SectorError("operator domains do not compose")
            return Operator(self.matrix @ other.matrix, other.domain, self.codomain)
        if isinstance(other, StateVector):
            if other.space is not self.domain:
                raise SectorError("operator applied outside its domain")
            return StateVector(self.codomain, self.matrix @ other.amplitudes)
        return NotImplemented

    def dagger(self) -> "Operator":
        return Operator(self.matrix.conj().T, self.codomain, self.domain)


def ket(space: HilbertSpace, occupations, emitters=()) -> StateVector:
    """Unit basis vector for the given occupations (and emitter bits)."""
    state = BasisState(tuple(int(n) for n in occupations), tuple(int(e) for e in emitters))
    if state.total_excitation != space.total_excitation:
        raise SectorError(
            f"state {state.label()!r} has total {state.total_excitation}, "
            f"sector holds {space.total_excitation}"
        )
    amps = np.zeros(space.dim, dtype=complex)
    amps[space.index_of(state)] = 1.0
    return StateVector(space, amps)


def annihilation(space: HilbertSpace, mode: int) -> Operator:
    """Photon annihilation on `mode`, mapping sector N to sector N - 1."""
    lower = build_space(space.layout, space.total_excitation - 1)
    mat = np.zeros((lower.dim, space.dim))
    for col, s in enumerate(space.basis):
        n = s.occupations[mode]
        if n == 0:
            continue
        occ = list(s.occupations)
        occ[mode] = n - 1
        row = lower.index_of(BasisState(tuple(occ), s.emitters))
        mat[row, col] = math.sqrt(n)
    return Operator(mat, space, lower)


def creation(space: HilbertSpace, mode: int) -> Operator:
    """Photon creation on `mode`, the adjoint of annihilation from N + 1."""
    upper = build_space(space.layout, space.total_excitation + 1)
    return annihilation(upper, mode).dagger()


def emitter_lowering(space: HilbertSpace, mode: int) -> Operator:
    """Emitter lowering operator sigma on `mode`, mapping sector N to N - 1."""
    if space.layout.num_emitters == 0:
        raise SectorError("layout has no emitters")
    lower = build_space(space.layout, space.total_excitation - 1)
    mat = np.zeros((lower.dim, space.dim))
    for col, s in enumerate(space.basis):
        if s.emitters[mode] == 0:
            continue
        bits = list(s.emitters)
        bits[mode] = 0
        row = lower.index_of(BasisState(s.occupations, tuple(bits)))
        mat[row, col] = 1.0
    return Operator(mat, space, lower)


def number_operator(space: HilbertSpace, mode: int) -> Operator:
    """Photon number operator for one mode (diagonal in this basis)."""
    diag = np.array([s.occupations[mode] for s in space.basis], dtype=float)
    return Operator(np.diag(diag), space, space)


def occupation_probability(state: StateVector, mode: int, n: int) -> float:
    """Probability that `mode` holds exactly `n` photons."""
    mask = np.array([s.occupations[mode] == n for s in state.space.basis])
    return float(np.sum(np.abs(state.amplitudes[mask]) ** 2))


def mean_photon_number(state: StateVector, mode: int) -> float:
    occ = np.array([s.occupations[mode] for s in state.space.basis], dtype=float)
    return float(np.sum(occ * np.abs(state.amplitudes) ** 2))


def excited_probability(state: StateVector, mode: int) -> float:
    """Probability that the emitter on `mode` is excited."""
    if state.space.layout.num_emitters == 0:
        raise SectorError("layout has no emitters")
    bit = np.array([s.emitters[mode] for s in state.space.basis], dtype=bool)
    return float(np.sum(np.abs(state.amplitudes[bit]) ** 2))


@dataclass(frozen=True)
class SectorOperators:
    """Precomputed operator ingredients for building Hamiltonians in a sector.

    These are cached per space because the optimizer assembles thousands of
    Hamiltonians per run from the same handful of matrices.

    Attributes:
        occupations: (dim, M) photon numbers per basis state and mode.
        spm_diagonal: (dim,) sum over modes of n (n - 1).
        emitter_bits: (dim, M) excited flags, or shape (dim, 0) without emitters.
        pair_index: ordered list of (n, m) with n < m, row-major.
        pair_hops: (P, dim, dim) symmetric hop matrices a_n^dag a_m + a_m^dag a_n.
        jc_matrix: (dim, dim) sum over modes of sigma_m a_m^dag + h.c., or None.
    """

    occupations: np.ndarray
    spm_diagonal: np.ndarray
    emitter_bits: np.ndarray
    pair_index: tuple[tuple[int, int], ...]
    pair_hops: np.ndarray
    jc_matrix: np.ndarray | None


_SECTOR_OPS: dict[tuple[CavityLayout, int], SectorOperators] = {}


def sector_operators(space: HilbertSpace) -> SectorOperators:
    key = (space.layout, space.total_excitation)
    ops = _SECTOR_OPS.get(key)
    if ops is not None:
        return ops

    M = space.layout.num_modes
    dim = space.dim
    occ = np.array([s.occupations for s in space.basis], dtype=float)
    spm = np.sum(occ * (occ - 1.0), axis=1)
    ebits = np.array([s.emitters for s in space.basis], dtype=float).reshape(dim, -1)

    pairs = [(n, m) for n in range(M) for m in range(n + 1, M)]
    hops = np.zeros((len(pairs), dim, dim))
    for p, (n, m) in enumerate(pairs):
        for col, s in enumerate(space.basis):
            # a_n^dag a_m moves one photon from m to n; cutoff permitting.
            if s.occupations[m] > 0 and s.occupations[n] < space.layout.per_mode_cutoff:
                occ_t = list(s.occupations)
                occ_t[m] -= 1
                occ_t[n] += 1
                row = space.index_of(BasisState(tuple(occ_t), s.emitters))
                amp = math.sqrt((s.occupations[n] + 1) * s.occupations[m])
                hops[p, row, col] += amp
                hops[p, col, row] += amp

    jc = None
    if space.layout.num_emitters:
        jc = np.zeros((dim, dim))
        for col, s in enumerate(space.basis):
            for m in range(M):
                # sigma_m a_m^dag : emitter drops, photon appears in mode m.
                if s.emitters[m] == 1 and s.occupations[m] < space.layout.per_mode_cutoff:
                    occ_t = list(s.occupations)
                    occ_t[m] += 1
                    bits = list(s.emitters)
                    bits[m] = 0
                    row = space.index_of(BasisState(tuple(occ_t), tuple(bits)))
                    amp = math.sqrt(s.occupations[m] + 1)
                    jc[row, col] += amp
                    jc[col, row] += amp

    ops = SectorOperators(occ, spm, ebits, tuple(pairs), hops, jc)
    _SECTOR_OPS[key] = ops
    return ops
