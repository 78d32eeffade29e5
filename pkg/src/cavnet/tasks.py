"""Library of synthesis tasks: gates on dual-rail photons and repeater steps.

Each task fixes the network (mode count, nonlinearity), the input/target
state pairs defining the operation, and the hyperparameters that are known
to train it (bin count, bounds, penalty weights, initialization, learning
rate).  Callers can override any hyperparameter through `make_problem`.

Encodings used here:

* dual-rail qubit j: one photon shared by modes (2j, 2j + 1); bit b means
  the photon sits in mode 2j + b.
* qutrit: one photon over three modes, level l in mode offset + l.
* bosonic loss code on two rails: |0> = (|4,0> + |0,4>)/sqrt2, |1> = |2,2>;
  losing one photon maps the code space onto one of two error spaces
  (E1 from rail 1, E2 from rail 2) that a repeater node must map back.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .controls import Bounds, GroupInit, InitSpec, TrainFlags, materialize
from .hilbert import BasisState, CavityLayout, StateVector, build_space, ket
from .model import NonlinearKind
from .objective import PenaltyWeights, TaskBatch, make_batch, schedule_unitaries
from .optimize import OptimizerConfig, Problem, RunRecord, pairs_from_dict


@dataclass(frozen=True)
class LogicalEncoding:
    """Named logical basis states inside one (or several) sectors."""

    states: dict[str, StateVector]

    def ket(self, label: str) -> StateVector:
        return self.states[label]

    def superposition(self, labels, amplitudes) -> StateVector:
        vecs = [self.states[l] for l in labels]
        space = vecs[0].space
        amps = np.zeros(space.dim, dtype=complex)
        for a, v in zip(amplitudes, vecs):
            if v.space is not space:
                raise ValueError("superposed labels live in different sectors")
            amps += a * v.amplitudes
        return StateVector(space, amps).normalized()


@dataclass(frozen=True)
class TaskSpec:
    """A synthesis task plus the hyperparameters that train it."""

    name: str
    kind: NonlinearKind
    layout: CavityLayout
    pairs: tuple
    num_bins: int
    bounds: Bounds
    weights: PenaltyWeights
    init: InitSpec
    trainable: TrainFlags
    fixed_coupling: np.ndarray | None = None
    learning_rate: float = 0.01
    max_epochs: int = 50_000

    def batch(self) -> TaskBatch:
        return make_batch(list(self.pairs))


def make_problem(
    spec: TaskSpec,
    num_bins: int | None = None,
    bounds: Bounds | None = None,
    weights: PenaltyWeights | None = None,
    init: InitSpec | None = None,
    trainable: TrainFlags | None = None,
) -> Problem:
    """Build an optimizable Problem from a task, with optional overrides."""
    return Problem(
        name=spec.name,
        kind=spec.kind,
        batch=spec.batch(),
        num_modes=spec.layout.num_modes,
        num_bins=num_bins if num_bins is not None else spec.num_bins,
        bounds=bounds if bounds is not None else spec.bounds,
        weights=weights if weights is not None else spec.weights,
        init=init if init is not None else spec.init,
        trainable=trainable if trainable is not None else spec.trainable,
        fixed_coupling=spec.fixed_coupling,
    )


def default_config(spec: TaskSpec, **overrides) -> OptimizerConfig:
    """Optimizer settings seeded from the task's known-good values."""
    base = dict(learning_rate=spec.learning_rate, max_epochs=spec.max_epochs)
    base.update(overrides)
    return OptimizerConfig(**base)


def fixed_duration(problem: Problem, total: float) -> Problem:
    """Pin the schedule duration: equal immovable bins summing to `total`."""
    tau = total / problem.num_bins
    bounds = replace(problem.bounds, tau_min=tau, tau_max=tau)
    trainable = replace(problem.trainable, x=False)
    init = replace(problem.init, x=GroupInit(0.0, 0.0))
    return replace(problem, bounds=bounds, trainable=trainable, init=init)


# ----------------------------------------------------------------------
# encodings


def dual_rail_encoding(num_qubits: int, layout: CavityLayout, total=None) -> LogicalEncoding:
    """All computational basis states of `num_qubits` dual-rail qubits."""
    if total is None:
        total = num_qubits
    space = build_space(layout, total)
    states = {}
    for bits in range(2**num_qubits):
        label = format(bits, f"0{num_qubits}b")
        occ = [0] * layout.num_modes
        for j, b in enumerate(label):
            occ[2 * j + int(b)] = 1
        states[label] = ket(space, occ)
    return LogicalEncoding(states)


def qubit_qutrit_encoding(layout: CavityLayout) -> LogicalEncoding:
    """One dual-rail qubit (modes 0, 1) and one qutrit (modes 2, 3, 4)."""
    space = build_space(layout, 2)
    states = {}
    for b in range(2):
        for l in range(3):
            occ = [0] * 5
            occ[b] = 1
            occ[2 + l] = 1
            states[f"{b}{l}"] = ket(space, occ)
    return LogicalEncoding(states)


def loss_code_encoding(layout: CavityLayout, ancilla: tuple[int, ...], emitters=()) -> LogicalEncoding:
    """Bosonic loss-code states on rails 0/1, tensored with an ancilla ket.

    Labels: c0/c1 are the code words, e1-0/e1-1 and e2-0/e2-1 the states the
    code words fall onto after losing one photon from rail 1 or rail 2.
    """
    defs = {
        "c0": [((4, 0), 1 / math.sqrt(2)), ((0, 4), 1 / math.sqrt(2))],
        "c1": [((2, 2), 1.0)],
        "e1-0": [((3, 0), 1.0)],
        "e1-1": [((1, 2), 1.0)],
        "e2-0": [((0, 3), 1.0)],
        "e2-1": [((2, 1), 1.0)],
    }
    states = {}
    for label, comps in defs.items():
        total = sum(comps[0][0]) + sum(ancilla) + sum(emitters)
        space = build_space(layout, total)
        amps = np.zeros(space.dim, dtype=complex)
        for occ, a in comps:
            amps += a * ket(space, occ + ancilla, emitters).amplitudes
        states[label] = StateVector(space, amps)
    return LogicalEncoding(states)


# ----------------------------------------------------------------------
# the task library


def cz() -> TaskSpec:
    """Controlled-Z between two dual-rail qubits on a four-mode Kerr network."""
    layout = CavityLayout(num_modes=4, per_mode_cutoff=2)
    enc = dual_rail_encoding(2, layout)
    pairs = []
    for label in ("00", "01", "10", "11"):
        src = enc.ket(label)
        dst = src if label != "11" else StateVector(src.space, -src.amplitudes)
        pairs.append((src, dst))
    n_bins = 50
    return TaskSpec(
        name="cz",
        kind=NonlinearKind.SPM,
        layout=layout,
        pairs=tuple(pairs),
        num_bins=n_bins,
        bounds=Bounds(
            tau_min=0.725 / n_bins, tau_max=0.775 / n_bins, kappa_max=15.0, delta_c_range=15.0
        ),
        weights=PenaltyWeights(),
        init=InitSpec(
            x=GroupInit(0.0, 0.1),
            d_c=GroupInit(0.0, 0.1),
            k=GroupInit(0.0, 0.1),
            c=GroupInit(0.0, 1.0),
        ),
        trainable=TrainFlags(),
        learning_rate=0.01,
        max_epochs=50_000,
    )


def cz_qubit_qutrit() -> TaskSpec:
    """CZ that flips the sign of qubit level 1 against qutrit level 1."""
    layout = CavityLayout(num_modes=5, per_mode_cutoff=2)
    enc = qubit_qutrit_encoding(layout)
    pairs = []
    for b in range(2):
        for l in range(3):
            src = enc.ket(f"{b}{l}")
            dst = src if (b, l) != (1, 1) else StateVector(src.space, -src.amplitudes)
            pairs.append((src, dst))
    n_bins = 50
    return TaskSpec(
        name="cz-qubit-qutrit",
        kind=NonlinearKind.SPM,
        layout=layout,
        pairs=tuple(pairs),
        num_bins=n_bins,
        bounds=Bounds(
            tau_min=0.84 / n_bins, tau_max=0.89 / n_bins, kappa_max=15.0, delta_c_range=15.0
        ),
        weights=PenaltyWeights(),
        init=InitSpec(
            x=GroupInit(0.0, 0.1),
            d_c=GroupInit(0.0, 0.1),
            k=GroupInit(0.0, 0.1),
            c=GroupInit(0.0, 1.0),
        ),
        trainable=TrainFlags(),
        learning_rate=0.01,
        max_epochs=60_000,
    )


def toffoli() -> TaskSpec:
    """Toffoli on three dual-rail qubits over six Kerr modes, duration 2.0."""
    layout = CavityLayout(num_modes=6, per_mode_cutoff=3)
    enc = dual_rail_encoding(3, layout)
    pairs = []
    for bits in range(8):
        label = format(bits, "03b")
        target_label = {"110": "111", "111": "110"}.get(label, label)
        pairs.append((enc.ket(label), enc.ket(target_label)))
    n_bins = 80
    return TaskSpec(
        name="toffoli",
        kind=NonlinearKind.SPM,
        layout=layout,
        pairs=tuple(pairs),
        num_bins=n_bins,
        bounds=Bounds(
            tau_min=1.6 / n_bins, tau_max=2.4 / n_bins, kappa_max=150.0, delta_c_range=150.0
        ),
        weights=PenaltyWeights(),
        init=InitSpec(
            x=GroupInit(0.0, 0.0),
            d_c=GroupInit(0.0, 0.0),
            k=GroupInit(0.0, 0.1),
            c=GroupInit(0.0, 1.0),
        ),
        trainable=TrainFlags(x=False),
        learning_rate=0.012,
        max_epochs=60_000,
    )


_REPEATER_SPM_LAYOUT = CavityLayout(num_modes=3, per_mode_cutoff=5)
_REPEATER_SPM_COUPLING = np.array(
    [[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]
)


def _repeater_spm_spec(name, pairs, tau_lo, tau_hi, w_kappa, w_delta_c, max_epochs) -> TaskSpec:
    n_bins = 640
    return TaskSpec(
        name=name,
        kind=NonlinearKind.SPM,
        layout=_REPEATER_SPM_LAYOUT,
        pairs=tuple(pairs),
        num_bins=n_bins,
        bounds=Bounds(
            tau_min=tau_lo / n_bins, tau_max=tau_hi / n_bins, kappa_max=10.0, delta_c_range=10.0
        ),
        weights=PenaltyWeights(kappa=w_kappa, delta_c=w_delta_c),
        init=InitSpec(
            x=GroupInit(0.0, 0.0),
            d_c=GroupInit(1.0, 0.01),
            k=GroupInit(0.0, 0.01),
        ),
        trainable=TrainFlags(x=False, c=False),
        fixed_coupling=_REPEATER_SPM_COUPLING,
        learning_rate=0.01,
        max_epochs=max_epochs,
    )


def repeater_spm_step1() -> TaskSpec:
    """First repeater half on a Kerr network: flag rail-1 loss on the ancilla.

    Code words keep the ancilla photon; the rail-1 error space is corrected
    back to the code words while the ancilla photon is absorbed; the rail-2
    error space must pass through untouched.
    """
    enc = loss_code_encoding(_REPEATER_SPM_LAYOUT, ancilla=(1,))
    enc0 = loss_code_encoding(_REPEATER_SPM_LAYOUT, ancilla=(0,))
    pairs = [
        (enc.ket("c0"), enc.ket("c0")),
        (enc.ket("c1"), enc.ket("c1")),
        (enc.ket("e1-0"), enc0.ket("c0")),
        (enc.ket("e1-1"), enc0.ket("c1")),
        (enc.ket("e2-0"), enc.ket("e2-0")),
        (enc.ket("e2-1"), enc.ket("e2-1")),
    ]
    return _repeater_spm_spec(
        "repeater-spm-step1", pairs, 5.06, 5.12, w_kappa=0.015, w_delta_c=0.006, max_epochs=40_000
    )


def repeater_spm_step2() -> TaskSpec:
    """Second repeater half: correct the rail-2 error space, keep code words."""
    enc = loss_code_encoding(_REPEATER_SPM_LAYOUT, ancilla=(1,))
    enc0 = loss_code_encoding(_REPEATER_SPM_LAYOUT, ancilla=(0,))
    pairs = [
        (enc.ket("c0"), enc.ket("c0")),
        (enc.ket("c1"), enc.ket("c1")),
        (enc.ket("e2-0"), enc0.ket("c0")),
        (enc.ket("e2-1"), enc0.ket("c1")),
    ]
    return _repeater_spm_spec(
        "repeater-spm-step2", pairs, 3.78, 3.84, w_kappa=0.01, w_delta_c=0.0035, max_epochs=30_000
    )


_REPEATER_TLE_LAYOUT = CavityLayout(num_modes=2, num_emitters=2, per_mode_cutoff=6)


def repeater_tle() -> TaskSpec:
    """One-shot repeater on two emitter cavities: heralded loss correction.

    Both emitters start excited; a lost photon from either rail is restored
    from the matching emitter, leaving the loss flag in the emitter state.
    """
    layout = _REPEATER_TLE_LAYOUT
    enc_ee = loss_code_encoding(layout, ancilla=(), emitters=(1, 1))
    enc_ge = loss_code_encoding(layout, ancilla=(), emitters=(0, 1))
    enc_eg = loss_code_encoding(layout, ancilla=(), emitters=(1, 0))
    pairs = [
        (enc_ee.ket("c0"), enc_ee.ket("c0")),
        (enc_ee.ket("c1"), enc_ee.ket("c1")),
        (enc_ee.ket("e1-0"), enc_ge.ket("c0")),
        (enc_ee.ket("e1-1"), enc_ge.ket("c1")),
        (enc_ee.ket("e2-0"), enc_eg.ket("c0")),
        (enc_ee.ket("e2-1"), enc_eg.ket("c1")),
    ]
    n_bins = 640
    return TaskSpec(
        name="repeater-tle",
        kind=NonlinearKind.TLE,
        layout=layout,
        pairs=tuple(pairs),
        num_bins=n_bins,
        bounds=Bounds(
            tau_min=16.72 / n_bins,
            tau_max=18.32 / n_bins,
            kappa_max=5.0,
            delta_c_range=5.0,
            delta_e_range=5.0,
        ),
        weights=PenaltyWeights(kappa=0.002, delta_c=0.005, delta_e=0.005),
        init=InitSpec(
            x=GroupInit(0.0, 0.01),
            d_c=GroupInit(1.0, 0.01),
            d_e=GroupInit(1.0, 0.01),
            k=GroupInit(0.0, 0.01),
        ),
        trainable=TrainFlags(c=False),
        fixed_coupling=np.array([[0.0, 1.0], [1.0, 0.0]]),
        learning_rate=0.01,
        max_epochs=30_000,
    )


TASKS = {
    "cz": cz,
    "cz-qubit-qutrit": cz_qubit_qutrit,
    "toffoli": toffoli,
    "repeater-spm-step1": repeater_spm_step1,
    "repeater-spm-step2": repeater_spm_step2,
    "repeater-tle": repeater_tle,
}


def get_task(name: str) -> TaskSpec:
    try:
        return TASKS[name]()
    except KeyError:
        raise ValueError(f"unknown task {name!r}; known: {sorted(TASKS)}") from None


# ----------------------------------------------------------------------
# custom tasks from structured config data

_TASK_KEYS = {"name", "kind", "layout", "coupling", "pairs", "defaults"}
_DEFAULT_KEYS = {
    "num_bins",
    "bounds",
    "weights",
    "init",
    "trainable",
    "learning_rate",
    "max_epochs",
}


def _check_keys(data: dict, allowed: set, where: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown key(s) {sorted(unknown)} in {where}")


def task_from_dict(data: dict) -> TaskSpec:
    """Build a TaskSpec from parsed structured config data.

    Expected shape (unknown keys are rejected at every level)::

        name: my-task
        kind: spm | tle
        layout: {num_modes: 3, num_emitters: 0, per_mode_cutoff: 5}
        coupling: [[...], ...]          # optional: fixed mixing matrix
        pairs:
          - total_excitation: 5
            input:  [{occupations: [4,0,1], amplitude: [0.707, 0.0]}, ...]
            target: [{occupations: [4,0,1], amplitude: [0.707, 0.0]}, ...]
        defaults:                        # optional hyperparameters
          num_bins: 80
          bounds: {tau_min: ..., tau_max: ..., kappa_max: ..., delta_c_range: ...}
          weights: {kappa: 0.0, delta_c: 0.0, delta_e: 0.0}
          init: {x: {offset: 0.0, noise: 0.1}, ...}
          trainable: {x: true, d_c: true, d_e: true, k: true, c: true}
          learning_rate: 0.01
          max_epochs: 50000
    """
    if not isinstance(data, dict):
        raise ValueError("task config must be a mapping")
    _check_keys(data, _TASK_KEYS, "task config")
    for key in ("name", "kind", "layout", "pairs"):
        if key not in data:
            raise ValueError(f"task config is missing {key!r}")
    _check_keys(data["layout"], {"num_modes", "num_emitters", "per_mode_cutoff"}, "layout")
    layout = CavityLayout(**data["layout"])
    kind = NonlinearKind(data["kind"])
    batch = pairs_from_dict(layout, data["pairs"])
    pairs = []
    for grp in batch.groups:
        for n in range(grp.inputs.shape[1]):
            pairs.append(
                (StateVector(grp.space, grp.inputs[:, n]), StateVector(grp.space, grp.targets[:, n]))
            )

    defaults = data.get("defaults", {})
    _check_keys(defaults, _DEFAULT_KEYS, "defaults")
    if "bounds" not in defaults:
        raise ValueError("custom tasks must define defaults.bounds")
    _check_keys(
        defaults["bounds"],
        {"tau_min", "tau_max", "kappa_max", "delta_c_range", "delta_e_range"},
        "bounds",
    )
    bounds = Bounds(**defaults["bounds"])
    weights = PenaltyWeights(**defaults.get("weights", {}))
    init_data = defaults.get("init", {})
    _check_keys(init_data, {"x", "d_c", "d_e", "k", "c"}, "init")
    init = InitSpec(**{k: GroupInit(**_checked_group(v, k)) for k, v in init_data.items()})
    trainable = TrainFlags(**defaults.get("trainable", {}))
    coupling = data.get("coupling")

    return TaskSpec(
        name=str(data["name"]),
        kind=kind,
        layout=layout,
        pairs=tuple(pairs),
        num_bins=int(defaults.get("num_bins", 50)),
        bounds=bounds,
        weights=weights,
        init=init,
        trainable=trainable,
        fixed_coupling=None if coupling is None else np.array(coupling, dtype=float),
        learning_rate=float(defaults.get("learning_rate", 0.01)),
        max_epochs=int(defaults.get("max_epochs", 50_000)),
    )


def _checked_group(v: dict, name: str) -> dict:
    _check_keys(v, {"offset", "noise"}, f"init.{name}")
    return v


# ----------------------------------------------------------------------
# ancilla reset and the composed two-step repeater


PURITY_WARN = 1.0 - 1e-6


def ancilla_reset(state: StateVector, mode: int, refill: int = 1):
    """Discard one mode's state and re-prepare it in a Fock state.

    The mode is traced out, the remaining network is projected onto the
    dominant ancilla occupation (the heralded branch), and a fresh `refill`
    photon state is appended.  Returns (new_state, purity): purity is the
    trace purity of the discarded mode, 1 for a perfectly factorized branch.
    """
    space = state.space
    layout = space.layout
    rest_keys: dict[tuple, int] = {}
    rows, ks = [], []
    for b in space.basis:
        key = (b.occupations[:mode] + b.occupations[mode + 1 :], b.emitters)
        rows.append(rest_keys.setdefault(key, len(rest_keys)))
        ks.append(b.occupations[mode])
    psi = np.zeros((len(rest_keys), max(ks) + 1), dtype=complex)
    psi[rows, ks] = state.amplitudes

    rho = psi.T @ psi.conj()
    purity = float(np.real(np.trace(rho @ rho)))
    populations = np.real(np.diag(rho))
    k_star = int(np.argmax(populations))

    kept = psi[:, k_star] / math.sqrt(populations[k_star])
    new_total = space.total_excitation - k_star + refill
    new_space = build_space(layout, new_total)
    amps = np.zeros(new_space.dim, dtype=complex)
    for key, r in rest_keys.items():
        if kept[r] == 0.0:
            continue
        occ, emitters = key
        occ = occ[:mode] + (refill,) + occ[mode:]
        amps[new_space.index_of(BasisState(occ, emitters))] = kept[r]
    return StateVector(new_space, amps), purity


@dataclass(frozen=True)
class CompositeResult:
    """Outcome of chaining both repeater halves through an ancilla reset."""

    infidelity: float
    purities: dict[str, float]


def compose_repeater(record1: RunRecord, record2: RunRecord, ancilla_mode: int = 2) -> CompositeResult:
    """Chain two optimized repeater halves into the full correction cycle.

    Each loss branch is propagated through the first schedule, the ancilla
    mode is measured off and re-prepared with one photon, and the second
    schedule runs on the result.  The quoted infidelity is the coherent
    average over all six branch states against the ideal outcome (code
    words restored; the ancilla photon absorbed whenever a loss occurred).
    A branch whose ancilla is entangled with the rails (purity below
    1 - 1e-6) triggers a warning: the reset then discards information.
    """
    layout = record1.problem.batch.groups[0].space.layout
    enc1 = loss_code_encoding(layout, ancilla=(1,))
    enc0 = loss_code_encoding(layout, ancilla=(0,))
    branches = {
        "c0": (enc1.ket("c0"), enc1.ket("c0")),
        "c1": (enc1.ket("c1"), enc1.ket("c1")),
        "e1-0": (enc1.ket("e1-0"), enc1.ket("c0")),
        "e1-1": (enc1.ket("e1-1"), enc1.ket("c1")),
        "e2-0": (enc1.ket("e2-0"), enc0.ket("c0")),
        "e2-1": (enc1.ket("e2-1"), enc0.ket("c1")),
    }

    schedules = (
        materialize(record1.best_params(), record1.problem.bounds),
        materialize(record2.best_params(), record2.problem.bounds),
    )
    kinds = (record1.problem.kind, record2.problem.kind)
    cache: dict[tuple[int, int], object] = {}

    def propagator(step: int, space) -> object:
        key = (step, space.total_excitation)
        if key not in cache:
            cache[key] = schedule_unitaries(schedules[step], [space], kinds[step])[0]
        return cache[key]

    purities = {}
    overlaps = []
    for label, (src, dst) in branches.items():
        mid = propagator(0, src.space).apply(src)
        reset, purity = ancilla_reset(mid, ancilla_mode)
        purities[label] = purity
        if purity < PURITY_WARN:
            warnings.warn(
                f"branch {label}: ancilla left entangled (purity {purity:.8f}); "
                "the reset is discarding information",
                stacklevel=2,
            )
        out = propagator(1, reset.space).apply(reset)
        if out.space is not dst.space:
            raise ValueError(f"branch {label} ended in the wrong sector")
        overlaps.append(dst.overlap(out))

    mean = sum(overlaps) / len(overlaps)
    return CompositeResult(
        infidelity=max(0.0, 1.0 - abs(mean) ** 2),
        purities=purities,
    )
