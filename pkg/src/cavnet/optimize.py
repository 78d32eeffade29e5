"""Adam-driven schedule search with restarts and resumable checkpoints.

A run owns everything needed to reproduce itself: the task pairs, bounds,
penalty weights, initialization spec, and optimizer settings.  Restarts
draw fresh initial parameters from seeds seed, seed + 1, ... and execute
sequentially; the run stops early once a restart reaches the infidelity
threshold and otherwise returns the restart with the lowest infidelity.

Checkpoints serialize the complete optimizer state (raw parameters, Adam
moments, step counter, generator state, history) as JSON, using Python's
exact float round-trip, so a resumed run continues bit-for-bit identically
to an uninterrupted one.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .controls import (
    Bounds,
    ControlParams,
    GroupInit,
    InitSpec,
    TrainFlags,
    initialize,
    materialize,
)
from .hilbert import CavityLayout, StateVector, build_space, ket
from .model import NonlinearKind
from .objective import PenaltyWeights, TaskBatch, cost_and_gradient, make_batch

CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Raised for unreadable, truncated, or version-mismatched checkpoints."""


class AllRestartsAborted(RuntimeError):
    """Raised when every restart hit a non-finite cost and was abandoned."""


@dataclass(frozen=True)
class Problem:
    """A complete optimization problem: task pairs plus every hyperparameter."""

    name: str
    kind: NonlinearKind
    batch: TaskBatch
    num_modes: int
    num_bins: int
    bounds: Bounds
    weights: PenaltyWeights
    init: InitSpec
    trainable: TrainFlags = TrainFlags()
    fixed_coupling: np.ndarray | None = None


@dataclass(frozen=True)
class OptimizerConfig:
    """Adam settings and run control.

    max_epochs counts Adam steps per restart; checkpoint_every = 0 disables
    checkpointing.
    """

    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_epochs: int = 50_000
    infidelity_threshold: float = 1e-3
    restarts: int = 1
    seed: int = 0
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.max_epochs < 0 or self.restarts < 1:
            raise ValueError("max_epochs must be >= 0 and restarts >= 1")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("Adam betas must lie in [0, 1)")


@dataclass
class RestartSummary:
    """Outcome of one restart."""

    seed: int
    status: str  # "converged" | "exhausted" | "aborted"
    epochs: int
    best_infidelity: float
    best_cost: float
    best_epoch: int
    best_flat: np.ndarray | None
    history: np.ndarray  # (rows, 3): epoch, infidelity, total cost


@dataclass
class RunRecord:
    """Everything a finished run reports; JSON-serializable via to_dict."""

    problem: Problem
    config: OptimizerConfig
    restarts: list[RestartSummary]
    winner: int  # index into restarts, -1 if none usable

    @property
    def best(self) -> RestartSummary:
        if self.winner < 0:
            raise AllRestartsAborted("run produced no usable restart")
        return self.restarts[self.winner]

    @property
    def converged(self) -> bool:
        return self.winner >= 0 and self.best.status == "converged"

    @property
    def best_infidelity(self) -> float:
        return self.best.best_infidelity

    def best_params(self) -> ControlParams:
        template = _params_template(self.problem)
        return template.from_flat(self.best.best_flat)

    @property
    def duration(self) -> float:
        return materialize(self.best_params(), self.problem.bounds).duration

    def to_dict(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "status": "finished",
            "problem": problem_to_dict(self.problem),
            "config": asdict(self.config),
            "winner": self.winner,
            "restarts": [
                {
                    "seed": r.seed,
                    "status": r.status,
                    "epochs": r.epochs,
                    "best_infidelity": r.best_infidelity,
                    "best_cost": r.best_cost,
                    "best_epoch": r.best_epoch,
                    "best_flat": None if r.best_flat is None else r.best_flat.tolist(),
                    "history": r.history.tolist(),
                }
                for r in self.restarts
            ],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))


def record_from_dict(data: dict) -> RunRecord:
    problem = problem_from_dict(data["problem"])
    config = OptimizerConfig(**data["config"])
    restarts = [
        RestartSummary(
            seed=r["seed"],
            status=r["status"],
            epochs=r["epochs"],
            best_infidelity=r["best_infidelity"],
            best_cost=r["best_cost"],
            best_epoch=r["best_epoch"],
            best_flat=None if r["best_flat"] is None else np.array(r["best_flat"]),
            history=np.array(r["history"]).reshape(-1, 3),
        )
        for r in data["restarts"]
    ]
    return RunRecord(problem, config, restarts, data["winner"])


def load_record(path) -> RunRecord:
    data = _load_json(path)
    if data.get("status") != "finished":
        raise CheckpointError(f"{path} is not a finished run record")
    return record_from_dict(data)


# ----------------------------------------------------------------------
# serialization helpers


def _state_to_components(state: StateVector) -> list[dict]:
    comps = []
    for i, amp in enumerate(state.amplitudes):
        if amp != 0.0:
            b = state.space.basis[i]
            comp = {"occupations": list(b.occupations), "amplitude": [amp.real, amp.imag]}
            if b.emitters:
                comp["emitters"] = list(b.emitters)
            comps.append(comp)
    return comps


def state_from_components(space, comps) -> StateVector:
    amps = np.zeros(space.dim, dtype=complex)
    for comp in comps:
        re, im = comp.get("amplitude", [1.0, 0.0])
        v = ket(space, comp["occupations"], comp.get("emitters", ()))
        amps += complex(re, im) * v.amplitudes
    return StateVector(space, amps)


def batch_to_pairs_dict(batch: TaskBatch) -> list[dict]:
    out = []
    for grp in batch.groups:
        for n in range(grp.inputs.shape[1]):
            src = StateVector(grp.space, grp.inputs[:, n])
            dst = StateVector(grp.space, grp.targets[:, n])
            out.append(
                {
                    "total_excitation": grp.space.total_excitation,
                    "input": _state_to_components(src),
                    "target": _state_to_components(dst),
                }
            )
    return out


def pairs_from_dict(layout: CavityLayout, pairs: list[dict]) -> TaskBatch:
    built = []
    for pair in pairs:
        space = build_space(layout, pair["total_excitation"])
        built.append(
            (
                state_from_components(space, pair["input"]),
                state_from_components(space, pair["target"]),
            )
        )
    return make_batch(built)


def problem_to_dict(problem: Problem) -> dict:
    layout = problem.batch.groups[0].space.layout
    return {
        "name": problem.name,
        "kind": problem.kind.value,
        "layout": asdict(layout),
        "pairs": batch_to_pairs_dict(problem.batch),
        "num_modes": problem.num_modes,
        "num_bins": problem.num_bins,
        "bounds": asdict(problem.bounds),
        "weights": asdict(problem.weights),
        "init": asdict(problem.init),
        "trainable": asdict(problem.trainable),
        "fixed_coupling": None
        if problem.fixed_coupling is None
        else np.asarray(problem.fixed_coupling).tolist(),
    }


def problem_from_dict(data: dict) -> Problem:
    layout = CavityLayout(**data["layout"])
    init_groups = {k: GroupInit(**v) for k, v in data["init"].items()}
    return Problem(
        name=data["name"],
        kind=NonlinearKind(data["kind"]),
        batch=pairs_from_dict(layout, data["pairs"]),
        num_modes=data["num_modes"],
        num_bins=data["num_bins"],
        bounds=Bounds(**data["bounds"]),
        weights=PenaltyWeights(**data["weights"]),
        init=InitSpec(**init_groups),
        trainable=TrainFlags(**data["trainable"]),
        fixed_coupling=None
        if data["fixed_coupling"] is None
        else np.array(data["fixed_coupling"]),
    )


def _load_json(path) -> dict:
    try:
        text = Path(path).read_text()
        data = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(data, dict) or data.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path} has an unsupported checkpoint version")
    return data


# ----------------------------------------------------------------------
# the optimization loop


def _params_template(problem: Problem) -> ControlParams:
    """Zero-valued parameter set with the problem's shapes and flags."""
    M, P = problem.num_modes, problem.num_bins
    return ControlParams(
        x=np.zeros(P),
        d_c=np.zeros((M, P)),
        d_e=np.zeros((M, P)) if problem.kind is NonlinearKind.TLE else None,
        k=np.zeros((M, P)),
        c_upper=np.zeros(M * (M - 1) // 2),
        trainable=problem.trainable,
    )


@dataclass
class _LoopState:
    """Mutable state of one restart's Adam loop."""

    seed: int
    restart_index: int
    flat: np.ndarray
    m: np.ndarray
    v: np.ndarray
    t: int
    epoch: int
    best_flat: np.ndarray | None
    best_infidelity: float
    best_cost: float
    best_epoch: int
    history: list
    rng_state: dict


def _fresh_state(problem: Problem, config: OptimizerConfig, restart_index: int) -> _LoopState:
    seed = config.seed + restart_index
    rng = np.random.Generator(np.random.PCG64(seed))
    params = initialize(
        problem.init,
        problem.num_modes,
        problem.num_bins,
        problem.kind,
        problem.trainable,
        fixed_coupling=problem.fixed_coupling,
        rng=rng,
    )
    flat = params.to_flat()
    return _LoopState(
        seed=seed,
        restart_index=restart_index,
        flat=flat,
        m=np.zeros_like(flat),
        v=np.zeros_like(flat),
        t=0,
        epoch=0,
        best_flat=None,
        best_infidelity=np.inf,
        best_cost=np.inf,
        best_epoch=-1,
        history=[],
        rng_state=rng.bit_generator.state,
    )


def _loop(problem, config, state: _LoopState, checkpoint_path, done: list) -> RestartSummary:
    """Run (or continue) one restart's Adam loop until stop or abort."""
    template = _params_template(problem)
    status = "exhausted"
    while True:
        params = template.from_flat(state.flat)
        breakdown, grad = cost_and_gradient(
            params, problem.bounds, problem.batch, problem.kind, problem.weights
        )
        infid, total = breakdown.infidelity, breakdown.total
        if not (np.isfinite(total) and np.isfinite(grad).all()):
            status = "aborted"
            break
        state.history.append([state.epoch, infid, total])
        if infid < state.best_infidelity:
            state.best_flat = state.flat.copy()
            state.best_infidelity = infid
            state.best_cost = total
            state.best_epoch = state.epoch
        if infid < config.infidelity_threshold:
            status = "converged"
            break
        if state.epoch >= config.max_epochs:
            break

        state.t += 1
        state.m = config.beta1 * state.m + (1.0 - config.beta1) * grad
        state.v = config.beta2 * state.v + (1.0 - config.beta2) * grad * grad
        m_hat = state.m / (1.0 - config.beta1**state.t)
        v_hat = state.v / (1.0 - config.beta2**state.t)
        state.flat = state.flat - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
        state.epoch += 1

        if (
            checkpoint_path is not None
            and config.checkpoint_every > 0
            and state.epoch % config.checkpoint_every == 0
        ):
            _write_checkpoint(checkpoint_path, problem, config, state, done)

    return RestartSummary(
        seed=state.seed,
        status=status,
        epochs=state.epoch,
        best_infidelity=state.best_infidelity,
        best_cost=state.best_cost,
        best_epoch=state.best_epoch,
        best_flat=state.best_flat,
        history=np.array(state.history).reshape(-1, 3),
    )


def _summary_to_dict(r: RestartSummary) -> dict:
    return {
        "seed": r.seed,
        "status": r.status,
        "epochs": r.epochs,
        "best_infidelity": r.best_infidelity,
        "best_cost": r.best_cost,
        "best_epoch": r.best_epoch,
        "best_flat": None if r.best_flat is None else r.best_flat.tolist(),
        "history": r.history.tolist(),
    }


def _summary_from_dict(d: dict) -> RestartSummary:
    return RestartSummary(
        seed=d["seed"],
        status=d["status"],
        epochs=d["epochs"],
        best_infidelity=d["best_infidelity"],
        best_cost=d["best_cost"],
        best_epoch=d["best_epoch"],
        best_flat=None if d["best_flat"] is None else np.array(d["best_flat"]),
        history=np.array(d["history"]).reshape(-1, 3),
    )


def _write_checkpoint(path, problem, config, state: _LoopState, done: list) -> None:
    data = {
        "version": CHECKPOINT_VERSION,
        "status": "running",
        "problem": problem_to_dict(problem),
        "config": asdict(config),
        "completed_restarts": [_summary_to_dict(r) for r in done],
        "state": {
            "seed": state.seed,
            "restart_index": state.restart_index,
            "flat": state.flat.tolist(),
            "m": state.m.tolist(),
            "v": state.v.tolist(),
            "t": state.t,
            "epoch": state.epoch,
            "best_flat": None if state.best_flat is None else state.best_flat.tolist(),
            "best_infidelity": state.best_infidelity,
            "best_cost": state.best_cost,
            "best_epoch": state.best_epoch,
            "history": state.history,
            "rng_state": state.rng_state,
        },
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(data))
    tmp.replace(path)


def _finish(problem, config, done: list, checkpoint_path) -> RunRecord:
    usable = [i for i, r in enumerate(done) if r.best_flat is not None]
    if not usable:
        raise AllRestartsAborted(
            f"all {len(done)} restart(s) aborted on non-finite cost"
        )
    winner = min(usable, key=lambda i: done[i].best_infidelity)
    record = RunRecord(problem, config, done, winner)
    if checkpoint_path is not None:
        Path(checkpoint_path).write_text(json.dumps(record.to_dict()))
    return record


def run(problem: Problem, config: OptimizerConfig, checkpoint_path=None) -> RunRecord:
    """Optimize a schedule for `problem`, restarting until convergence.

    Restarts are abandoned individually when the cost turns non-finite; the
    run raises AllRestartsAborted only if that killed every restart.
    """
    done: list[RestartSummary] = []
    for r in range(config.restarts):
        state = _fresh_state(problem, config, r)
        summary = _loop(problem, config, state, checkpoint_path, done)
        done.append(summary)
        if summary.status == "converged":
            break
    return _finish(problem, config, done, checkpoint_path)


def resume(checkpoint_path) -> RunRecord:
    """Continue an interrupted run; a finished record returns immediately.

    The restored loop replays bit-for-bit: parameters, moments, and the
    step counter come back exactly as written, so the continued history
    matches an uninterrupted run's history element for element.
    """
    data = _load_json(checkpoint_path)
    if data.get("status") == "finished":
        return record_from_dict(data)
    if data.get("status") != "running" or "state" not in data:
        raise CheckpointError(f"{checkpoint_path} is not a resumable checkpoint")

    problem = problem_from_dict(data["problem"])
    config = OptimizerConfig(**data["config"])
    done = [_summary_from_dict(d) for d in data["completed_restarts"]]
    s = data["state"]
    state = _LoopState(
        seed=s["seed"],
        restart_index=s["restart_index"],
        flat=np.array(s["flat"]),
        m=np.array(s["m"]),
        v=np.array(s["v"]),
        t=s["t"],
        epoch=s["epoch"],
        best_flat=None if s["best_flat"] is None else np.array(s["best_flat"]),
        best_infidelity=s["best_infidelity"],
        best_cost=s["best_cost"],
        best_epoch=s["best_epoch"],
        history=[list(row) for row in s["history"]],
        rng_state=s["rng_state"],
    )

    summary = _loop(problem, config, state, checkpoint_path, done)
    done.append(summary)
    if summary.status != "converged":
        for r in range(state.restart_index + 1, config.restarts):
            fresh = _fresh_state(problem, config, r)
            summary = _loop(problem, config, fresh, checkpoint_path, done)
            done.append(summary)
            if summary.status == "converged":
                break
    return _finish(problem, config, done, checkpoint_path)
