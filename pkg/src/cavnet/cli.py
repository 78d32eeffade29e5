"""Command-line front end: optimize, resume, verify, trace, bounds.

Exit codes follow the automation contract: `optimize`/`resume` exit 0 only
if the final infidelity reached the threshold, 1 when every restart aborted
on a non-finite cost, and 2 for invalid configuration of any kind.
`verify` exits 0 only if the whole oracle battery passes.

The run configuration file is YAML (validated strictly; unknown keys are
errors) and every command-line flag overrides its config-file counterpart.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavnet",
        description="Optimize piecewise-constant controls for nonlinear cavity networks.",
    )
    sub = parser.add_subparsers(required=True)

    p_opt = sub.add_parser("optimize", help="run a schedule optimization")
    p_opt.add_argument("--task", help="library task name")
    p_opt.add_argument("--config", help="YAML run configuration")
    p_opt.add_argument("--seed", type=int, help="base seed; restart r uses seed + r")
    p_opt.add_argument("--out", help="output directory")
    p_opt.add_argument("--fixed-duration", type=float, help="pin total duration")
    p_opt.add_argument("--max-epochs", type=int, help="Adam steps per restart")
    p_opt.add_argument("--restarts", type=int, help="number of seeded restarts")
    p_opt.add_argument("--num-bins", type=int, help="override the bin count")
    p_opt.add_argument("--threshold", type=float, help="stop at this infidelity")
    p_opt.add_argument("--learning-rate", type=float)
    p_opt.add_argument("--checkpoint-every", type=int, help="epochs between checkpoints")
    p_opt.add_argument(
        "--no-penalty", action="store_true", help="zero all bandwidth penalty weights"
    )
    p_opt.set_defaults(func=cmd_optimize)

    p_res = sub.add_parser("resume", help="continue a checkpointed run")
    p_res.add_argument("--checkpoint", required=True)
    p_res.add_argument("--out", help="output directory (defaults to checkpoint's)")
    p_res.set_defaults(func=cmd_resume)

    p_ver = sub.add_parser("verify", help="run the numerical oracle battery")
    p_ver.add_argument(
        "--inject-expm-error",
        action="store_true",
        help="deliberately perturb the matrix exponential to prove the "
        "unitarity oracle catches it (the battery must then fail)",
    )
    p_ver.set_defaults(func=cmd_verify)

    p_tr = sub.add_parser("trace", help="time-resolved observables of a finished run")
    p_tr.add_argument("--record", required=True, help="record.json of a finished run")
    p_tr.add_argument("--resolution", type=float, required=True, help="sample spacing")
    p_tr.add_argument("--out", required=True, help="output directory")
    p_tr.set_defaults(func=cmd_trace)

    p_bnd = sub.add_parser("bounds", help="analytic duration bounds and comparisons")
    p_bnd.add_argument("--infidelity", type=float, default=1e-3)
    p_bnd.add_argument("--out", help="also write the table as CSV")
    p_bnd.set_defaults(func=cmd_bounds)
    return parser


# ----------------------------------------------------------------------
# optimize / resume

_RUN_KEYS = {
    "task",
    "task_file",
    "seed",
    "restarts",
    "max_epochs",
    "learning_rate",
    "infidelity_threshold",
    "checkpoint_every",
    "num_bins",
    "fixed_duration",
    "weights",
    "bounds",
    "init",
    "trainable",
    "out",
}


def _load_yaml(path):
    import yaml

    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ValueError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ValueError(f"{path} must hold a mapping")
    return data


def _resolve_task(args, config: dict):
    from . import tasks

    name = getattr(args, "task", None) or config.get("task")
    task_file = config.get("task_file")
    if name and task_file:
        raise ValueError("give either a task name or a task file, not both")
    if name:
        if isinstance(name, dict):
            return tasks.task_from_dict(name)
        return tasks.get_task(str(name))
    if task_file:
        return tasks.task_from_dict(_load_yaml(task_file))
    raise ValueError("no task given: use --task or a config with task/task_file")


def cmd_optimize(args) -> int:
    from .controls import Bounds, GroupInit, InitSpec, TrainFlags
    from .objective import PenaltyWeights
    from .optimize import AllRestartsAborted, OptimizerConfig
    from .optimize import run as run_problem
    from . import tasks

    config = _load_yaml(args.config) if args.config else {}
    unknown = set(config) - _RUN_KEYS
    if unknown:
        raise ValueError(f"unknown config key(s): {sorted(unknown)}")

    spec = _resolve_task(args, config)

    def construct(cls, mapping, what):
        try:
            return cls(**mapping)
        except TypeError as exc:
            raise ValueError(f"bad {what} in config: {exc}") from exc

    bounds = None
    if "bounds" in config:
        bounds = construct(Bounds, config["bounds"], "bounds")
    weights = None
    if "weights" in config:
        weights = construct(PenaltyWeights, config["weights"], "weights")
    if args.no_penalty:
        weights = PenaltyWeights()
    init = None
    if "init" in config:
        groups = {
            k: construct(GroupInit, v, f"init.{k}") for k, v in config["init"].items()
        }
        init = construct(InitSpec, groups, "init")
    trainable = None
    if "trainable" in config:
        trainable = construct(TrainFlags, config["trainable"], "trainable")

    num_bins = args.num_bins if args.num_bins is not None else config.get("num_bins")
    problem = tasks.make_problem(
        spec,
        num_bins=num_bins,
        bounds=bounds,
        weights=weights,
        init=init,
        trainable=trainable,
    )

    fixed = (
        args.fixed_duration if args.fixed_duration is not None else config.get("fixed_duration")
    )
    if fixed is not None:
        problem = tasks.fixed_duration(problem, float(fixed))

    def pick(flag, key, default):
        if flag is not None:
            return flag
        return config.get(key, default)

    opt = OptimizerConfig(
        learning_rate=pick(args.learning_rate, "learning_rate", spec.learning_rate),
        max_epochs=pick(args.max_epochs, "max_epochs", spec.max_epochs),
        infidelity_threshold=pick(args.threshold, "infidelity_threshold", 1e-3),
        restarts=pick(args.restarts, "restarts", 1),
        seed=pick(args.seed, "seed", 0),
        checkpoint_every=pick(args.checkpoint_every, "checkpoint_every", 0),
    )

    out_dir = args.out or config.get("out")
    checkpoint_path = None
    if out_dir:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        checkpoint_path = out_dir / "checkpoint.json"

    try:
        record = run_problem(problem, opt, checkpoint_path=checkpoint_path)
    except AllRestartsAborted as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 1
    return _report(record, out_dir)


def cmd_resume(args) -> int:
    from .optimize import AllRestartsAborted, resume

    try:
        record = resume(args.checkpoint)
    except AllRestartsAborted as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(args.out) if args.out else Path(args.checkpoint).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    return _report(record, out_dir)


def _report(record, out_dir) -> int:
    from .controls import materialize

    best = record.best
    schedule = materialize(record.best_params(), record.problem.bounds)
    print(
        f"task {record.problem.name}: infidelity {best.best_infidelity:.3e} "
        f"duration {schedule.duration:.6f} epochs {best.epochs} seed {best.seed} "
        f"({best.status}, {len(record.restarts)} restart(s))"
    )
    if out_dir:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        record.save(out_dir / "record.json")
        export_schedule(record, out_dir)
        _write_history_csv(out_dir / "history.csv", best.history)
    threshold = record.config.infidelity_threshold
    return 0 if best.best_infidelity <= threshold else 1


def _fmt(x) -> str:
    return repr(float(x))


def _write_history_csv(path, history) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "infidelity", "cost"])
        for epoch, infid, total in history:
            writer.writerow([int(epoch), _fmt(infid), _fmt(total)])


def export_schedule(record, out_dir) -> None:
    """Write the best schedule as CSV: per-bin controls plus mixing matrix.

    Floats are written with full round-trip precision so a re-imported
    schedule reproduces the recorded infidelity exactly.
    """
    from .controls import materialize
    from .model import NonlinearKind

    out_dir = Path(out_dir)
    problem = record.problem
    schedule = materialize(record.best_params(), problem.bounds)
    M = problem.num_modes
    kappa, delta_c, delta_e = schedule.kappa, schedule.delta_c, schedule.delta_e

    header = ["bin", "t_start", "dt"]
    header += [f"kappa_{m}" for m in range(M)]
    header += [f"delta_c_{m}" for m in range(M)]
    if problem.kind is NonlinearKind.TLE:
        header += [f"delta_e_{m}" for m in range(M)]
    t = 0.0
    with open(out_dir / "schedule.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for p in range(len(schedule.dt)):
            row = [p, _fmt(t), _fmt(schedule.dt[p])]
            row += [_fmt(v) for v in kappa[:, p]]
            row += [_fmt(v) for v in delta_c[:, p]]
            if delta_e is not None:
                row += [_fmt(v) for v in delta_e[:, p]]
            writer.writerow(row)
            t += schedule.dt[p]

    with open(out_dir / "mixing.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in schedule.coupling:
            writer.writerow([_fmt(v) for v in row])


def load_schedule(out_dir):
    """Re-import an exported schedule: (list of ControlBin, mixing matrix)."""
    import numpy as np

    from .model import ControlBin

    out_dir = Path(out_dir)
    coupling = np.loadtxt(out_dir / "mixing.csv", delimiter=",", ndmin=2)
    bins = []
    with open(out_dir / "schedule.csv", newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        M = sum(1 for f in fields if f.startswith("kappa_"))
        has_de = any(f.startswith("delta_e_") for f in fields)
        for row in reader:
            bins.append(
                ControlBin(
                    kappa=np.array([float(row[f"kappa_{m}"]) for m in range(M)]),
                    delta_c=np.array([float(row[f"delta_c_{m}"]) for m in range(M)]),
                    delta_e=np.array([float(row[f"delta_e_{m}"]) for m in range(M)])
                    if has_de
                    else None,
                    dt=float(row["dt"]),
                )
            )
    return bins, coupling


# ----------------------------------------------------------------------
# verify

def run_verification(inject_expm_error: bool = False) -> list[tuple[str, bool, str]]:
    """Numerical oracle battery; returns (check, passed, detail) rows.

    With `inject_expm_error` the matrix exponential is perturbed on purpose
    so the unitarity oracle must report a failure; a healthy battery then
    proves it can actually catch broken propagators.
    """
    import numpy as np

    from . import propagate

    checks = []
    if inject_expm_error:
        propagate._EXPM_PERTURBATION = 1e-6
    try:
        checks.append(_check_mixing_round_trip(np))
        checks.append(_check_gradient_fd(np))
        checks.append(_check_unitarity_long(np))
        checks.append(_check_conservation(np))
        checks.append(_check_phase_invariance(np))
    finally:
        propagate._EXPM_PERTURBATION = 0.0
    return checks


def _check_mixing_round_trip(np) -> tuple[str, bool, str]:
    from .mixing import coupling_from_scattering, scattering_from_coupling

    rng = np.random.default_rng(2024)
    worst_sym = worst_rt = 0.0
    for case in range(100):
        M = int(rng.integers(2, 7))
        C = rng.uniform(-3.0, 3.0, size=(M, M))
        C = 0.5 * (C + C.T)
        S = scattering_from_coupling(C)
        worst_sym = max(worst_sym, float(np.abs(S - S.T).max()))
        C2 = coupling_from_scattering(S)
        worst_sym = max(worst_sym, float(np.abs(C2 - C2.T).max()))
        worst_rt = max(worst_rt, float(np.abs(C2 - C).max()))
    ok = worst_sym < 1e-10 and worst_rt < 1e-8
    return ("mixing round trip (100 cases)", ok, f"symmetry {worst_sym:.2e}, round trip {worst_rt:.2e}")


def _check_gradient_fd(np) -> tuple[str, bool, str]:
    from .controls import Bounds, GroupInit, InitSpec, TrainFlags, initialize
    from .hilbert import CavityLayout, StateVector, build_space
    from .model import NonlinearKind
    from .objective import PenaltyWeights, cost, cost_and_gradient, make_batch

    rng = np.random.default_rng(7)
    worst = 0.0
    cases = 0
    for i in range(20):
        kind = NonlinearKind.TLE if i % 3 == 2 else NonlinearKind.SPM
        M = int(rng.integers(2, 5)) if kind is NonlinearKind.SPM else int(rng.integers(2, 4))
        P = int(rng.integers(2, 9))
        N = int(rng.integers(1, 3)) if kind is NonlinearKind.SPM else int(rng.integers(2, 4))
        layout = CavityLayout(M, M if kind is NonlinearKind.TLE else 0, per_mode_cutoff=max(N, 2))
        space = build_space(layout, N)
        dim = space.dim
        n_pairs = min(3, dim)
        A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        B = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        Q, R = np.linalg.qr(A)[0], np.linalg.qr(B)[0]
        batch = make_batch(
            [(StateVector(space, Q[:, n]), StateVector(space, R[:, n])) for n in range(n_pairs)]
        )
        bounds = Bounds(
            tau_min=0.02,
            tau_max=0.02 + float(rng.uniform(0.0, 0.05)),
            kappa_max=float(rng.uniform(2.0, 12.0)),
            delta_c_range=float(rng.uniform(1.0, 10.0)),
            delta_e_range=float(rng.uniform(1.0, 8.0)),
        )
        init = InitSpec(
            x=GroupInit(0.0, 0.5),
            d_c=GroupInit(0.0, 0.7),
            d_e=GroupInit(0.0, 0.7),
            k=GroupInit(0.2, 0.7),
            c=GroupInit(0.0, 1.0),
        )
        trainable = TrainFlags(c=bool(i % 2))
        weights = PenaltyWeights(
            kappa=float(rng.uniform(0.0, 0.3)),
            delta_c=float(rng.uniform(0.0, 0.3)),
            delta_e=float(rng.uniform(0.0, 0.3)) if kind is NonlinearKind.TLE else 0.0,
        )
        params = initialize(init, M, P, kind, trainable, seed=100 + i)
        _, grad = cost_and_gradient(params, bounds, batch, kind, weights)
        flat = params.to_flat()
        mask = params.trainable_mask()
        h = 1e-5
        idx = rng.choice(len(flat), size=min(12, len(flat)), replace=False)
        for j in idx:
            cases += 1
            if not mask[j]:
                worst = max(worst, abs(grad[j]))
                continue
            fp, fm = flat.copy(), flat.copy()
            fp[j] += h
            fm[j] -= h
            ep = cost(params.from_flat(fp), bounds, batch, kind, weights).total
            em = cost(params.from_flat(fm), bounds, batch, kind, weights).total
            fd = (ep - em) / (2 * h)
            err = abs(grad[j] - fd) / max(abs(fd), 1e-8)
            worst = max(worst, err)
    ok = worst < 1e-5
    return (f"analytic gradient vs finite differences ({cases} derivatives)", ok, f"worst {worst:.2e}")


def _check_unitarity_long(np) -> tuple[str, bool, str]:
    from .controls import Bounds, GroupInit, InitSpec, initialize, materialize
    from .hilbert import CavityLayout, build_space
    from .model import NonlinearKind
    from .objective import schedule_unitaries

    layout = CavityLayout(3, per_mode_cutoff=3)
    space = build_space(layout, 3)
    bounds = Bounds(tau_min=0.005, tau_max=0.02, kappa_max=10.0, delta_c_range=8.0)
    init = InitSpec(
        x=GroupInit(0.0, 1.0),
        d_c=GroupInit(0.0, 1.0),
        k=GroupInit(0.0, 1.0),
        c=GroupInit(0.0, 1.0),
    )
    params = initialize(init, 3, 640, NonlinearKind.SPM, seed=11)
    prop = schedule_unitaries(materialize(params, bounds), [space], NonlinearKind.SPM)[0]
    defect = prop.unitarity_defect()
    return ("unitarity after 640-bin composition", defect < 1e-9, f"defect {defect:.2e}")


def _check_conservation(np) -> tuple[str, bool, str]:
    from .hilbert import CavityLayout
    from .model import NonlinearKind

    worst = 0.0
    rng = np.random.default_rng(3)
    for kind, M in ((NonlinearKind.SPM, 3), (NonlinearKind.TLE, 2)):
        layout = CavityLayout(M, M if kind is NonlinearKind.TLE else 0, per_mode_cutoff=3)
        for _ in range(5):
            defect, block = _full_space_check(np, layout, kind, rng)
            worst = max(worst, defect, block)
    return ("excitation conservation and sector blocks", worst < 1e-12, f"worst {worst:.2e}")


def _full_space_check(np, layout, kind, rng):
    """Build H on the full product space and compare against the sector code.

    Returns (norm of [H, N_total], worst sector-block mismatch); both must
    vanish because the sector representation is only valid if the product
    construction is block diagonal with identical blocks.
    """
    from itertools import product

    from .hilbert import build_space
    from .model import ControlBin, NonlinearKind, build_hamiltonian

    M, E, cut = layout.num_modes, layout.num_emitters, layout.per_mode_cutoff
    d1 = cut + 1
    a1 = np.diag(np.sqrt(np.arange(1, d1)), k=1)
    s1 = np.array([[0.0, 1.0], [0.0, 0.0]])

    def embed(op, site, dims):
        out = np.array([[1.0]])
        for i, d in enumerate(dims):
            out = np.kron(out, op if i == site else np.eye(d))
        return out

    dims = [d1] * M + [2] * E
    a = [embed(a1, m, dims) for m in range(M)]
    sig = [embed(s1, M + e, dims) for e in range(E)]

    kappa = rng.uniform(0.0, 5.0, M)
    delta_c = rng.uniform(-3.0, 3.0, M)
    delta_e = rng.uniform(-3.0, 3.0, M) if kind is NonlinearKind.TLE else None
    C = rng.uniform(-2.0, 2.0, (M, M))
    C = 0.5 * (C + C.T)
    np.fill_diagonal(C, 0.0)

    H = sum(delta_c[m] * a[m].T @ a[m] for m in range(M))
    for n in range(M):
        for m in range(n + 1, M):
            g = C[n, m] * math.sqrt(kappa[n] * kappa[m])
            H = H + g * (a[n].T @ a[m] + a[m].T @ a[n])
    if kind is NonlinearKind.SPM:
        for m in range(M):
            H = H - a[m].T @ a[m].T @ a[m] @ a[m]
    else:
        for m in range(M):
            H = H + sig[m] @ a[m].T + sig[m].T @ a[m]
            H = H + delta_e[m] * sig[m].T @ sig[m]

    N_total = sum(a[m].T @ a[m] for m in range(M)) + sum(s.T @ s for s in sig)
    comm = float(np.abs(H @ N_total - N_total @ H).max())

    # extract one sector block and compare with the dedicated construction
    occs = list(product(range(d1), repeat=M))
    bits = list(product(range(2), repeat=E))
    labels = [(o, b) for o in occs for b in bits]
    target = 2 if M > 2 or E else 3
    space = build_space(layout, target)
    pick = [labels.index((s.occupations, s.emitters)) for s in space.basis]
    block = H[np.ix_(pick, pick)]
    ref = build_hamiltonian(
        space, C, ControlBin(kappa=kappa, delta_c=delta_c, delta_e=delta_e, dt=1.0), kind
    ).matrix
    return comm, float(np.abs(block - ref).max())


def _check_phase_invariance(np) -> tuple[str, bool, str]:
    from .hilbert import CavityLayout, StateVector, build_space
    from .objective import infidelity, make_batch
    from .propagate import Propagator

    rng = np.random.default_rng(17)
    layout = CavityLayout(3, per_mode_cutoff=2)
    space = build_space(layout, 2)
    dim = space.dim
    worst = 0.0
    for _ in range(50):
        Q = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))[0]
        R = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))[0]
        batch = make_batch(
            [(StateVector(space, Q[:, n]), StateVector(space, R[:, n])) for n in range(3)]
        )
        U = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))[0]
        base = infidelity(batch, Propagator(U, space))
        for theta in rng.uniform(0.0, 2 * math.pi, 3):
            turned = infidelity(batch, Propagator(np.exp(1j * theta) * U, space))
            worst = max(worst, abs(turned - base))
    return ("global-phase invariance of the infidelity", worst < 1e-14, f"worst {worst:.2e}")


def cmd_verify(args) -> int:
    checks = run_verification(inject_expm_error=args.inject_expm_error)
    all_ok = True
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        all_ok &= ok
    if args.inject_expm_error:
        caught = not all(ok for _, ok, _ in checks)
        print(
            "injected propagator error was "
            + ("caught: the oracles are alive" if caught else "NOT caught")
        )
        return 0 if caught else 1
    return 0 if all_ok else 1


# ----------------------------------------------------------------------
# trace


def cmd_trace(args) -> int:
    from .controls import materialize
    from .model import NonlinearKind
    from .optimize import load_record

    if args.resolution <= 0:
        raise ValueError("resolution must be positive")
    record = load_record(args.record)
    problem = record.problem
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    schedule = materialize(record.best_params(), problem.bounds)
    bins = schedule.bins()
    M = problem.num_modes
    tle = problem.kind is NonlinearKind.TLE

    states = _trace_states(problem)
    manifest = {"task": problem.name, "states": {}}

    # controls, sampled on the same sub-bin grid as the states
    sample_ts = [0.0]
    t = 0.0
    bin_of_sample = []
    for p, b in enumerate(bins):
        n_sub = max(1, math.ceil(b.dt / args.resolution - 1e-12))
        for s in range(n_sub):
            bin_of_sample.append(p)
            t += b.dt / n_sub
            sample_ts.append(t)
    with open(out_dir / "controls.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["t_start", "t_end"]
        header += [f"kappa_{m}" for m in range(M)]
        header += [f"delta_c_{m}" for m in range(M)]
        if tle:
            header += [f"delta_e_{m}" for m in range(M)]
        writer.writerow(header)
        for i, p in enumerate(bin_of_sample):
            b = bins[p]
            row = [_fmt(sample_ts[i]), _fmt(sample_ts[i + 1])]
            row += [_fmt(v) for v in b.kappa]
            row += [_fmt(v) for v in b.delta_c]
            if tle:
                row += [_fmt(v) for v in b.delta_e]
            writer.writerow(row)

    for label, state in states:
        path = out_dir / f"state_{label}.csv"
        _trace_one(state, bins, schedule.coupling, problem.kind, args.resolution, path)
        manifest["states"][label] = path.name

    for space in {s.space for _, s in states}:
        (out_dir / f"basis_{space.total_excitation}.txt").write_text(
            "\n".join(space.basis_lines()) + "\n"
        )
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    print(f"wrote {len(states)} state trace(s) to {out_dir}")
    return 0


def _trace_states(problem):
    """Labeled initial states: every task input, plus the balanced code-word
    superpositions for the repeater tasks."""
    from .hilbert import StateVector

    states = []
    i = 0
    for grp in problem.batch.groups:
        for n in range(grp.inputs.shape[1]):
            states.append((f"input{i}", StateVector(grp.space, grp.inputs[:, n])))
            i += 1
    if problem.name.startswith("repeater"):
        seen = {}
        for grp in problem.batch.groups:
            for n in range(grp.inputs.shape[1]):
                seen.setdefault(grp.space.total_excitation, []).append(
                    StateVector(grp.space, grp.inputs[:, n])
                )
        for total, vecs in sorted(seen.items()):
            for a, b in zip(vecs[::2], vecs[1::2]):
                if a.space is b.space:
                    amps = (a.amplitudes + b.amplitudes) / math.sqrt(2.0)
                    states.append((f"superposition{total}_{len(states)}", StateVector(a.space, amps)))
    return states


def _trace_one(state, bins, coupling, kind, resolution, path) -> None:
    from .hilbert import excited_probability, mean_photon_number, occupation_probability
    from .model import NonlinearKind, build_hamiltonian
    from .propagate import expm_step

    space = state.space
    M = space.layout.num_modes
    N = space.total_excitation
    tle = kind is NonlinearKind.TLE

    def observables(s):
        row = []
        for m in range(M):
            row.append(mean_photon_number(s, m))
        for m in range(M):
            for n in range(N + 1):
                row.append(occupation_probability(s, m, n))
        if tle:
            for m in range(M):
                row.append(excited_probability(s, m))
        return row

    header = ["t"]
    header += [f"mean_n_{m}" for m in range(M)]
    header += [f"p{n}_{m}" for m in range(M) for n in range(N + 1)]
    if tle:
        header += [f"excited_{m}" for m in range(M)]

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        t = 0.0
        writer.writerow([_fmt(t)] + [_fmt(v) for v in observables(state)])
        current = state
        for b in bins:
            n_sub = max(1, math.ceil(b.dt / resolution - 1e-12))
            H = build_hamiltonian(space, coupling, b, kind)
            U_sub = expm_step(H, b.dt / n_sub)
            for _ in range(n_sub):
                current = U_sub.apply(current)
                t += b.dt / n_sub
                writer.writerow([_fmt(t)] + [_fmt(v) for v in observables(current)])


# ----------------------------------------------------------------------
# bounds


def cmd_bounds(args) -> int:
    from .bounds import cz_min_duration, decomposition_durations

    table = decomposition_durations(args.infidelity)
    print(f"minimum CZ duration at infidelity {args.infidelity:g}: "
          f"{cz_min_duration(args.infidelity):.4f}")
    rows = []
    for route, info in table.items():
        print(f"{route}:")
        for key, value in info.items():
            print(f"    {key}: {value}")
        row = {"route": route}
        row.update(info)
        rows.append(row)
    if args.out:
        keys = sorted({k for r in rows for k in r})
        with open(args.out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=keys)
            writer.writeheader()
            writer.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
