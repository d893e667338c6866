"""Command-line pipeline: generate, train, eval, simulate, report.

Every command writes its outputs plus one ``manifest.json`` into the --out
directory.  All randomness flows from --seed.  Exit codes: 0 success, 2 bad
configuration, 3 training divergence, 4 governor infeasibility.
"""

from __future__ import annotations

import argparse
import datetime
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .governor import (
    MODE_EXACT,
    MODE_HYBRID,
    GovernorInfeasibleError,
    ScenarioFamily,
    generate_dataset,
    read_dataset_csv,
    run_governed_mission,
    write_dataset_csv,
    write_trace_csv,
)
from .jsonio import dump_json, load_json, read_csv, write_csv
from .losses import LossSpec
from .mlp import MlpNetwork, save_mlp
from .network import CheckpointError, KanNetwork, save_network
from .rendezvous import (
    Scenario,
    ScenarioError,
    scenario_from_dict,
    scenario_to_dict,
    trajectory_csv_rows,
    TRAJECTORY_COLUMNS,
)
from .training import (
    HISTORY_COLUMNS,
    TrainConfig,
    TrainingDivergedError,
    evaluate_metrics,
    history_rows,
    train,
    train_mlp_baseline,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_INFEASIBLE = 4

ARCH_CHOICES = ("kan-bspline", "kan-grbf", "kan-rswaf", "mlp")


class ConfigError(ValueError):
    pass


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = load_json(path)
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config root must be an object")
    return doc


def _scenario_from_config(cfg: dict) -> Scenario:
    try:
        return scenario_from_dict(cfg.get("scenario", {}), "scenario")
    except ScenarioError as exc:
        raise ConfigError(str(exc)) from exc


def _family_from_config(cfg: dict, base: Scenario) -> ScenarioFamily:
    fdoc = cfg.get("family", {})
    if not isinstance(fdoc, dict):
        raise ConfigError("family: expected an object")
    allowed = {"range_lo", "range_hi", "lateral_jitter", "vertical_jitter", "velocity_jitter"}
    kwargs = {}
    for key, val in fdoc.items():
        if key not in allowed:
            raise ConfigError(f"family.{key}: unknown field")
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"family.{key}: expected a number, got {val!r}")
        kwargs[key] = float(val)
    return ScenarioFamily(base=base, **kwargs)


def _loss_from_config(cfg: dict, args=None) -> LossSpec:
    doc = cfg.get("loss", {})
    if not isinstance(doc, dict):
        raise ConfigError("loss: expected an object")
    allowed = {"mode", "theta_c", "reg_weight", "sign"}
    kwargs = {}
    for key, val in doc.items():
        if key not in allowed:
            raise ConfigError(f"loss.{key}: unknown field")
        kwargs[key] = val
    if args is not None and getattr(args, "theta_c", None) is not None:
        kwargs["theta_c"] = args.theta_c
    try:
        return LossSpec(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"loss: {exc}") from exc


def _train_config(cfg: dict, args) -> TrainConfig:
    doc = cfg.get("train", {})
    if not isinstance(doc, dict):
        raise ConfigError("train: expected an object")
    allowed = {
        "epochs",
        "batch_size",
        "validation_fraction",
        "patience",
        "lr",
        "beta1",
        "beta2",
        "eps",
        "weight_decay",
        "grid_size",
    }
    kwargs = {}
    for key, val in doc.items():
        if key not in allowed:
            raise ConfigError(f"train.{key}: unknown field")
        kwargs[key] = val
    for key in ("epochs", "batch_size", "lr", "weight_decay", "patience"):
        val = getattr(args, key, None)
        if val is not None:
            kwargs[key] = val
    if getattr(args, "grid_size", None) is not None:
        kwargs["grid_size"] = args.grid_size
    kwargs["seed"] = args.seed
    try:
        return TrainConfig(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"train: {exc}") from exc


def _manifest(out_dir: Path, command: str, args: argparse.Namespace, inputs: list[str], outputs: list[str], started: str) -> None:
    doc = {
        "command": command,
        "config": getattr(args, "config", None),
        "seed": getattr(args, "seed", None),
        "inputs": inputs,
        "outputs": outputs,
        "tool_version": __version__,
        "started_at": started,
        "finished_at": _now(),
    }
    dump_json(doc, out_dir / "manifest.json")


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---- commands -----------------------------------------------------------------


def cmd_generate(args) -> int:
    started = _now()
    cfg = _load_config(args.config)
    scenario = _scenario_from_config(cfg)
    family = _family_from_config(cfg, scenario)
    out = _out_dir(args)
    result = generate_dataset(family, args.count, args.seed)
    dataset_path = out / "dataset.csv"
    write_dataset_csv(dataset_path, result.features, result.t_star)
    meta = dict(result.meta)
    meta["scenario"] = scenario_to_dict(scenario)
    dump_json(meta, out / "dataset.meta.json")
    _manifest(out, "generate", args, [args.config] if args.config else [], ["dataset.csv", "dataset.meta.json"], started)
    print(
        f"generated {result.t_star.size} samples from {result.missions} missions "
        f"({result.skipped_infeasible} skipped infeasible) -> {dataset_path}"
    )
    return EXIT_OK


def _build_model(arch: str, n_features: int, config: TrainConfig):
    if arch == "mlp":
        return MlpNetwork.build(n_features, seed=config.seed)
    kind = arch.split("-", 1)[1]
    return KanNetwork.build([n_features, 8, 1], kind=kind, grid_size=config.grid_size, seed=config.seed)


def cmd_train(args) -> int:
    started = _now()
    cfg = _load_config(args.config)
    spec = _loss_from_config(cfg, args)
    config = _train_config(cfg, args)
    x, t_star = read_dataset_csv(args.dataset)
    if x.shape[0] < 10:
        raise ConfigError(f"{args.dataset}: need at least 10 rows, found {x.shape[0]}")
    out = _out_dir(args)
    model = _build_model(args.arch, x.shape[1], config)
    if args.arch == "mlp":
        result = train_mlp_baseline(x, t_star, spec, config)
        blob = save_mlp(result.model)
    else:
        result = train(model, x, t_star, spec, config)
        blob = save_network(result.model)
    (out / "checkpoint.json").write_bytes(blob)
    write_csv(out / "history.csv", HISTORY_COLUMNS, history_rows(result.history))
    _manifest(
        out,
        "train",
        args,
        [args.dataset] + ([args.config] if args.config else []),
        ["checkpoint.json", "history.csv"],
        started,
    )
    print(
        f"trained {args.arch} for {len(result.history)} epochs; "
        f"best validation loss {result.best_val:.6g} at epoch {result.best_epoch}"
    )
    return EXIT_OK


def load_model_file(path):
    """Load either a KAN or MLP checkpoint based on its model field."""
    data = Path(path).read_bytes()
    import json

    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise CheckpointError(f"{path}: checkpoint root must be an object")
    model = doc.get("model", "kan")
    if model == "mlp":
        return MlpNetwork.from_checkpoint_dict(doc)
    if doc.get("format_version") != 1:
        raise CheckpointError(f"{path}: format_version: expected 1, got {doc.get('format_version')!r}")
    return KanNetwork.from_checkpoint_dict(doc)


def cmd_eval(args) -> int:
    started = _now()
    cfg = _load_config(args.config)
    spec = _loss_from_config(cfg)
    model = load_model_file(args.checkpoint)
    x, t_star = read_dataset_csv(args.dataset)
    if x.shape[1] != model.n_in:
        raise ConfigError(
            f"{args.dataset}: has {x.shape[1]} features but checkpoint expects {model.n_in}"
        )
    out = _out_dir(args)
    metrics = evaluate_metrics(model, x, t_star, spec)
    dump_json(metrics, out / "metrics.json")
    _manifest(out, "eval", args, [args.checkpoint, args.dataset], ["metrics.json"], started)
    print(
        f"eval: rmse_log={metrics['rmse_log']:.6g} rmse_shift={metrics['rmse_shift']:.6g} "
        f"under_prediction_rate={metrics['under_prediction_rate']:.3f}"
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = _now()
    cfg = _load_config(args.config)
    scenario = _scenario_from_config(cfg)
    spec = _loss_from_config(cfg)
    net = None
    if args.mode == MODE_HYBRID:
        if not args.checkpoint:
            raise ConfigError("hybrid mode requires --checkpoint")
        net = load_model_file(args.checkpoint)
    out = _out_dir(args)
    result = run_governed_mission(scenario, args.mode, net=net, spec=spec)
    write_csv(
        out / "trajectory.csv",
        TRAJECTORY_COLUMNS,
        trajectory_csv_rows(result.times, result.states, result.controls, np.append(result.margins, result.margins[-1] if result.margins.size else 0.0)),
    )
    write_trace_csv(out / "trace.csv", result.trace)
    summary = {
        "mode": args.mode,
        "status": result.status,
        "mission_time": result.mission_time,
        "violations": result.violations,
        "oracle_calls": result.trace.oracle_rollouts,
        "verify_calls": result.trace.verify_rollouts,
        "nn_accept_rate": result.trace.nn_accept_rate,
        "governor_updates": len(result.trace.rows),
    }
    dump_json(summary, out / "summary.json")
    inputs = [p for p in (args.config, args.checkpoint) if p]
    _manifest(out, "simulate", args, inputs, ["trajectory.csv", "trace.csv", "summary.json"], started)
    print(
        f"simulate[{args.mode}]: {result.status} in {result.mission_time:.0f}s, "
        f"violations={result.violations}, oracle_calls={summary['oracle_calls']}, "
        f"nn_accept_rate={summary['nn_accept_rate']:.3f}"
    )
    return EXIT_OK


def cmd_report(args) -> int:
    started = _now()
    out = _out_dir(args)
    rows = []
    for path in args.inputs:
        header, body = read_csv(path)
        if not header:
            raise ConfigError(f"{path}: empty input")
        source = Path(path).name
        if header[0] == "update":  # governor trace
            step_col = 0
        elif header[0] == "epoch":  # training history
            step_col = 0
        elif header[0] == "t":  # trajectory
            step_col = 0
        else:
            raise ConfigError(f"{path}: unrecognized input (first column {header[0]!r})")
        for line in body:
            step = line[step_col]
            for col, val in zip(header, line):
                if col == header[step_col]:
                    continue
                rows.append((source, step, col, val))
    write_csv(out / "report.csv", ["source", "step", "variable", "value"], rows)
    _manifest(out, "report", args, list(args.inputs), ["report.csv"], started)
    print(f"report: {len(rows)} observations from {len(args.inputs)} inputs -> {out / 'report.csv'}")
    return EXIT_OK


# ---- argument parsing -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kanshift",
        description="Constraint-informed KAN approximation of a rendezvous time-shift governor",
    )
    parser.add_argument("--version", action="version", version=f"kanshift {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="run exact-governed missions and write a training dataset")
    p.add_argument("--config", help="JSON config with scenario/family sections")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=2000, help="number of samples to emit")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="fit a shift regressor on a generated dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--arch", choices=ARCH_CHOICES, default="kan-bspline")
    p.add_argument("--config", help="JSON config with train/loss sections")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--grid-size", dest="grid_size", type=int, help="spline intervals per edge")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--theta-c", dest="theta_c", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="report metrics for a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", help="JSON config with a loss section")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="fly one governed mission and export its artifacts")
    p.add_argument("--config", help="JSON config with a scenario section")
    p.add_argument("--mode", choices=(MODE_EXACT, MODE_HYBRID), default=MODE_EXACT)
    p.add_argument("--checkpoint", help="trained model (required for hybrid mode)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="merge traces/histories into a tidy long-format CSV")
    p.add_argument("inputs", nargs="+", help="trace, history, or trajectory CSV files")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ScenarioError, CheckpointError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except GovernorInfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


def entry() -> None:
    raise SystemExit(main())
