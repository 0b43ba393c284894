"""Command-line pipelines: dataset generation, mining, augmentation, training,
evaluation and waypoint execution.

Every command resolves a ``PipelineConfig`` from, in increasing precedence,
the built-in defaults, a JSON file given by ``--config``, environment
variables and command-line flags, then writes its artifacts plus
``metrics.json`` and ``metrics.csv`` into ``--out``.

Environment overrides use the prefix ``WPI_`` followed by the section and the
key joined by a double underscore, e.g. ``WPI_TRAIN__LEARNING_RATE=0.001`` or
``WPI_SEED=3``. Values are parsed as JSON when possible and used as strings
otherwise.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .augment import AdmConfig, adm_augment_batch, synthesize_trajectories
from .datasets import collect_expert_records, pair_records
from .errors import InvalidInputError, ParseError
from .infer.evaluate import OraclePredictor, evaluate
from .infer.model import PredictorModel
from .infer.oracle import oracle_predict
from .infer.train import TrainConfig, train
from .io import load_dataset, load_json, load_jsonl, save_dataset, save_json, save_jsonl
from .mining import MiningConfig, mine_trajectory, precision_recall
from .primitives import Rollout, execute_waypoints
from .sdtw import SdtwConfig
from .sim.world import Simulator
from .tasks import TaskFamily, parse_task_id, task_success

ENV_PREFIX = "WPI_"


# configuration -----------------------------------------------------------

@dataclass(frozen=True)
class SimSection:
    n_objects: int = 4
    n_bins: int = 4
    episodes_per_task: int = 100
    pairings: int = 10
    heldout_tasks: int = 2
    split_seed: int = 0


@dataclass(frozen=True)
class MiningSection:
    d: int = 10
    delta: float = -0.05
    smooth_width: int = 5
    smooth_threshold: float = 0.5


@dataclass(frozen=True)
class AugmentSection:
    apply_probability: float = 0.5
    alpha_min: float = 0.3
    alpha_max: float = 1.0
    synth_count: int = 1000
    points_min: int = 1
    points_max: int = 3


@dataclass(frozen=True)
class SdtwSection:
    gamma: float = 0.001
    attribute_weight: float = 1.0


@dataclass(frozen=True)
class TrainSection:
    learning_rate: float = 5e-4
    batch_size: int = 30
    iterations: int = 50_000
    target_points: int = 40
    adm: bool = False  # redraw mixup on every batch using the augment section
    log_every: int = 1000


@dataclass(frozen=True)
class EvalSection:
    episodes_per_task: int = 20
    tasks: str = "heldout"  # heldout, train or all


@dataclass(frozen=True)
class PipelineConfig:
    sim: SimSection = field(default_factory=SimSection)
    mining: MiningSection = field(default_factory=MiningSection)
    augment: AugmentSection = field(default_factory=AugmentSection)
    sdtw: SdtwSection = field(default_factory=SdtwSection)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalSection = field(default_factory=EvalSection)
    seed: int = 0

    def __post_init__(self):
        # building the module configs revalidates their invariants
        self.mining_config()
        self.adm_config()
        self.train_config()
        if self.sim.heldout_tasks < 0 or self.sim.heldout_tasks >= self.sim.n_objects * self.sim.n_bins:
            raise InvalidInputError("heldout_tasks must leave at least one training task")
        if self.sim.episodes_per_task < 1 or self.sim.pairings < 1:
            raise InvalidInputError("episodes_per_task and pairings must be positive")
        if self.eval.tasks not in ("heldout", "train", "all"):
            raise InvalidInputError("eval.tasks must be heldout, train or all")
        if not 1 <= self.augment.points_min <= self.augment.points_max or self.augment.synth_count < 0:
            raise InvalidInputError("invalid synthesis settings")

    def mining_config(self) -> MiningConfig:
        m = self.mining
        return MiningConfig(d=m.d, delta=m.delta, smooth_width=m.smooth_width, smooth_threshold=m.smooth_threshold)

    def adm_config(self, rng_seed: Optional[int] = None) -> AdmConfig:
        a = self.augment
        return AdmConfig(a.alpha_min, a.alpha_max, a.apply_probability, self.seed if rng_seed is None else rng_seed)

    def train_config(self) -> TrainConfig:
        t = self.train
        return TrainConfig(learning_rate=t.learning_rate, batch_size=t.batch_size, iterations=t.iterations,
                           seed=self.seed, sdtw=SdtwConfig(self.sdtw.gamma, attribute_weight=self.sdtw.attribute_weight),
                           target_points=t.target_points, adm=self.adm_config() if t.adm else None,
                           log_every=t.log_every)

    def family(self) -> TaskFamily:
        return TaskFamily(n_objects=self.sim.n_objects, n_bins=self.sim.n_bins)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


_SECTION_TYPES = {
    "sim": SimSection, "mining": MiningSection, "augment": AugmentSection,
    "sdtw": SdtwSection, "train": TrainSection, "eval": EvalSection,
}


def _coerce(value, default, where):
    """Convert ``value`` to the type of ``default``, rejecting lossy conversions."""
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "1", "0"):
            return value.lower() in ("true", "1")
        raise InvalidInputError(f"{where}: expected a boolean, got {value!r}")
    if isinstance(default, int):
        if isinstance(value, bool) or not (isinstance(value, int) or (isinstance(value, float) and value.is_integer())):
            raise InvalidInputError(f"{where}: expected an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidInputError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise InvalidInputError(f"{where}: expected a string, got {value!r}")
        return value
    return value


def config_from_dict(data: dict, base: Optional[PipelineConfig] = None) -> PipelineConfig:
    """Overlay a (possibly partial) nested dict on ``base``; unknown keys are rejected."""
    base = base or PipelineConfig()
    if not isinstance(data, dict):
        raise InvalidInputError("configuration must be a JSON object")
    updates = {}
    for key, value in data.items():
        if key == "seed":
            updates["seed"] = _coerce(value, base.seed, "seed")
            continue
        if key not in _SECTION_TYPES:
            raise InvalidInputError(f"unknown configuration section {key!r}")
        if not isinstance(value, dict):
            raise InvalidInputError(f"section {key!r} must be an object")
        section = getattr(base, key)
        known = {f.name for f in dataclasses.fields(section)}
        changes = {}
        for k, v in value.items():
            if k not in known:
                raise InvalidInputError(f"unknown key {key}.{k}")
            changes[k] = _coerce(v, getattr(section, k), f"{key}.{k}")
        updates[key] = dataclasses.replace(section, **changes)
    return dataclasses.replace(base, **updates)


def env_overrides(environ) -> dict:
    out: dict = {}
    for name, raw in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        try:
            value = json.loads(raw)
        except ValueError:
            value = raw
        key = name[len(ENV_PREFIX):].lower()
        if key == "seed":
            out["seed"] = value
        elif "__" in key:
            section, sub = key.split("__", 1)
            out.setdefault(section, {})[sub] = value
        else:
            raise InvalidInputError(f"environment override {name} must look like {ENV_PREFIX}SECTION__KEY")
    return out


# flag -> (section, key)
_FLAG_MAP = {
    "sdtw_gamma": ("sdtw", "gamma"),
    "lr": ("train", "learning_rate"),
    "batch_size": ("train", "batch_size"),
    "iters": ("train", "iterations"),
    "heldout_tasks": ("sim", "heldout_tasks"),
    "episodes_per_task": ("sim", "episodes_per_task"),
    "pairings": ("sim", "pairings"),
    "d": ("mining", "d"),
    "delta": ("mining", "delta"),
    "smooth_width": ("mining", "smooth_width"),
    "adm_prob": ("augment", "apply_probability"),
    "alpha_min": ("augment", "alpha_min"),
    "alpha_max": ("augment", "alpha_max"),
    "synth_count": ("augment", "synth_count"),
    "eval_episodes": ("eval", "episodes_per_task"),
    "eval_tasks": ("eval", "tasks"),
}


def resolve_config(args, environ=None) -> PipelineConfig:
    environ = os.environ if environ is None else environ
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        cfg = config_from_dict(_read_json(args.config), cfg)
    env = env_overrides(environ)
    if env:
        cfg = config_from_dict(env, cfg)
    flags: dict = {}
    for attr, (section, key) in _FLAG_MAP.items():
        value = getattr(args, attr, None)
        if value is not None:
            flags.setdefault(section, {})[key] = value
    if getattr(args, "adm", None):
        flags.setdefault("train", {})["adm"] = True
    if getattr(args, "seed", None) is not None:
        flags["seed"] = args.seed
    return config_from_dict(flags, cfg) if flags else cfg


# helpers -----------------------------------------------------------------

class CliError(Exception):
    def __init__(self, kind, message, exit_code=1, path=None):
        super().__init__(message)
        self.kind = kind
        self.exit_code = exit_code
        self.path = path


def _require(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError("file-not-found", f"input file does not exist: {p}", exit_code=2, path=str(p))
    return p


def _read_json(path):
    p = _require(path)
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise ParseError(f"invalid JSON: {exc}", path=str(p)) from exc


def _flatten(prefix, value, out):
    if isinstance(value, dict):
        for k in sorted(value):
            _flatten(f"{prefix}.{k}" if prefix else str(k), value[k], out)
    elif isinstance(value, (list, tuple)):
        return  # sequences go to their own CSV files
    else:
        out.append((prefix, value))


def write_metrics(out_dir: Path, command: str, cfg: PipelineConfig, wall_time: float, metrics: dict,
                  tables: Optional[dict] = None) -> dict:
    """Write ``metrics.json`` and a flat ``metrics.csv``; ``tables`` become extra CSV files."""
    doc = {
        "command": command,
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "version": __version__,
        "wall_time": wall_time,
        "metrics": metrics,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "metrics.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    rows: list = []
    _flatten("", {k: v for k, v in doc.items() if k != "metrics"}, rows)
    _flatten("metrics", metrics, rows)
    with (out_dir / "metrics.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "value"])
        w.writerows(rows)
    for name, (header, data) in (tables or {}).items():
        with (out_dir / f"{name}.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(data)
    return doc


def _split(cfg: PipelineConfig):
    return cfg.family().split(cfg.sim.heldout_tasks, seed=cfg.sim.split_seed)


# commands ----------------------------------------------------------------

def cmd_gen_dataset(args, cfg: PipelineConfig, out: Path) -> tuple[dict, dict]:
    family = cfg.family()
    train_tasks, heldout = _split(cfg)
    records = collect_expert_records(family, train_tasks, cfg.sim.episodes_per_task, cfg.seed,
                                     cfg.mining_config(), jobs=args.jobs)
    samples = pair_records(records, cfg.sim.pairings, seed=cfg.seed)
    save_dataset(samples, out / "dataset.jsonl")
    manifest = {
        "train_tasks": [t.task_id for t in train_tasks],
        "heldout_tasks": [t.task_id for t in heldout],
        "episodes_per_task": cfg.sim.episodes_per_task,
        "pairings": cfg.sim.pairings,
        "records": len(records),
        "samples": len(samples),
        "config_hash": cfg.hash(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    expected = len(train_tasks) * cfg.sim.episodes_per_task
    return {"records": len(records), "samples": len(samples), "expert_success_rate": len(records) / expected,
            "train_tasks": len(train_tasks), "heldout_tasks": len(heldout)}, {}


def cmd_mine(args, cfg: PipelineConfig, out: Path) -> tuple[dict, dict]:
    logs = load_jsonl(_require(args.log), expect="robot_log")
    mcfg = cfg.mining_config()
    trajs = [mine_trajectory(log, mcfg) for log in logs]
    save_jsonl(trajs, out / "mined.jsonl")
    frames = sum(len(t) for t in trajs)
    held = sum(int(np.sum(t.attributes[:, 0] > 0.5)) for t in trajs)
    metrics = {"logs": len(trajs), "frames": frames, "attributed_frames": held}
    if args.truth:
        truth = _read_json(args.truth)
        labels = truth["labels"] if isinstance(truth, dict) else truth
        if len(labels) != len(trajs):
            raise InvalidInputError("truth file must hold one label sequence per log")
        pred = np.concatenate([t.attributes[:, 0] > 0.5 for t in trajs])
        gt = np.concatenate([np.asarray(lab, dtype=bool) for lab in labels])
        if pred.shape != gt.shape:
            raise InvalidInputError("truth labels do not match the log lengths")
        precision, recall = precision_recall(pred, gt)
        metrics.update(precision=precision, recall=recall)
    return metrics, {}


def cmd_augment(args, cfg: PipelineConfig, out: Path) -> tuple[dict, dict]:
    samples = load_dataset(_require(args.dataset))
    mixed = adm_augment_batch(samples, cfg.adm_config()) if cfg.augment.apply_probability > 0 else samples
    n_mixed = sum(1 for a, b in zip(mixed, samples) if a is not b)
    synth = synthesize_trajectories(cfg.augment.synth_count, cfg.augment.points_min, cfg.augment.points_max,
                                    family=cfg.family(), seed=cfg.seed)
    save_dataset(list(mixed) + synth, out / "augmented.jsonl")
    if synth:
        save_dataset(synth, out / "synthesized.jsonl")
    return {"input_samples": len(samples), "mixed_samples": n_mixed, "synthesized_samples": len(synth),
            "output_samples": len(mixed) + len(synth)}, {}


def cmd_train(args, cfg: PipelineConfig, out: Path) -> tuple[dict, dict]:
    data = []
    for path in args.dataset:
        data.extend(load_dataset(_require(path)))
    result = train(PredictorModel(seed=cfg.seed), data, cfg.train_config())
    result.model.save(out / "model.npz")
    curve = result.loss_curve
    n = len(curve)
    window = max(1, n // 10)
    metrics = {
        "samples": len(data),
        "iterations": n,
        "initial_loss": float(np.mean(curve[:window])) if n else None,
        "final_loss": float(np.mean(curve[-window:])) if n else None,
        "loss_curve": [float(x) for x in curve],
    }
    return metrics, {"loss_curve": (["iteration", "loss"], [(i, float(x)) for i, x in enumerate(curve)])}


def cmd_eval(args, cfg: PipelineConfig, out: Path) -> tuple[dict, dict]:
    train_tasks, heldout = _split(cfg)
    tasks = {"heldout": heldout, "train": train_tasks, "all": train_tasks + heldout}[cfg.eval.tasks]
    if args.oracle:
        predictor = OraclePredictor()
    elif args.model:
        predictor = PredictorModel.load(_require(args.model))
    else:
        raise InvalidInputError("eval needs --model or --oracle")
    report = evaluate(predictor, tasks, cfg.eval.episodes_per_task, cfg.family(), seed=cfg.seed, jobs=args.jobs,
                      mining=cfg.mining_config())
    rows = [(t, report.per_task[t], report.per_task_se[t]) for t in sorted(report.per_task)]
    return ({"predictor": "oracle" if args.oracle else "model", "tasks": sorted(report.per_task),
             "success_rate": report.mean, "success_se": report.se, "episodes": report.episodes,
             "per_task": report.per_task, "per_task_se": report.per_task_se},
            {"per_task": (["task", "success_rate", "se"], rows)})


def cmd_execute(args, cfg: PipelineConfig, out: Path) -> tuple[dict, dict]:
    scene = load_json(_require(args.scene))
    sim = Simulator()
    if args.waypoints:
        waypoints = load_json(_require(args.waypoints))
    elif args.task:
        waypoints = oracle_predict(scene, parse_task_id(args.task), sim)
    else:
        raise InvalidInputError("execute needs --waypoints or --task")
    result = execute_waypoints(Rollout(sim, sim.reset(scene)), waypoints)
    if result.log is not None:
        save_jsonl([result.log], out / "robot_log.jsonl")
    save_json(result.state.scene, out / "final_scene.json")
    metrics = {
        "waypoints": len(waypoints),
        "steps": int(result.state.step_count),
        "failures": [list(map(str, f)) for f in result.failures],
        "failure_count": len(result.failures),
        "final_ee": [float(x) for x in sim.ee_position(result.state)],
    }
    if args.task:
        metrics["success"] = bool(task_success(parse_task_id(args.task), result.state, sim))
    return metrics, {}


COMMANDS = {
    "gen-dataset": cmd_gen_dataset,
    "mine": cmd_mine,
    "augment": cmd_augment,
    "train": cmd_train,
    "eval": cmd_eval,
    "execute": cmd_execute,
}


def _common_options(with_defaults: bool) -> argparse.ArgumentParser:
    # subcommands suppress their defaults so flags given before the subcommand survive
    def default(value):
        return value if with_defaults else argparse.SUPPRESS

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=default(None), help="JSON pipeline configuration")
    common.add_argument("--seed", type=int, default=default(None), help="master seed (overrides the configuration)")
    common.add_argument("--jobs", type=int, default=default(1),
                        help="worker processes for episode generation/evaluation")
    common.add_argument("--out", default=default("out"), help="output directory (default: out)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options(with_defaults=False)
    parser = argparse.ArgumentParser(prog="waypoint-imitation", description=__doc__.split("\n\n")[0],
                                     parents=[_common_options(with_defaults=True)])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-dataset", parents=[common], help="collect expert episodes and pair them into samples")
    p.add_argument("--episodes-per-task", type=int)
    p.add_argument("--pairings", type=int)
    p.add_argument("--heldout-tasks", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--smooth-width", type=int)

    p = sub.add_parser("mine", parents=[common], help="label robot logs with the grasp attribute")
    p.add_argument("--log", required=True, help="JSONL file of robot_log records")
    p.add_argument("--truth", help="JSON list of per-frame ground-truth labels, one list per log")
    p.add_argument("--d", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--smooth-width", type=int)

    p = sub.add_parser("augment", parents=[common], help="demonstration mixup and trajectory synthesis")
    p.add_argument("--dataset", required=True)
    p.add_argument("--adm-prob", type=float)
    p.add_argument("--alpha-min", type=float)
    p.add_argument("--alpha-max", type=float)
    p.add_argument("--synth-count", type=int)

    p = sub.add_parser("train", parents=[common], help="fit the waypoint predictor")
    p.add_argument("--dataset", required=True, action="append", help="JSONL sample file (repeatable)")
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--sdtw-gamma", type=float)
    p.add_argument("--adm", action="store_true", help="redraw demonstration mixup on every batch")
    p.add_argument("--adm-prob", type=float)
    p.add_argument("--alpha-min", type=float)
    p.add_argument("--alpha-max", type=float)

    p = sub.add_parser("eval", parents=[common], help="success rate on fresh task instances")
    p.add_argument("--model", help="model checkpoint (.npz)")
    p.add_argument("--oracle", action="store_true", help="use ground-truth waypoints instead of a model")
    p.add_argument("--heldout-tasks", type=int)
    p.add_argument("--eval-episodes", type=int)
    p.add_argument("--eval-tasks", choices=("heldout", "train", "all"))

    p = sub.add_parser("execute", parents=[common], help="run waypoints through the primitives in one scene")
    p.add_argument("--scene", required=True, help="scene JSON record")
    p.add_argument("--waypoints", help="waypoints JSON record")
    p.add_argument("--task", help="task id such as pick_place:o0-b1; without --waypoints the oracle solves it")
    return parser


def _error(kind, message, code, path=None) -> int:
    doc = {"error": kind, "message": message}
    if path is not None:
        doc["path"] = path
    sys.stderr.write(json.dumps(doc) + "\n")
    return code


def main(argv=None, environ=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args, environ)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        metrics, tables = COMMANDS[args.command](args, cfg, out)
        wall = time.perf_counter() - start
        (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        write_metrics(out, args.command, cfg, wall, metrics, tables)
    except CliError as exc:
        return _error(exc.kind, str(exc), exc.exit_code, exc.path)
    except FileNotFoundError as exc:
        return _error("file-not-found", str(exc), 2, exc.filename)
    except ParseError as exc:
        return _error("parse-error", str(exc), 1, exc.path)
    except (ValueError, RuntimeError) as exc:
        return _error(type(exc).__name__, str(exc), 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
