"""Command-line surface tying datasets, tuning, tracking, and reports together.

Commands:
  simulate  generate a benchmark dataset file
  estimate  sample-covariance (or oracle) noise parameters from a dataset
  tune      gradient-optimize the noise parameters
  eval      paired evaluation of parameter files on one test dataset
  compare   summarize/merge exported reports (refuses unpaired ones)
  track     run the multi-target solver over an episode

Exit codes: 0 success, 2 configuration errors, 3 data errors, 4 numeric
errors. The KFTUNE_OUT environment variable, when set, is the root that
relative output paths resolve against. Every command is reproducible from
its config file and seeds; outputs embed the inputs' content hashes.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import evaluation, mot, simulator, tracking
from .data import TrainingDataset, load_dataset, save_dataset
from .errors import (
    ConfigError,
    ContractError,
    DefinitenessError,
    InsufficientDataError,
    KftuneError,
    ParseError,
    ShapeError,
    SingularityError,
    TrainingError,
    UnavailableError,
)
from .estimation import estimate_Q, estimate_R, oracle_R
from .filters import FilterConfig, linear_variant, radar_variant, video_variant
from .optimizer import TrainConfig, tune, write_loss_curve

CONFIG_ERRORS = (ConfigError, UnavailableError)
DATA_ERRORS = (ParseError, InsufficientDataError, ContractError, FileNotFoundError)
NUMERIC_ERRORS = (DefinitenessError, TrainingError, SingularityError, ShapeError)

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


def _out_path(path) -> Path:
    path = Path(path)
    root = os.environ.get("KFTUNE_OUT")
    if root and not path.is_absolute():
        path = Path(root) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _filter_config(variant: str, dt: float = 1.0, h_eval: str = "state") -> FilterConfig:
    if variant in ("KF", "KFp", "EKF", "EKFp"):
        return radar_variant(variant, dt=dt, h_eval=h_eval)
    if variant == "video":
        return video_variant()
    if variant == "linear":
        return linear_variant(dt)
    raise ConfigError(f"unknown filter variant {variant!r}")


def _load_run_config(path) -> dict:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ConfigError("run config must be a YAML mapping")
    if doc.get("version", 1) != 1:
        raise ConfigError(f"unsupported config version {doc.get('version')!r}")
    return doc


def _dataset_from_config(doc: dict, base: Path) -> TrainingDataset:
    if "dataset" in doc:
        p = Path(doc["dataset"])
        if not p.is_absolute():
            p = base / p
        return load_dataset(p)
    if "manifest" in doc:
        p = Path(doc["manifest"])
        if not p.is_absolute():
            p = base / p
        return mot.dataset_from_manifest(p, doc.get("split", "train"))
    if "benchmark" in doc:
        b = doc["benchmark"]
        if isinstance(b, str):
            b = {"name": b}
        return _make_dataset(b["name"], int(b.get("targets", 100)), int(b.get("seed", 0)),
                             b.get("overrides") or {})
    raise ConfigError("run config needs one of: dataset, manifest, benchmark")


def _make_dataset(name: str, targets: int, seed: int, overrides: dict) -> TrainingDataset:
    if name == "Linear":
        return simulator.make_linear_dataset(targets, seed, **overrides)
    try:
        return simulator.make_dataset(name, targets, seed, **overrides)
    except ConfigError as exc:
        raise ConfigError(f"{exc}, Linear") from None


def _write_params(path: Path, Q, R, meta: dict) -> None:
    doc = dict(meta)
    doc["Q"] = np.asarray(Q).tolist()
    doc["R"] = np.asarray(R).tolist()
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def _read_params(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("Q", "R", "variant"):
        if key not in doc:
            raise ParseError(f"params file {path} missing {key!r}")
    doc["Q"] = np.array(doc["Q"], dtype=float)
    doc["R"] = np.array(doc["R"], dtype=float)
    return doc


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    ds = _make_dataset(args.benchmark, args.targets, args.seed, {})
    out = _out_path(args.out)
    save_dataset(ds, out)
    lengths = [len(t) for t in ds.targets]
    print(f"wrote {out}: {len(ds)} targets, mean length {np.mean(lengths):.1f} steps, "
          f"hash {ds.content_hash()[:12]}")
    return 0


def _tuning_filter_config(doc: dict, dataset: TrainingDataset) -> FilterConfig:
    variant = doc.get("variant", "KF")
    if dataset.domain == "video" and variant != "video":
        raise ConfigError("video datasets require variant: video")
    if dataset.domain == "linear" and variant != "linear":
        raise ConfigError("linear datasets require variant: linear")
    return _filter_config(variant, dt=dataset.dt, h_eval=doc.get("h_eval", "state"))


def cmd_estimate(args) -> int:
    doc = _load_run_config(args.config)
    base = Path(args.config).parent
    dataset = _dataset_from_config(doc, base)
    cfg = _tuning_filter_config(doc, dataset)
    mode = doc.get("mode", "estimate")
    Q = estimate_Q(dataset, cfg.motion)
    if mode == "oracle":
        radar_meta = dataset.meta.get("radar")
        if dataset.meta.get("noise_frame") != "polar" or radar_meta is None:
            raise UnavailableError("oracle R is only available on polar-noise benchmarks")
        R = oracle_R(simulator.RadarConfig(**radar_meta))
        if cfg.obs.r_frame != "polar":
            raise ConfigError("oracle R requires a polar-R variant (KFp or EKFp)")
    elif mode == "estimate":
        R = estimate_R(dataset, cfg.obs)
    else:
        raise ConfigError(f"estimate command cannot run mode {mode!r}")
    out = _out_path(Path(doc.get("out", ".")) / f"params_{mode}.json")
    _write_params(out, Q, R, {
        "variant": doc.get("variant", "KF"),
        "mode": mode,
        "h_eval": doc.get("h_eval", "state"),
        "mse_phase": doc.get("mse_phase", "predict" if dataset.domain == "video" else "update"),
        "train_dataset_hash": dataset.content_hash(),
        "benchmark": dataset.benchmark,
    })
    print(f"wrote {out}")
    return 0


def cmd_tune(args) -> int:
    doc = _load_run_config(args.config)
    base = Path(args.config).parent
    dataset = _dataset_from_config(doc, base)
    cfg = _tuning_filter_config(doc, dataset)
    train_doc = dict(doc.get("train") or {})
    if dataset.domain == "video":
        train_doc.setdefault("w_nll", 0.0)
        train_doc.setdefault("mse_phase", "predict")
    tc = TrainConfig(**train_doc)
    result = tune(dataset, cfg, tc, jobs=args.jobs)
    out_dir = _out_path(Path(doc.get("out", ".")) / "params_optimized.json").parent
    _write_params(out_dir / "params_optimized.json", result.Q, result.R, {
        "variant": doc.get("variant", "KF"),
        "mode": "optimize",
        "h_eval": doc.get("h_eval", "state"),
        "mse_phase": tc.mse_phase,
        "train_dataset_hash": dataset.content_hash(),
        "benchmark": dataset.benchmark,
        "train_config": dataclasses.asdict(tc),
        "best_step": result.best_step,
    })
    write_loss_curve(out_dir / "loss_curve.csv", result.curve)
    print(f"wrote {out_dir / 'params_optimized.json'} and loss_curve.csv "
          f"(best step {result.best_step}, val loss {result.best_val_loss:.4g})")
    return 0


def cmd_eval(args) -> int:
    dataset = load_dataset(args.dataset)
    ds_hash = dataset.content_hash()
    models = []
    for p in args.models:
        doc = _read_params(p)
        cfg = _filter_config(doc["variant"], dt=dataset.dt, h_eval=doc.get("h_eval", "state"))
        name = doc.get("name") or f"{'O' if doc.get('mode') == 'optimize' else ''}{doc['variant']}"
        if doc.get("mode") == "oracle":
            name = f"{doc['variant']}-oracle"
        phase = doc.get("mse_phase", "update")
        models.append(
            evaluation.evaluate_model(name, dataset, cfg, doc["Q"], doc["R"],
                                      mse_phase=phase, dataset_hash=ds_hash)
        )
    report = evaluation.build_report(dataset.benchmark, models)
    out_dir = _out_path(Path(args.out) / "report.json").parent
    paths = evaluation.export_report(report, out_dir)
    for m in report.models:
        print(f"{m.name:>12}: mse {m.mse:.2f}  nll_mean {m.nll_mean:.3f}")
    for pair, z in report.z_pairs.items():
        print(f"z[{pair}] = {z:.2f}")
    print(f"wrote {paths['json']}")
    return 0


def cmd_compare(args) -> int:
    reports = [evaluation.load_report(Path(d) / "report.json") for d in args.report]
    ref = reports[0]
    for other in reports[1:]:
        if other.dataset_hash != ref.dataset_hash:
            raise ContractError(
                "reports were produced on different datasets; refusing unpaired comparison"
            )
    merged = evaluation.build_report(ref.benchmark, [m for r in reports for m in r.models])
    print(f"benchmark: {merged.benchmark}  ({len(merged.models)} models)")
    for m in sorted(merged.models, key=lambda m: m.mse):
        print(f"{m.name:>12}: mse {m.mse:.2f}")
    for base, ratio in merged.rmse_ratios.items():
        print(f"rmse ratio {base}/O{base} = {ratio:.3f}")
    return 0


def cmd_track(args) -> int:
    dataset = load_dataset(args.dataset)
    params = _read_params(args.params)
    with open(args.episode_config) as fh:
        ep = yaml.safe_load(fh) or {}
    cfg = _filter_config(params["variant"], dt=dataset.dt, h_eval=params.get("h_eval", "state"))
    solver_cfg = tracking.SolverConfig(
        filter_cfg=cfg,
        Q=params["Q"],
        R=params["R"],
        gate_maha2=float(ep.get("gate_maha2", 25.0)),
        max_misses=int(ep.get("max_misses", 3)),
    )
    episode = tracking.build_episode(
        dataset, seed=int(ep.get("seed", 0)), max_offset=int(ep.get("max_offset", 0))
    )
    log = tracking.run_episode(episode, solver_cfg)
    out_dir = _out_path(Path(args.out) / "episode.jsonl").parent
    tracking.export_episode_log(log, out_dir / "episode.jsonl")
    purity = tracking.assignment_purity(log)
    with open(out_dir / "purity.json", "w") as fh:
        json.dump({str(k): v for k, v in sorted(purity.items())}, fh, indent=1)
    print(f"tracked {len(dataset)} targets over {len(episode)} steps; "
          f"mean purity {np.mean(list(purity.values())):.3f}")
    print(f"wrote {out_dir / 'episode.jsonl'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kftune", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a benchmark dataset")
    p.add_argument("--benchmark", required=True)
    p.add_argument("--targets", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("estimate", help="sample-covariance / oracle noise parameters")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_estimate)

    p = sub.add_parser("tune", help="gradient-optimize noise parameters")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=os.cpu_count())
    p.set_defaults(fn=cmd_tune)

    p = sub.add_parser("eval", help="paired evaluation of parameter files")
    p.add_argument("--models", nargs="+", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", default="eval_out")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("compare", help="summarize exported reports")
    p.add_argument("--report", nargs="+", required=True)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("track", help="run the multi-target solver")
    p.add_argument("--dataset", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--episode-config", required=True)
    p.add_argument("--out", default="track_out")
    p.set_defaults(fn=cmd_track)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NUMERIC_ERRORS as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except KftuneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
