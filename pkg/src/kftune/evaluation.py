"""Metrics, paired statistics, diagnostics, and report generation for
estimation-vs-optimization experiments.

Conventions: the scalar MSE of a model is the grand mean of the squared
position error over every (target, step); NLL is reported both as the grand
sum over post-prediction steps and as a mean. Paired statistics always use
per-target step-means, computed on identical observation realizations
(enforced via the dataset content hash).
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import TrainingDataset
from .errors import ContractError, InsufficientDataError, UnavailableError
from .filters import (
    FilterConfig,
    RADAR_KINDS,
    init_state,
    predict,
    rollout,
    update,
)

MODEL_COLUMNS = ["KF", "OKF", "KFp", "KFp-oracle", "OKFp", "EKF", "OEKF", "EKFp", "OEKFp"]


def mse(predictions: np.ndarray, truth: np.ndarray) -> float:
    """Mean over steps of the squared error norm between aligned sequences."""
    predictions = np.asarray(predictions, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if predictions.shape != truth.shape:
        raise ContractError(f"shape mismatch {predictions.shape} vs {truth.shape}")
    diff = predictions - truth
    if diff.ndim == 1:
        diff = diff[:, None]
    return float(np.mean(np.sum(diff**2, axis=1)))


def nll_total(nll_steps) -> float:
    """Total NLL over post-prediction steps (a plain sum over the per-step
    values produced by the rollout)."""
    arr = np.concatenate([np.asarray(a, dtype=float).ravel() for a in nll_steps])
    return float(np.sum(arr))


def paired_z(errors_a, errors_b) -> float:
    """z = mean(d) / std(d) * sqrt(N) over paired error differences
    d = errors_a - errors_b (sample std, N-1). Positive z means a is worse.
    Degenerate zero-spread differences yield +/-inf (or 0 when also
    zero-mean)."""
    a = np.asarray(errors_a, dtype=float)
    b = np.asarray(errors_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ContractError("paired_z needs two equal-length 1-D error lists")
    if len(a) < 2:
        raise ContractError("paired_z needs at least 2 paired samples")
    d = a - b
    mean = float(np.mean(d))
    std = float(np.std(d, ddof=1))
    if std == 0.0:
        return 0.0 if mean == 0.0 else float(np.sign(mean)) * float("inf")
    return mean / std * np.sqrt(len(d))


@dataclass
class ModelEval:
    """One model's errors on one dataset (paired-design friendly).

    Paired statistics use the per-target RMSE: per-target squared errors are
    heavy-tailed (a single diverging rollout can dominate their spread), and
    the root compresses exactly that tail while ordering targets identically.
    """

    name: str
    mse: float
    nll_total: float
    nll_mean: float
    per_target_mse: np.ndarray
    per_target_nll: np.ndarray
    dataset_hash: str
    runtime_s: float = 0.0

    @property
    def per_target_rmse(self) -> np.ndarray:
        return np.sqrt(self.per_target_mse)


def evaluate_model(
    name: str,
    dataset: TrainingDataset,
    cfg: FilterConfig,
    Q: np.ndarray,
    R: np.ndarray,
    mse_phase: str = "update",
    dataset_hash: str | None = None,
) -> ModelEval:
    """Run the plain filter over every target and collect the error metrics."""
    t0 = time.perf_counter()
    key = "sq_update" if mse_phase == "update" else "sq_pred"
    sq_sum = 0.0
    n_steps = 0
    nll_sum = 0.0
    per_mse, per_nll = [], []
    for target in dataset.targets:
        out = rollout(target.states, target.observations(), cfg, Q, R)
        sq = out[key]
        sq_sum += float(np.sum(sq))
        nll_sum += float(np.sum(out["nll_pred"]))
        n_steps += len(sq)
        per_mse.append(float(np.mean(sq)))
        per_nll.append(float(np.mean(out["nll_pred"])))
    return ModelEval(
        name=name,
        mse=sq_sum / n_steps,
        nll_total=nll_sum,
        nll_mean=nll_sum / n_steps,
        per_target_mse=np.array(per_mse),
        per_target_nll=np.array(per_nll),
        dataset_hash=dataset_hash if dataset_hash is not None else dataset.content_hash(),
        runtime_s=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# diagnostics


def doppler_inflation_estimate(
    dataset: TrainingDataset,
    cfg: FilterConfig,
    Q: np.ndarray,
    R: np.ndarray,
    R_true: np.ndarray | None = None,
    R_estimated: np.ndarray | None = None,
    R_optimized: np.ndarray | None = None,
) -> dict:
    """Empirical effective-noise inflation of the Doppler channel.

    Runs the filter and collects d_t = (u_est - u_true)·v_true, the Doppler
    error induced by linearizing at an estimated position; C = Var(d). The
    effective observation noise is then R_true + diag(0, 0, 0, C). When an
    estimated and an optimized R are supplied, also reports whether the
    optimizer moved the Doppler variance in the direction C predicts.
    """
    if cfg.obs.kind not in RADAR_KINDS:
        raise UnavailableError("Doppler inflation needs a radar observation model")
    samples = []
    for target in dataset.targets:
        observations = target.observations()
        s = init_state(observations[0], cfg)
        for t in range(1, len(observations)):
            s = predict(s, cfg.motion, Q)
            z = observations[t]
            eval_pos = z.z[:3] if cfg.obs.h_eval == "observation" else s.x[:3]
            u_est = eval_pos / np.linalg.norm(eval_pos)
            p_true = target.states[t, :3]
            u_true = p_true / np.linalg.norm(p_true)
            samples.append(float((u_est - u_true) @ target.states[t, 3:]))
            s, _ = update(s, z, cfg.obs, R)
    C = float(np.var(samples))
    out = {"C": C, "n_samples": len(samples)}
    if R_true is not None:
        R_tilde = np.array(R_true, dtype=float)
        R_tilde[3, 3] += C
        out["R_tilde"] = R_tilde
    if R_estimated is not None and R_optimized is not None:
        shift = float(R_optimized[3, 3] - R_estimated[3, 3])
        out["doppler_shift"] = shift
        out["shift_sign_matches"] = bool(np.sign(shift) == np.sign(C)) if C != 0 else shift == 0
    return out


def residual_autocorrelation(series: np.ndarray, lag: int = 1) -> tuple[np.ndarray, float]:
    """Standard lag-k autocorrelation per axis, with the white-noise 95%
    confidence half-width 1.96/sqrt(T)."""
    series = np.asarray(series, dtype=float)
    if series.ndim == 1:
        series = series[:, None]
    T = series.shape[0]
    if T < 30:
        raise InsufficientDataError(f"need at least 30 samples, got {T}")
    if not 0 < lag < T:
        raise ContractError("lag must be in (0, T)")
    centered = series - series.mean(axis=0)
    denom = np.sum(centered**2, axis=0)
    num = np.sum(centered[:-lag] * centered[lag:], axis=0)
    return num / denom, 1.96 / np.sqrt(T)


def polar_dependence_diagnostic(
    states: np.ndarray, obs: np.ndarray, lag: int = 1
) -> tuple[np.ndarray, float]:
    """Whiteness check of the per-axis Cartesian observation noise over one
    long trajectory. Independent draws are linearly uncorrelated even when
    the polar anisotropy makes them statistically dependent, so the test is
    on the SQUARED residuals (McLeod-Li style): their lag-k autocorrelation
    leaves the white-noise band exactly when the noise magnitude carries
    structure across steps."""
    residuals = obs[:, :3] - states[:, :3]
    return residual_autocorrelation(residuals**2, lag)


# ---------------------------------------------------------------------------
# reports


@dataclass
class TuneReport:
    benchmark: str
    models: list[ModelEval]
    dataset_hash: str
    z_pairs: dict[str, float] = field(default_factory=dict)
    rmse_ratios: dict[str, float] = field(default_factory=dict)
    mse_variance_estimated: float = float("nan")
    mse_variance_optimized: float = float("nan")
    runtime_s: float = 0.0

    def model(self, name: str) -> ModelEval:
        for m in self.models:
            if m.name == name:
                return m
        raise KeyError(name)


def build_report(benchmark: str, models: list[ModelEval]) -> TuneReport:
    """Assemble the paired comparison report. All models must have been
    evaluated on the identical dataset (hash-checked) with equal-length
    per-target lists."""
    if not models:
        raise ContractError("no models to report")
    ref = models[0]
    for m in models[1:]:
        if m.dataset_hash != ref.dataset_hash:
            raise ContractError(
                f"unpaired evaluation: {m.name} ran on a different dataset than {ref.name}"
            )
        if len(m.per_target_mse) != len(ref.per_target_mse):
            raise ContractError("per-target error lists differ in length")
    report = TuneReport(benchmark, models, ref.dataset_hash)
    by_name = {m.name: m for m in models}
    for a in models:
        for b in models:
            if a.name < b.name:
                report.z_pairs[f"{a.name}|{b.name}"] = paired_z(
                    a.per_target_rmse, b.per_target_rmse
                )
    estimated, optimized = [], []
    for base in ("KF", "KFp", "EKF", "EKFp"):
        opt = "O" + base
        if base in by_name and opt in by_name:
            report.rmse_ratios[base] = float(
                np.sqrt(by_name[base].mse) / np.sqrt(by_name[opt].mse)
            )
            estimated.append(by_name[base].mse)
            optimized.append(by_name[opt].mse)
    if len(estimated) >= 2:
        report.mse_variance_estimated = float(np.var(estimated, ddof=1))
        report.mse_variance_optimized = float(np.var(optimized, ddof=1))
    report.runtime_s = float(sum(m.runtime_s for m in models))
    return report


def export_report(report: TuneReport, out_dir) -> dict[str, Path]:
    """Write report.json (full content), report.csv (per-model summary), and
    rmse_ratios.txt plot data. Returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}

    doc = {
        "benchmark": report.benchmark,
        "dataset_hash": report.dataset_hash,
        "z_pairs": report.z_pairs,
        "rmse_ratios": report.rmse_ratios,
        "mse_variance_estimated": report.mse_variance_estimated,
        "mse_variance_optimized": report.mse_variance_optimized,
        "runtime_s": report.runtime_s,
        "models": [
            {
                "name": m.name,
                "mse": m.mse,
                "nll_total": m.nll_total,
                "nll_mean": m.nll_mean,
                "per_target_mse": m.per_target_mse.tolist(),
                "per_target_nll": m.per_target_nll.tolist(),
                "dataset_hash": m.dataset_hash,
                "runtime_s": m.runtime_s,
            }
            for m in report.models
        ],
    }
    paths["json"] = out_dir / "report.json"
    with open(paths["json"], "w") as fh:
        json.dump(doc, fh, indent=1)

    paths["csv"] = out_dir / "report.csv"
    with open(paths["csv"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "mse", "nll_total", "nll_mean", "runtime_s"])
        for m in report.models:
            writer.writerow([m.name, repr(m.mse), repr(m.nll_total), repr(m.nll_mean), repr(m.runtime_s)])

    paths["rmse_ratios"] = out_dir / "rmse_ratios.txt"
    with open(paths["rmse_ratios"], "w") as fh:
        for base, ratio in report.rmse_ratios.items():
            fh.write(f"{base} {ratio!r}\n")
    return paths


def load_report(path) -> TuneReport:
    """Reparse an exported report.json into a TuneReport."""
    with open(path) as fh:
        doc = json.load(fh)
    models = [
        ModelEval(
            name=m["name"],
            mse=m["mse"],
            nll_total=m["nll_total"],
            nll_mean=m["nll_mean"],
            per_target_mse=np.array(m["per_target_mse"]),
            per_target_nll=np.array(m["per_target_nll"]),
            dataset_hash=m["dataset_hash"],
            runtime_s=m.get("runtime_s", 0.0),
        )
        for m in doc["models"]
    ]
    report = TuneReport(doc["benchmark"], models, doc["dataset_hash"])
    report.z_pairs = doc["z_pairs"]
    report.rmse_ratios = doc["rmse_ratios"]
    report.mse_variance_estimated = doc["mse_variance_estimated"]
    report.mse_variance_optimized = doc["mse_variance_optimized"]
    report.runtime_s = doc["runtime_s"]
    return report


def export_accel_sweep(rows: list[tuple[float, float, str, float]], path) -> Path:
    """Error-vs-acceleration-range plot data: four columns
    (range_lo, range_hi, model, mse), one row per bar."""
    path = Path(path)
    with open(path, "w") as fh:
        for lo, hi, model, value in rows:
            fh.write(f"{lo} {hi} {model} {value!r}\n")
    return path
