"""Estimation vs optimization across baselines, with a paired report.

Runs one polar benchmark with all four filter baselines (KF/EKF with
Cartesian or polar R), the oracle-R variant, and their optimized twins,
then builds the paired comparison report. Two findings to look for:

  * every optimized model beats its estimated twin (RMSE ratios > 1);
  * the spread across baselines shrinks under optimization (robustness to
    the design decisions).

Runtime: a few minutes.
"""

from pathlib import Path

from kftune import simulator
from kftune.estimation import estimate_Q, estimate_R, oracle_R
from kftune.evaluation import build_report, evaluate_model, export_report
from kftune.filters import radar_variant
from kftune.optimizer import TrainConfig, tune

BENCH = "Const_v"
train = simulator.make_dataset(BENCH, 100, seed=21)
test = simulator.make_dataset(BENCH, 200, seed=210)
test_hash = test.content_hash()

models = []
for name in ("KF", "KFp", "EKF", "EKFp"):
    cfg = radar_variant(name)
    Q_est, R_est = estimate_Q(train, cfg.motion), estimate_R(train, cfg.obs)
    models.append(evaluate_model(name, test, cfg, Q_est, R_est, dataset_hash=test_hash))
    tuned = tune(train, cfg, TrainConfig(epochs=6, seed=3))
    models.append(
        evaluate_model("O" + name, test, cfg, tuned.Q, tuned.R, dataset_hash=test_hash)
    )
    print(f"{name}: estimated {models[-2].mse:,.0f} -> optimized {models[-1].mse:,.0f}")

cfg = radar_variant("KFp")
models.append(
    evaluate_model(
        "KFp-oracle", test, cfg, estimate_Q(train, cfg.motion),
        oracle_R(simulator.preset(BENCH).radar), dataset_hash=test_hash,
    )
)
print(f"KFp-oracle (true sensor noise): {models[-1].mse:,.0f}")

report = build_report(BENCH, models)
print("\nRMSE ratios estimated/optimized:", {k: round(v, 3) for k, v in report.rmse_ratios.items()})
print(f"MSE variance across baselines: estimated {report.mse_variance_estimated:,.0f}"
      f" -> optimized {report.mse_variance_optimized:,.0f}")

out = Path("demo_out") / "benchmark_sweep"
paths = export_report(report, out)
print("\nreport written to", paths["json"])
