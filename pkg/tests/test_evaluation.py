"""Metrics, paired statistics, diagnostics, report round trips."""

import numpy as np
import pytest

from kftune import evaluation, simulator
from kftune.data import TargetRecord, TrainingDataset
from kftune.errors import ContractError, InsufficientDataError, UnavailableError
from kftune.evaluation import (
    MODEL_COLUMNS,
    build_report,
    doppler_inflation_estimate,
    evaluate_model,
    export_report,
    load_report,
    mse,
    nll_total,
    paired_z,
    polar_dependence_diagnostic,
    residual_autocorrelation,
)
from kftune.filters import linear_variant, radar_variant


def test_mse_examples():
    truth = np.zeros((10, 3))
    assert mse(truth, truth) == 0.0
    shifted = truth.copy()
    shifted[:, 1] += 2.0
    assert mse(shifted, truth) == pytest.approx(4.0)
    with pytest.raises(ContractError):
        mse(np.zeros((3, 2)), np.zeros((4, 2)))


def test_mse_agrees_with_model_evaluation():
    ds = simulator.make_linear_dataset(3, seed=0)
    cfg = linear_variant()
    Q = np.array(ds.meta["Q_true"])
    R = np.array(ds.meta["R_true"])
    ev = evaluate_model("m", ds, cfg, Q, R)
    from kftune.filters import rollout

    sq = np.concatenate(
        [rollout(t.states, t.observations(), cfg, Q, R)["sq_update"] for t in ds.targets]
    )
    assert ev.mse == pytest.approx(float(np.mean(sq)), rel=1e-12)


def test_nll_total_sums_steps():
    assert nll_total([np.array([1.0, 2.0]), np.array([3.0])]) == pytest.approx(6.0)


def test_paired_z_examples():
    assert paired_z(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0
    assert paired_z(np.array([2.0, 0.0]), np.array([0.0, 0.0])) == pytest.approx(1.0)
    assert paired_z(np.array([3.0, 3.0]), np.array([1.0, 1.0])) == float("inf")
    assert paired_z(np.array([1.0, 1.0]), np.array([1.0, 1.0])) == 0.0
    with pytest.raises(ContractError):
        paired_z(np.array([1.0]), np.array([1.0]))


def stationary_doppler_dataset(vel_scale: float) -> TrainingDataset:
    # fixed positions with prescribed velocities; observation noise fixed so
    # the linearization-point errors are identical across velocity scales
    rng = np.random.default_rng(42)
    targets = []
    for _ in range(20):
        T = 40
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        pos = 3000.0 * direction
        vel = vel_scale * rng.normal(size=3) * 50.0
        states = np.tile(np.concatenate([pos, vel]), (T, 1))
        noise = rng.normal(0, 100.0, (T, 3))
        doppler = (states[:, :3] * states[:, 3:]).sum(axis=1) / np.linalg.norm(pos)
        obs = np.column_stack([states[:, :3] + noise, doppler])
        targets.append(TargetRecord(states, obs, None))
    return TrainingDataset(targets, benchmark="fixture")


def test_doppler_inflation_zero_velocity_gives_zero_C():
    ds = stationary_doppler_dataset(0.0)
    cfg = radar_variant("KF", h_eval="observation")
    out = doppler_inflation_estimate(ds, cfg, np.eye(6), np.diag([1e4, 1e4, 1e4, 25.0]))
    assert out["C"] == pytest.approx(0.0, abs=1e-12)


def test_doppler_inflation_scales_quadratically_with_velocity():
    cfg = radar_variant("KF", h_eval="observation")
    R = np.diag([1e4, 1e4, 1e4, 25.0])
    c1 = doppler_inflation_estimate(stationary_doppler_dataset(1.0), cfg, np.eye(6), R)["C"]
    c2 = doppler_inflation_estimate(stationary_doppler_dataset(2.0), cfg, np.eye(6), R)["C"]
    assert c2 / c1 == pytest.approx(4.0, rel=1e-9)


def test_doppler_inflation_builds_r_tilde_and_checks_sign():
    ds = stationary_doppler_dataset(1.0)
    cfg = radar_variant("KF", h_eval="observation")
    R_true = np.diag([1e4, 1e4, 1e4, 25.0])
    R_opt = R_true.copy()
    R_opt[3, 3] = 60.0
    out = doppler_inflation_estimate(
        ds, cfg, np.eye(6), R_true, R_true=R_true, R_estimated=R_true, R_optimized=R_opt
    )
    assert out["C"] > 0
    assert out["R_tilde"][3, 3] == pytest.approx(25.0 + out["C"])
    assert out["shift_sign_matches"] is True


def test_doppler_inflation_unavailable_for_linear_model():
    ds = simulator.make_linear_dataset(2, seed=0)
    with pytest.raises(UnavailableError):
        doppler_inflation_estimate(ds, linear_variant(), np.eye(6), np.eye(3))


def test_autocorrelation_iid_within_band():
    rng = np.random.default_rng(123)
    series = rng.normal(size=(400, 3))
    rho, band = residual_autocorrelation(series)
    assert np.all(np.abs(rho) < band)


def test_autocorrelation_random_walk_near_one():
    rng = np.random.default_rng(7)
    series = np.cumsum(rng.normal(size=800))  # x[t] = x[t-1] + noise
    rho, _ = residual_autocorrelation(series)
    assert rho[0] > 0.95


def test_autocorrelation_short_series_rejected():
    with pytest.raises(InsufficientDataError):
        residual_autocorrelation(np.zeros(10))


def test_polar_dependence_outside_band_polar_inside_cartesian():
    for bench, expect_outside in (("Const_v", True), ("Toy", False)):
        cfg = simulator.preset(bench, turns=False, acceleration=False, length_steps=(800, 800))
        ds = simulator.make_dataset(cfg, 1, seed=4)
        rho, band = polar_dependence_diagnostic(ds.targets[0].states, ds.targets[0].obs)
        if expect_outside:
            assert np.any(np.abs(rho) > band)
        else:
            assert np.all(np.abs(rho) < band)


def small_paired_models(n=3):
    ds = simulator.make_linear_dataset(6, seed=1)
    cfg = linear_variant()
    Q = np.array(ds.meta["Q_true"])
    R = np.array(ds.meta["R_true"])
    return ds, [evaluate_model(f"m{i}", ds, cfg, Q, R) for i in range(n)]


def test_identical_models_give_unit_ratios_and_zero_z():
    ds = simulator.make_linear_dataset(6, seed=1)
    cfg = linear_variant()
    Q = np.array(ds.meta["Q_true"])
    R = np.array(ds.meta["R_true"])
    models = [
        evaluate_model(name, ds, cfg, Q, R) for name in ("KF", "OKF")
    ]
    report = build_report("Linear", models)
    assert report.rmse_ratios["KF"] == pytest.approx(1.0)
    assert report.z_pairs["KF|OKF"] == 0.0


def test_report_refuses_unpaired_models():
    _, models = small_paired_models(2)
    models[1].dataset_hash = "different"
    with pytest.raises(ContractError):
        build_report("x", models)


def test_standard_model_columns():
    assert MODEL_COLUMNS == [
        "KF", "OKF", "KFp", "KFp-oracle", "OKFp", "EKF", "OEKF", "EKFp", "OEKFp"
    ]


def test_report_export_reparse_round_trip(tmp_path):
    _, models = small_paired_models(3)
    report = build_report("Linear", models)
    paths = export_report(report, tmp_path)
    back = load_report(paths["json"])
    assert back.benchmark == report.benchmark
    assert back.dataset_hash == report.dataset_hash
    assert back.z_pairs == report.z_pairs
    for a, b in zip(report.models, back.models):
        assert a.name == b.name and a.mse == b.mse
        np.testing.assert_array_equal(a.per_target_mse, b.per_target_mse)
    assert paths["csv"].exists() and paths["rmse_ratios"].exists()


def test_accel_sweep_plotdata(tmp_path):
    rows = [(0.0, 24.0, "KF", 123.4), (0.0, 24.0, "OKF", 100.0)]
    path = evaluation.export_accel_sweep(rows, tmp_path / "sweep.txt")
    lines = path.read_text().splitlines()
    assert lines[0].split()[:3] == ["0.0", "24.0", "KF"]
