"""Baseline noise determination: sample-covariance estimators of Q and R
from ground-truth data, and the oracle polar R read off the sensor config.
These are the baselines the gradient optimizer is compared against."""

from __future__ import annotations

import numpy as np

from .data import TrainingDataset
from .errors import InsufficientDataError, UnavailableError
from .filters import MotionModel, Observation, ObservationModel, observation_matrix, FilterState

__all__ = [
    "estimate_R",
    "estimate_Q",
    "oracle_R",
    "regularize_spd",
    "observation_residuals",
    "motion_residuals",
    "polar_of_state",
]


def polar_of_state(x: np.ndarray) -> np.ndarray:
    """(range, azimuth, elevation, Doppler) of one or many 6-D radar states."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    p, v = X[:, :3], X[:, 3:]
    r = np.linalg.norm(p, axis=1)
    az = np.arctan2(p[:, 1], p[:, 0])
    el = np.arcsin(np.clip(p[:, 2] / r, -1.0, 1.0))
    doppler = np.sum(p * v, axis=1) / r
    out = np.column_stack([r, az, el, doppler])
    return out[0] if single else out


def _wrap_angle(a: np.ndarray) -> np.ndarray:
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def observation_residuals(dataset: TrainingDataset, om: ObservationModel) -> np.ndarray:
    """Per-step observation residuals z_t - H x_t in the frame R lives in.

    Cartesian frame evaluates the Doppler row the way the tuned filter
    variant does (at the true state by default, at the observed position in
    observation mode; at the true state both the pseudo-linear and Jacobian
    rows reproduce the exact Doppler, so the kinds coincide). Polar frame
    compares the polar observation against the exact polar image of the true
    state, with the azimuth difference wrapped.
    """
    rows = []
    for target in dataset.targets:
        states, obs, obs_polar = target.states, target.obs, target.obs_polar
        if om.r_frame == "polar":
            truth = np.atleast_2d(polar_of_state(states))
            res = obs_polar - truth
            res[:, 1] = _wrap_angle(res[:, 1])
            rows.append(res)
        elif om.kind in ("doppler_pseudo", "doppler_jacobian"):
            eval_pos = obs[:, :3] if om.h_eval == "observation" else states[:, :3]
            u = eval_pos / np.linalg.norm(eval_pos, axis=1, keepdims=True)
            doppler_pred = np.sum(u * states[:, 3:], axis=1)
            res = np.column_stack([obs[:, :3] - states[:, :3], obs[:, 3] - doppler_pred])
            rows.append(res)
        else:
            H = observation_matrix(FilterState(states[0], _EYE6), Observation(obs[0]), om)
            rows.append(obs - states @ H.T)
    return np.concatenate(rows, axis=0)


_EYE6 = np.eye(6)


def motion_residuals(dataset: TrainingDataset, m: MotionModel) -> np.ndarray:
    """Per-step motion residuals x_{t+1} - F x_t."""
    rows = []
    for target in dataset.targets:
        s = target.states
        if len(s) >= 2:
            rows.append(s[1:] - s[:-1] @ m.F.T)
    if not rows:
        return np.zeros((0, m.F.shape[0]))
    return np.concatenate(rows, axis=0)


def _sample_cov(residuals: np.ndarray) -> np.ndarray:
    n = residuals.shape[0]
    if n < 1:
        raise InsufficientDataError("no residual samples")
    if n == 1:
        # a single centered residual is identically zero; the covariance is
        # the zero matrix (regularization makes it usable downstream)
        return np.zeros((residuals.shape[1], residuals.shape[1]))
    centered = residuals - residuals.mean(axis=0)
    return centered.T @ centered / (n - 1)


def regularize_spd(A: np.ndarray) -> np.ndarray:
    """Return A unchanged when it factors; otherwise add diagonal jitter
    (1e-9 * mean diagonal scale, with an absolute floor for the all-zero
    case) and escalate until the factorization succeeds."""
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    tr = float(np.trace(A))
    jitter = 1e-9 * (tr / n if tr > 0 else 1.0)
    for _ in range(40):
        try:
            np.linalg.cholesky(A)
            return A
        except np.linalg.LinAlgError:
            A = A + jitter * np.eye(n)
            jitter *= 10.0
    raise InsufficientDataError("covariance could not be regularized to SPD")


def estimate_R(dataset: TrainingDataset, om: ObservationModel) -> np.ndarray:
    """Sample covariance of the observation residuals, regularized to SPD."""
    return regularize_spd(_sample_cov(observation_residuals(dataset, om)))


def estimate_Q(dataset: TrainingDataset, m: MotionModel) -> np.ndarray:
    """Sample covariance of the motion residuals, regularized to SPD."""
    return regularize_spd(_sample_cov(motion_residuals(dataset, m)))


def oracle_R(sensor) -> np.ndarray:
    """The true polar noise covariance straight from the sensor config.
    Only exists when the sensor really generates i.i.d polar noise."""
    if sensor.noise_frame != "polar":
        raise UnavailableError(
            "oracle R requires polar sensor noise; this benchmark generates "
            f"{sensor.noise_frame!r} noise"
        )
    return np.diag(
        [
            sensor.sigma_range**2,
            sensor.sigma_az**2,
            sensor.sigma_el**2,
            sensor.sigma_doppler**2,
        ]
    )
