"""Seeded radar-scenario generator.

Five named benchmark presets span combinations of: anisotropic motion
direction, polar vs Cartesian sensor noise, near vs far spawn region,
speed changes, and turns. Each target is an independent RNG stream derived
from (seed, target index), so datasets are reproducible and embarrassingly
parallel. Space is 3-D and homogeneous (no ground plane, no clutter).

Besides the maneuver presets there is a fully linear-Gaussian generator
(`make_linear_dataset`) where every textbook filter assumption holds; it is
the sanity regime in which noise estimation is provably near-optimal.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .data import TargetRecord, TrainingDataset
from .errors import ConfigError, SingularityError
from .estimation import polar_of_state
from .filters import Observation

__all__ = [
    "RadarConfig",
    "BenchmarkConfig",
    "preset",
    "preset_names",
    "generate_trajectory",
    "observe",
    "make_dataset",
    "make_linear_dataset",
    "linear_process_noise",
    "polar_to_cart",
]


@dataclass
class RadarConfig:
    """Sensor noise magnitudes. `noise_frame` selects where the i.i.d
    Gaussian noise is injected: "polar" perturbs (range, az, el, Doppler),
    "cartesian" perturbs (x, y, z, Doppler) directly (which is physically
    wrong for a radar, and deliberately so in the Toy preset)."""

    noise_frame: str = "polar"
    sigma_pos: float = 100.0  # m, cartesian frame
    sigma_range: float = 30.0  # m
    sigma_az: float = 0.01  # rad
    sigma_el: float = 0.01  # rad
    sigma_doppler: float = 5.0  # m/s

    def __post_init__(self):
        if self.noise_frame not in ("cartesian", "polar"):
            raise ConfigError(f"unknown noise frame {self.noise_frame!r}")


@dataclass
class BenchmarkConfig:
    """One tracking scenario. The boolean flags follow the benchmark
    property table; every numeric range is an explicit, overridable config
    value (the named presets are documented reconstructions)."""

    name: str = "custom"
    anisotropic: bool = False
    polar: bool = True
    uncentered: bool = False
    acceleration: bool = False
    turns: bool = False
    accel_during_turns: bool = False
    dt: float = 1.0
    length_steps: tuple[int, int] = (20, 100)
    speed_range: tuple[float, float] = (50.0, 300.0)
    accel_range: tuple[float, float] = (24.0, 48.0)
    straight_steps: tuple[int, int] = (5, 30)
    turn_steps: tuple[int, int] = (8, 20)
    turn_angle: tuple[float, float] = (np.pi / 6, 2 * np.pi / 3)
    spawn_radius_m: tuple[float, float] = (1_000.0, 10_000.0)
    elevation_std: float = 0.2  # rad, anisotropic initial direction
    p_horizontal_turn: float = 0.5
    p_accelerate: float = 0.5
    speed_limits: tuple[float, float] = (20.0, 600.0)
    radar: RadarConfig = field(default_factory=RadarConfig)


def _presets() -> dict[str, BenchmarkConfig]:
    cartesian = RadarConfig(noise_frame="cartesian")
    return {
        "Toy": BenchmarkConfig(
            name="Toy",
            polar=False,
            spawn_radius_m=(500.0, 3_000.0),
            radar=cartesian,
        ),
        "Close": BenchmarkConfig(
            name="Close",
            polar=True,
            spawn_radius_m=(500.0, 2_000.0),
        ),
        "Const_v": BenchmarkConfig(
            name="Const_v",
            polar=True,
            uncentered=True,
            anisotropic=True,
            turns=True,
            p_horizontal_turn=0.8,
        ),
        "Const_a": BenchmarkConfig(
            name="Const_a",
            polar=True,
            uncentered=True,
            anisotropic=True,
            turns=True,
            acceleration=True,
            p_horizontal_turn=0.8,
        ),
        "Free": BenchmarkConfig(
            name="Free",
            polar=True,
            uncentered=True,
            anisotropic=True,
            turns=True,
            acceleration=True,
            accel_during_turns=True,
            p_horizontal_turn=0.8,
        ),
    }


def preset_names() -> list[str]:
    return list(_presets().keys())


def preset(name: str, **overrides) -> BenchmarkConfig:
    """A named benchmark preset, optionally with field overrides."""
    table = _presets()
    if name not in table:
        raise ConfigError(f"unknown benchmark {name!r}; known: {', '.join(table)}")
    cfg = table[name]
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    x, y, z = axis
    K = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def _initial_direction(cfg: BenchmarkConfig, rng: np.random.Generator) -> np.ndarray:
    az = rng.uniform(0.0, 2.0 * np.pi)
    if cfg.anisotropic:
        el = np.clip(rng.normal(0.0, cfg.elevation_std), -1.5, 1.5)
    else:
        el = np.arcsin(rng.uniform(-1.0, 1.0))
    ce = np.cos(el)
    return np.array([ce * np.cos(az), ce * np.sin(az), np.sin(el)])


def _sphere_point(rng: np.random.Generator) -> np.ndarray:
    az = rng.uniform(0.0, 2.0 * np.pi)
    z = rng.uniform(-1.0, 1.0)
    s = np.sqrt(1.0 - z * z)
    return np.array([s * np.cos(az), s * np.sin(az), z])


def generate_trajectory(
    cfg: BenchmarkConfig, rng: np.random.Generator, return_segments: bool = False
):
    """Ground-truth states (T x 6) alternating straight segments and turns.

    Velocities are generated first; positions integrate them exactly
    (trapezoid, i.e. p[t+1] = p[t] + v[t] dt + a[t] dt^2 / 2 with
    a[t] = (v[t+1] - v[t]) / dt), so the kinematic invariant holds by
    construction. With return_segments=True also returns the per-step
    annotation: "straight", "accelerating", or "turn".
    """
    T = int(rng.integers(cfg.length_steps[0], cfg.length_steps[1] + 1))
    speed = rng.uniform(*cfg.speed_range)
    direction = _initial_direction(cfg, rng)
    spawn = rng.uniform(*cfg.spawn_radius_m) * _sphere_point(rng)

    velocities = np.empty((T, 3))
    velocities[0] = speed * direction
    segments = ["straight"] * T
    t = 1
    turning = False
    while t < T:
        if turning and cfg.turns:
            steps = int(rng.integers(cfg.turn_steps[0], cfg.turn_steps[1] + 1))
            angle = rng.uniform(*cfg.turn_angle) * (1 if rng.random() < 0.5 else -1)
            horizontal = rng.random() < cfg.p_horizontal_turn
            v = velocities[t - 1]
            if horizontal:
                axis = np.array([0.0, 0.0, 1.0])
            else:
                cross = np.cross(v, np.array([0.0, 0.0, 1.0]))
                norm = np.linalg.norm(cross)
                # pitch axis; arbitrary horizontal axis if v is vertical
                axis = cross / norm if norm > 1e-9 else np.array([1.0, 0.0, 0.0])
            rot = _rotation(axis, angle / steps)
            accel = 0.0
            if cfg.accel_during_turns and cfg.acceleration and rng.random() < cfg.p_accelerate:
                accel = rng.uniform(*cfg.accel_range) * (1 if rng.random() < 0.5 else -1)
            for _ in range(steps):
                if t >= T:
                    break
                v = rot @ v
                if accel:
                    new_speed = np.clip(
                        np.linalg.norm(v) + accel * cfg.dt, *cfg.speed_limits
                    )
                    v = new_speed * _unit(v)
                velocities[t] = v
                segments[t] = "turn"
                t += 1
        else:
            steps = int(rng.integers(cfg.straight_steps[0], cfg.straight_steps[1] + 1))
            accel = 0.0
            if cfg.acceleration and rng.random() < cfg.p_accelerate:
                accel = rng.uniform(*cfg.accel_range) * (1 if rng.random() < 0.5 else -1)
            v = velocities[t - 1]
            for _ in range(steps):
                if t >= T:
                    break
                if accel:
                    new_speed = np.clip(
                        np.linalg.norm(v) + accel * cfg.dt, *cfg.speed_limits
                    )
                    v = new_speed * _unit(v)
                velocities[t] = v
                segments[t] = "accelerating" if accel else "straight"
                t += 1
        turning = not turning

    positions = np.empty((T, 3))
    positions[0] = spawn
    half_dt = 0.5 * cfg.dt
    for i in range(1, T):
        positions[i] = positions[i - 1] + half_dt * (velocities[i - 1] + velocities[i])
    states = np.hstack([positions, velocities])
    return (states, segments) if return_segments else states


def polar_to_cart(polar: np.ndarray) -> np.ndarray:
    """Position (x, y, z) of a (range, az, el, ...) tuple."""
    r, az, el = polar[0], polar[1], polar[2]
    ce = np.cos(el)
    return np.array([r * ce * np.cos(az), r * ce * np.sin(az), r * np.sin(el)])


def observe(state: np.ndarray, radar: RadarConfig, rng: np.random.Generator) -> Observation:
    """One noisy detection of a state: Cartesian position + Doppler, plus the
    matching polar coordinates. Noise is injected i.i.d in the configured
    frame; zero noise reproduces the exact projection of velocity onto the
    position direction as the Doppler."""
    pos = state[:3]
    if np.linalg.norm(pos) < 1e-6:
        raise SingularityError("cannot observe a target at the radar origin")
    true_polar = polar_of_state(state)
    if radar.noise_frame == "polar":
        noise = rng.normal(0.0, 1.0, 4) * np.array(
            [radar.sigma_range, radar.sigma_az, radar.sigma_el, radar.sigma_doppler]
        )
        z_polar = true_polar + noise
        z_polar[0] = max(z_polar[0], 1.0)  # keep range positive
        z_cart = np.concatenate([polar_to_cart(z_polar), [z_polar[3]]])
    else:
        noise = rng.normal(0.0, 1.0, 4) * np.array(
            [radar.sigma_pos, radar.sigma_pos, radar.sigma_pos, radar.sigma_doppler]
        )
        z_cart = np.concatenate([pos, [true_polar[3]]]) + noise
        noisy_pos_state = np.concatenate([z_cart[:3], state[3:]])
        z_polar = polar_of_state(noisy_pos_state)
        z_polar[3] = z_cart[3]
    return Observation(z_cart, 0, z_polar)


def _observe_target(states: np.ndarray, radar: RadarConfig, rng: np.random.Generator):
    """Vectorized per-target observation draw (same math as `observe`)."""
    T = states.shape[0]
    true_polar = polar_of_state(states)
    if radar.noise_frame == "polar":
        sig = np.array([radar.sigma_range, radar.sigma_az, radar.sigma_el, radar.sigma_doppler])
        z_polar = true_polar + rng.normal(0.0, 1.0, (T, 4)) * sig
        z_polar[:, 0] = np.maximum(z_polar[:, 0], 1.0)
        ce = np.cos(z_polar[:, 2])
        xs = z_polar[:, 0] * ce * np.cos(z_polar[:, 1])
        ys = z_polar[:, 0] * ce * np.sin(z_polar[:, 1])
        zs = z_polar[:, 0] * np.sin(z_polar[:, 2])
        z_cart = np.column_stack([xs, ys, zs, z_polar[:, 3]])
    else:
        sig = np.array([radar.sigma_pos, radar.sigma_pos, radar.sigma_pos, radar.sigma_doppler])
        z_cart = np.column_stack([states[:, :3], true_polar[:, 3]])
        z_cart = z_cart + rng.normal(0.0, 1.0, (T, 4)) * sig
        noisy = np.hstack([z_cart[:, :3], states[:, 3:]])
        z_polar = polar_of_state(noisy)
        z_polar[:, 3] = z_cart[:, 3]
    return z_cart, z_polar


def target_rng(seed: int, index: int) -> np.random.Generator:
    """Independent, portable RNG stream for one target."""
    return np.random.default_rng([seed, index])


def make_dataset(
    benchmark, n_targets: int, seed: int, **overrides
) -> TrainingDataset:
    """Generate a dataset for a named preset (or an explicit config)."""
    cfg = preset(benchmark, **overrides) if isinstance(benchmark, str) else benchmark
    targets = []
    for i in range(n_targets):
        rng = target_rng(seed, i)
        states = generate_trajectory(cfg, rng)
        obs, obs_polar = _observe_target(states, cfg.radar, rng)
        targets.append(TargetRecord(states, obs, obs_polar))
    meta = {
        "noise_frame": cfg.radar.noise_frame,
        "radar": dataclasses.asdict(cfg.radar),
        "flags": {
            "anisotropic": cfg.anisotropic,
            "polar": cfg.polar,
            "uncentered": cfg.uncentered,
            "acceleration": cfg.acceleration,
            "turns": cfg.turns,
        },
    }
    return TrainingDataset(
        targets, benchmark=cfg.name, seed=seed, dt=cfg.dt, domain="radar", meta=meta
    )


def linear_process_noise(q: float, dt: float = 1.0) -> np.ndarray:
    """Full-rank white-acceleration process covariance for the 6-D
    constant-velocity state (per-axis [[dt^3/3, dt^2/2], [dt^2/2, dt]] * q)."""
    Q = np.zeros((6, 6))
    for i in range(3):
        Q[i, i] = dt**3 / 3.0 * q
        Q[i, i + 3] = Q[i + 3, i] = dt**2 / 2.0 * q
        Q[i + 3, i + 3] = dt * q
    return Q


def make_linear_dataset(
    n_targets: int,
    seed: int,
    steps: tuple[int, int] = (40, 80),
    q: float = 4.0,
    r_std: float = 50.0,
    dt: float = 1.0,
    spawn_box: float = 5_000.0,
    vel_std: float = 100.0,
) -> TrainingDataset:
    """Fully linear-Gaussian regime: x_{t+1} = F x_t + w, w ~ N(0, Q_true),
    z_t = position + N(0, r_std^2 I). Every textbook filter assumption holds,
    so estimated noise should be near-optimal here."""
    F = np.eye(6)
    F[:3, 3:] = dt * np.eye(3)
    Q_true = linear_process_noise(q, dt)
    Lq = np.linalg.cholesky(Q_true)
    targets = []
    for i in range(n_targets):
        rng = target_rng(seed, i)
        T = int(rng.integers(steps[0], steps[1] + 1))
        x = np.concatenate(
            [rng.uniform(-spawn_box, spawn_box, 3), rng.normal(0.0, vel_std, 3)]
        )
        states = np.empty((T, 6))
        states[0] = x
        noise = rng.normal(0.0, 1.0, (T - 1, 6)) @ Lq.T
        for t in range(1, T):
            x = F @ x + noise[t - 1]
            states[t] = x
        obs = states[:, :3] + rng.normal(0.0, r_std, (T, 3))
        targets.append(TargetRecord(states, obs, None))
    meta = {
        "q": q,
        "r_std": r_std,
        "Q_true": Q_true.tolist(),
        "R_true": (r_std**2 * np.eye(3)).tolist(),
    }
    return TrainingDataset(
        targets, benchmark="Linear", seed=seed, dt=dt, domain="linear", meta=meta
    )
