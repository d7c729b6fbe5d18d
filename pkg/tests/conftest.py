"""Shared test configuration: the acceptance reporter and data helpers."""

import numpy as np
import pytest

from kftune.data import TargetRecord, TrainingDataset

_ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def synthetic_video_dataset(
    n_targets: int, seed: int, jitter: float = 0.7, maneuver_p: float = 0.06
) -> TrainingDataset:
    """MOT-like fixture: constant-velocity pedestrian boxes with occasional
    heading changes and annotation jitter; states are derived from the boxes
    with backward-difference velocities, exactly like the gt ingestion."""
    rng = np.random.default_rng(seed)
    targets = []
    for _ in range(n_targets):
        T = int(rng.integers(60, 160))
        pos = rng.uniform(50, 1500, 2)
        vel = rng.normal(0, 3.0, 2)
        w, h = rng.uniform(30, 120, 2)
        boxes = np.empty((T, 4))
        for t in range(T):
            if rng.random() < maneuver_p:
                speed = np.linalg.norm(vel)
                ang = rng.uniform(0, 2 * np.pi)
                vel = (speed + rng.normal(0, 0.5)) * np.array([np.cos(ang), np.sin(ang)])
            pos = pos + vel
            w = max(10.0, w + rng.normal(0, 0.15))
            h = max(10.0, h + rng.normal(0, 0.15))
            boxes[t] = (
                pos[0] + rng.normal(0, jitter),
                pos[1] + rng.normal(0, jitter),
                w,
                h,
            )
        vels = np.empty((T, 2))
        vels[1:] = boxes[1:, :2] - boxes[:-1, :2]
        vels[0] = vels[1]
        states = np.hstack([boxes, vels])
        targets.append(TargetRecord(states, boxes.copy(), None))
    return TrainingDataset(targets, benchmark="video-fixture", seed=seed, domain="video")


@pytest.fixture(scope="session")
def video_fixture_train():
    return synthetic_video_dataset(60, seed=1)


@pytest.fixture(scope="session")
def video_fixture_test():
    return synthetic_video_dataset(120, seed=2)
