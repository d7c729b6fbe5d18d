"""Multi-target tracking harness.

A solver owns a pool of filter-based trackers and, per step: receives the
step's observations, assigns them to trackers by maximizing the joint
observation likelihood (minimum-cost matching on negative log likelihoods),
updates matched trackers, spawns a tracker per unmatched observation,
retires trackers unseen for too long, then predicts everything forward.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data import TrainingDataset
from .errors import ContractError
from .filters import (
    FilterConfig,
    FilterState,
    Observation,
    gaussian_nll,
    init_state,
    observation_matrix,
    polar_R_to_cartesian,
    predict,
    update,
)

# cost assigned to gated-out (implausible) tracker/observation pairs
GATE_SENTINEL = 1e6


@dataclass
class SolverConfig:
    filter_cfg: FilterConfig
    Q: np.ndarray
    R: np.ndarray
    gate_maha2: float = 25.0  # squared Mahalanobis gate in observation space
    max_misses: int = 3


@dataclass
class Tracker:
    id: int
    state: FilterState  # post-predict belief
    misses: int = 0


@dataclass
class TrackerPool:
    trackers: dict[int, Tracker] = field(default_factory=dict)
    next_id: int = 0

    def spawn(self, state: FilterState) -> Tracker:
        trk = Tracker(self.next_id, state)
        self.trackers[trk.id] = trk
        self.next_id += 1
        return trk

    def live(self) -> list[Tracker]:
        return [self.trackers[i] for i in sorted(self.trackers)]


def predicted_observation(
    trk: Tracker, z: Observation, cfg: SolverConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the observation the tracker expects."""
    s = trk.state
    H = observation_matrix(s, z, cfg.filter_cfg.obs)
    R = cfg.R
    if cfg.filter_cfg.obs.r_frame == "polar":
        R = polar_R_to_cartesian(R, z)
    S = H @ s.P @ H.T + R
    return H @ s.x, S


def assignment_cost(
    trackers: list[Tracker], observations: list[Observation], cfg: SolverConfig
) -> np.ndarray:
    """Cost matrix of -log P(z_j | tracker_i) under each tracker's predicted
    observation distribution; pairs outside the Mahalanobis gate get the
    sentinel cost."""
    cost = np.empty((len(trackers), len(observations)))
    for i, trk in enumerate(trackers):
        for j, z in enumerate(observations):
            mean, S = predicted_observation(trk, z, cfg)
            err = z.z - mean
            maha2 = float(err @ np.linalg.solve(S, err))
            if maha2 > cfg.gate_maha2:
                cost[i, j] = GATE_SENTINEL
            else:
                cost[i, j] = gaussian_nll(err, S)
    return cost


def hungarian(cost: np.ndarray) -> tuple[list[tuple[int, int]], float]:
    """Minimum-total-cost one-to-one matching of a (possibly rectangular)
    finite cost matrix. Returns the matched (row, col) pairs and their total
    cost; rows/columns beyond min(m, n) stay unmatched."""
    cost = np.asarray(cost, dtype=float)
    if cost.size and not np.all(np.isfinite(cost)):
        raise ContractError("cost matrix must be finite (use a sentinel for gating)")
    if cost.size == 0:
        return [], 0.0
    rows, cols = linear_sum_assignment(cost)
    pairs = list(zip(rows.tolist(), cols.tolist()))
    return pairs, float(cost[rows, cols].sum())


@dataclass
class StepRecord:
    step: int
    assignments: list[tuple[int, int]]  # (tracker id, observation slot)
    spawned: list[tuple[int, int]]  # (tracker id, observation slot)
    deleted: list[int]
    n_live: int = 0


def solver_step(
    pool: TrackerPool, observations: list[Observation], cfg: SolverConfig, step: int = 0
) -> StepRecord:
    """One Observe/Assign/Update/Predict cycle over a post-predict pool."""
    live = pool.live()
    matched_pairs: list[tuple[int, int]] = []
    if live and observations:
        cost = assignment_cost(live, observations, cfg)
        pairs, _ = hungarian(cost)
        matched_pairs = [(i, j) for i, j in pairs if cost[i, j] < GATE_SENTINEL]
    matched_trackers = {live[i].id for i, _ in matched_pairs}
    matched_obs = {j for _, j in matched_pairs}

    record = StepRecord(step, [], [], [])
    for i, j in matched_pairs:
        trk = live[i]
        trk.state, _ = update(trk.state, observations[j], cfg.filter_cfg.obs, cfg.R)
        trk.misses = 0
        record.assignments.append((trk.id, j))

    for trk in live:
        if trk.id not in matched_trackers:
            trk.misses += 1
            if trk.misses >= cfg.max_misses:
                del pool.trackers[trk.id]
                record.deleted.append(trk.id)

    for j, z in enumerate(observations):
        if j not in matched_obs:
            trk = pool.spawn(init_state(z, cfg.filter_cfg))
            record.spawned.append((trk.id, j))

    for trk in pool.live():
        trk.state = predict(trk.state, cfg.filter_cfg.motion, cfg.Q)
    record.n_live = len(pool.trackers)
    return record


def build_episode(
    dataset: TrainingDataset, seed: int = 0, max_offset: int = 0
) -> list[list[tuple[int, Observation]]]:
    """Interleave a dataset's targets into one multi-target episode.

    Each target enters at a random step offset in [0, max_offset]. Returns,
    per step, the list of (target index, observation) present at that step.
    """
    rng = np.random.default_rng(seed)
    offsets = [int(rng.integers(0, max_offset + 1)) for _ in dataset.targets]
    horizon = max(off + len(t) for off, t in zip(offsets, dataset.targets))
    steps: list[list[tuple[int, Observation]]] = [[] for _ in range(horizon)]
    for k, (off, target) in enumerate(zip(offsets, dataset.targets)):
        for t, z in enumerate(target.observations()):
            steps[off + t].append((k, z))
    return steps


@dataclass
class EpisodeLog:
    records: list[StepRecord]
    # per step, the ground-truth target label of each observation slot
    labels: list[list[int]]


def run_episode(
    episode: list[list[tuple[int, Observation]]], cfg: SolverConfig
) -> EpisodeLog:
    pool = TrackerPool()
    records, labels = [], []
    for step, present in enumerate(episode):
        observations = [z for _, z in present]
        records.append(solver_step(pool, observations, cfg, step))
        labels.append([k for k, _ in present])
    return EpisodeLog(records, labels)


def assignment_purity(log: EpisodeLog) -> dict[int, float]:
    """Per ground-truth target: the share of its observations captured by
    its dominant tracker (spawning counts as capturing)."""
    counts: dict[int, dict[int, int]] = {}
    for record, step_labels in zip(log.records, log.labels):
        for trk_id, j in record.assignments + record.spawned:
            target = step_labels[j]
            counts.setdefault(target, {}).setdefault(trk_id, 0)
            counts[target][trk_id] += 1
    purity = {}
    for target, per_tracker in counts.items():
        total = sum(per_tracker.values())
        purity[target] = max(per_tracker.values()) / total
    return purity


def export_episode_log(log: EpisodeLog, path) -> None:
    """JSON-lines export: one record per step."""
    with open(path, "w") as fh:
        for record, step_labels in zip(log.records, log.labels):
            fh.write(
                json.dumps(
                    {
                        "step": record.step,
                        "assignments": record.assignments,
                        "spawned": record.spawned,
                        "deleted": record.deleted,
                        "n_live": record.n_live,
                        "labels": step_labels,
                    }
                )
                + "\n"
            )
