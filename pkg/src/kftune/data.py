"""Dataset containers and their on-disk format.

A dataset is a list of independent targets, each a ground-truth state
sequence plus the matching observation sequence. On disk it is a single
``.npz`` archive with a self-describing JSON header and the per-target
arrays concatenated along the time axis:

  header      JSON string: format version, benchmark tag, seed, dt, domain,
              noise configuration, anything else the producer recorded
  offsets     int64 (n_targets + 1,); target i spans offsets[i]:offsets[i+1]
  states      float64 (total_steps, state_dim)
  obs         float64 (total_steps, obs_dim)
  obs_polar   float64 (total_steps, 4), only when polar coordinates exist

The layout is stable: readers must ignore unknown header fields.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ParseError
from .filters import Observation

FORMAT_VERSION = 1


@dataclass
class TargetRecord:
    """Ground truth and observations for one target."""

    states: np.ndarray
    obs: np.ndarray
    obs_polar: np.ndarray | None = None

    def __post_init__(self):
        if self.states.shape[0] != self.obs.shape[0]:
            raise ContractError("states/observations length mismatch")
        if self.obs_polar is not None and self.obs_polar.shape[0] != self.obs.shape[0]:
            raise ContractError("polar observations length mismatch")
        self._obs_cache: list[Observation] | None = None

    def __len__(self) -> int:
        return self.states.shape[0]

    def observations(self) -> list[Observation]:
        if self._obs_cache is None:
            polar = self.obs_polar
            self._obs_cache = [
                Observation(self.obs[t], t, None if polar is None else polar[t])
                for t in range(len(self))
            ]
        return self._obs_cache


@dataclass
class TrainingDataset:
    targets: list[TargetRecord]
    benchmark: str = ""
    seed: int | None = None
    dt: float = 1.0
    domain: str = "radar"
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.targets)

    def n_steps(self) -> int:
        return sum(len(t) for t in self.targets)

    def subset(self, indices) -> "TrainingDataset":
        return TrainingDataset(
            [self.targets[i] for i in indices],
            self.benchmark,
            self.seed,
            self.dt,
            self.domain,
            dict(self.meta),
        )

    def content_hash(self) -> str:
        """Stable digest of the numerical content; used to enforce that
        paired evaluations really consumed identical data."""
        h = hashlib.sha256()
        for t in self.targets:
            h.update(np.ascontiguousarray(t.states).tobytes())
            h.update(np.ascontiguousarray(t.obs).tobytes())
            if t.obs_polar is not None:
                h.update(np.ascontiguousarray(t.obs_polar).tobytes())
        return h.hexdigest()


def save_dataset(dataset: TrainingDataset, path) -> None:
    lengths = [len(t) for t in dataset.targets]
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    header = {
        "format_version": FORMAT_VERSION,
        "benchmark": dataset.benchmark,
        "seed": dataset.seed,
        "dt": dataset.dt,
        "domain": dataset.domain,
        "meta": dataset.meta,
    }
    arrays = {
        "header": np.array(json.dumps(header, sort_keys=True)),
        "offsets": offsets,
        "states": np.concatenate([t.states for t in dataset.targets], axis=0),
        "obs": np.concatenate([t.obs for t in dataset.targets], axis=0),
    }
    if dataset.targets and dataset.targets[0].obs_polar is not None:
        arrays["obs_polar"] = np.concatenate(
            [t.obs_polar for t in dataset.targets], axis=0
        )
    np.savez(path, **arrays)


def load_dataset(path) -> TrainingDataset:
    with np.load(path, allow_pickle=False) as archive:
        try:
            header = json.loads(str(archive["header"]))
            offsets = archive["offsets"]
            states = archive["states"]
            obs = archive["obs"]
        except KeyError as exc:
            raise ParseError(f"dataset file missing field {exc}") from exc
        obs_polar = archive["obs_polar"] if "obs_polar" in archive.files else None
    if header.get("format_version") != FORMAT_VERSION:
        raise ParseError(f"unsupported dataset format {header.get('format_version')!r}")
    targets = []
    for i in range(len(offsets) - 1):
        lo, hi = int(offsets[i]), int(offsets[i + 1])
        targets.append(
            TargetRecord(
                states[lo:hi],
                obs[lo:hi],
                None if obs_polar is None else obs_polar[lo:hi],
            )
        )
    return TrainingDataset(
        targets,
        benchmark=header.get("benchmark", ""),
        seed=header.get("seed"),
        dt=header.get("dt", 1.0),
        domain=header.get("domain", "radar"),
        meta=header.get("meta", {}),
    )
