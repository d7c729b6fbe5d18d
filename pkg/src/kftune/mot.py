"""MOT-challenge ground-truth ingestion for the video-tracking experiment.

gt.txt records are comma-separated:
  frame, id, bb_left, bb_top, bb_width, bb_height, flag, class, visibility

Records are grouped by id and sorted by frame; a track with frame gaps is
split into gap-free segments. Velocities are backward differences of
(bb_left, bb_top) with dt = 1 frame. By default only active pedestrian
records are kept (flag == 1, class == 1); both filters are configurable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .data import TargetRecord, TrainingDataset
from .errors import ConfigError, ContractError, ParseError

VIDEO_STATE_DIM = 6


@dataclass
class VideoTargetTrack:
    """One gap-free segment of one annotated target."""

    target_id: int
    frames: np.ndarray  # (T,) int, strictly increasing by 1
    boxes: np.ndarray  # (T, 4) float: x, y, w, h
    vel: np.ndarray | None = None  # (T, 2) px/frame after derive_velocity
    raw_fields: list[list[str]] = field(default_factory=list)  # for round-trip


def video_models() -> tuple[np.ndarray, np.ndarray]:
    """(F, H) for the constant-velocity, constant-size video model over the
    state (x, y, w, h, vx, vy)."""
    F = np.eye(6)
    F[0, 4] = 1.0
    F[1, 5] = 1.0
    H = np.hstack([np.eye(4), np.zeros((4, 2))])
    return F, H


def parse_mot_gt(
    lines, keep_classes: tuple[int, ...] | None = (1,), require_flag: bool = True
) -> list[VideoTargetTrack]:
    """Parse gt.txt content (an iterable of lines or a whole string) into
    per-target, gap-split track segments."""
    if isinstance(lines, str):
        lines = lines.splitlines()
    per_id: dict[int, list[tuple[int, list[str]]]] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != 9:
            raise ParseError(f"expected 9 comma-separated fields, got {len(fields)}", lineno)
        try:
            frame = int(fields[0])
            tid = int(fields[1])
            flag = int(float(fields[6]))
            cls = int(float(fields[7]))
            [float(f) for f in fields[2:6]]
        except ValueError as exc:
            raise ParseError(f"bad numeric field ({exc})", lineno) from exc
        if require_flag and flag != 1:
            continue
        if keep_classes is not None and cls not in keep_classes:
            continue
        per_id.setdefault(tid, []).append((frame, fields))

    tracks: list[VideoTargetTrack] = []
    for tid in sorted(per_id):
        records = sorted(per_id[tid], key=lambda fr: fr[0])
        segment: list[tuple[int, list[str]]] = []
        for rec in records:
            if segment and rec[0] != segment[-1][0] + 1:
                tracks.append(_segment_to_track(tid, segment))
                segment = []
            segment.append(rec)
        if segment:
            tracks.append(_segment_to_track(tid, segment))
    return tracks


def _segment_to_track(tid: int, segment) -> VideoTargetTrack:
    frames = np.array([frame for frame, _ in segment], dtype=int)
    boxes = np.array([[float(x) for x in fields[2:6]] for _, fields in segment])
    return VideoTargetTrack(tid, frames, boxes, None, [fields for _, fields in segment])


def derive_velocity(track: VideoTargetTrack) -> VideoTargetTrack | None:
    """Backward-difference velocities of (x, y); the first frame copies the
    second frame's velocity. Length-1 segments carry no velocity information
    and are dropped with a warning."""
    if len(track.frames) < 2:
        warnings.warn(
            f"dropping length-1 segment of target {track.target_id}", stacklevel=2
        )
        return None
    xy = track.boxes[:, :2]
    vel = np.empty_like(xy)
    vel[1:] = xy[1:] - xy[:-1]
    vel[0] = vel[1]
    track.vel = vel
    return track


def tracks_to_lines(tracks: list[VideoTargetTrack]) -> list[str]:
    """Serialize parsed tracks back to gt.txt lines (original field text is
    preserved, so unparsed files round-trip byte-identically modulo record
    order)."""
    lines = []
    for track in tracks:
        for fields in track.raw_fields:
            lines.append(",".join(fields))
    return lines


def tracks_to_dataset(tracks: list[VideoTargetTrack], tag: str = "mot") -> TrainingDataset:
    """Video TrainingDataset: states (x, y, w, h, vx, vy), observations the
    exact (x, y, w, h) boxes (a zero-error detector)."""
    targets = []
    for track in tracks:
        if track.vel is None:
            track = derive_velocity(track)
            if track is None:
                continue
        states = np.hstack([track.boxes, track.vel])
        obs = track.boxes.copy()
        targets.append(TargetRecord(states, obs, None))
    if not targets:
        raise ContractError("no usable tracks (all segments shorter than 2 frames?)")
    return TrainingDataset(targets, benchmark=tag, dt=1.0, domain="video")


def load_manifest(path) -> dict[str, list[Path]]:
    """Dataset manifest: a YAML file mapping split roles to gt.txt paths,
    e.g. {train: [seq01/gt.txt, ...], test: [seq05/gt.txt]}. Relative paths
    resolve against the manifest's directory."""
    path = Path(path)
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict) or not {"train", "test"} <= set(doc):
        raise ConfigError("manifest must map 'train' and 'test' to sequence paths")
    out: dict[str, list[Path]] = {}
    for split in ("train", "test"):
        entries = doc[split]
        if not isinstance(entries, list):
            raise ConfigError(f"manifest split {split!r} must be a list of paths")
        out[split] = []
        for entry in entries:
            p = Path(entry)
            if not p.is_absolute():
                p = path.parent / p
            if not p.exists():
                raise ConfigError(f"manifest references missing file {p}")
            out[split].append(p)
    return out


def dataset_from_manifest(
    path, split: str, keep_classes: tuple[int, ...] | None = (1,)
) -> TrainingDataset:
    files = load_manifest(path)[split]
    tracks: list[VideoTargetTrack] = []
    for f in files:
        with open(f) as fh:
            parsed = parse_mot_gt(fh, keep_classes=keep_classes)
        for track in parsed:
            derived = derive_velocity(track)
            if derived is not None:
                tracks.append(derived)
    return tracks_to_dataset(tracks, tag=f"mot-{split}")
