"""Event tracks parsed from DCASE-style frame metadata.

Metadata rows are ``frame,class_id,source_id,azimuth_deg,distance`` (an
optional sixth on-screen column is ignored). Frames are 100 ms label frames.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Mapping

from .errors import MetadataError, ValidationError

FRAME_PERIOD_S = 0.1
AZIMUTH_RANGE = (-90.0, 90.0)
DISTANCE_RANGE = (0.0, 6.0)
CM_DETECT_THRESHOLD = 60.0  # 10x the largest plausible distance in metres

# STARSS23 / DCASE 2025 stereo SELD classes
DCASE_CLASS_NAMES: dict[int, str] = {
    0: "female speech",
    1: "male speech",
    2: "clapping",
    3: "telephone",
    4: "laughter",
    5: "domestic sounds",
    6: "footsteps",
    7: "door",
    8: "music",
    9: "musical instrument",
    10: "water tap",
    11: "bell",
    12: "knock",
}


@dataclass(frozen=True)
class EventTrack:
    label: str
    frames: tuple[int, ...]
    doa_deg: tuple[float, ...]
    dist_m: tuple[float, ...]
    class_id: int | None = field(default=None, compare=True)
    source_id: int | None = field(default=None, compare=True)

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(int(f) for f in self.frames))
        object.__setattr__(self, "doa_deg", tuple(float(v) for v in self.doa_deg))
        object.__setattr__(self, "dist_m", tuple(float(v) for v in self.dist_m))

    @property
    def first_frame(self) -> int:
        return self.frames[0] if self.frames else 0

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class SceneMetadata:
    clip_id: str
    num_frames: int
    tracks: tuple[EventTrack, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))


@dataclass(frozen=True)
class MetadataRow:
    frame: int
    class_id: int
    source_id: int
    azimuth_deg: float
    distance_m: float


def track_sort_key(track: EventTrack):
    return (track.first_frame, track.label,
            -1 if track.class_id is None else track.class_id,
            -1 if track.source_id is None else track.source_id)


def track_names(scene: SceneMetadata) -> list[str]:
    """Display names aligned with ``scene.tracks``.

    A label shared by several tracks gets a 1-based ordinal ("male speech 2").
    """
    counts = Counter(t.label for t in scene.tracks)
    seen: Counter = Counter()
    names = []
    for t in scene.tracks:
        if counts[t.label] == 1:
            names.append(t.label)
        else:
            seen[t.label] += 1
            names.append(f"{t.label} {seen[t.label]}")
    return names


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def parse_metadata_rows(text: str, distance_unit: str = "auto") -> list[MetadataRow]:
    """Parse and range-check rows; distances are returned in metres.

    ``distance_unit`` is ``"m"``, ``"cm"`` or ``"auto"`` (centimetres when
    any distance exceeds 60).
    """
    if distance_unit not in ("auto", "m", "cm"):
        raise ValidationError(f"unknown distance unit {distance_unit!r}")
    text = text.lstrip("﻿")
    raw = []
    first_content = True
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = [f.strip() for f in line.split(",")]
        if first_content and not _is_number(fields[0]):
            first_content = False
            continue  # header
        first_content = False
        if len(fields) not in (5, 6):
            raise MetadataError(f"expected 5 fields, got {len(fields)}", row=lineno)
        try:
            frame, cls, src = int(fields[0]), int(fields[1]), int(fields[2])
            az, dist = float(fields[3]), float(fields[4])
        except ValueError as exc:
            raise MetadataError(f"non-numeric field ({exc})", row=lineno) from None
        if frame < 0 or cls < 0 or src < 0:
            raise MetadataError("negative frame, class or source index", row=lineno)
        raw.append((lineno, frame, cls, src, az, dist))

    scale = 1.0
    if distance_unit == "cm" or (
        distance_unit == "auto" and raw and max(r[5] for r in raw) > CM_DETECT_THRESHOLD
    ):
        scale = 0.01

    rows, seen = [], {}
    for lineno, frame, cls, src, az, dist in raw:
        dist *= scale
        if not AZIMUTH_RANGE[0] <= az <= AZIMUTH_RANGE[1]:
            raise MetadataError(f"azimuth {az} outside [-90, 90]", row=lineno)
        if not DISTANCE_RANGE[0] <= dist <= DISTANCE_RANGE[1]:
            raise MetadataError(f"distance {dist} m outside [0, 6]", row=lineno)
        key = (frame, cls, src)
        if key in seen:
            raise MetadataError(f"duplicate (frame, class, source) {key}, first at row {seen[key]}", row=lineno)
        seen[key] = lineno
        rows.append(MetadataRow(frame, cls, src, az, dist))
    return rows


def parse_metadata_csv(text: str, class_names: Mapping[int, str] | None = None,
                       clip_id: str = "clip", num_frames: int | None = None,
                       distance_unit: str = "auto") -> SceneMetadata:
    class_names = DCASE_CLASS_NAMES if class_names is None else class_names
    rows = parse_metadata_rows(text, distance_unit)
    grouped: dict[tuple[int, int], list[MetadataRow]] = defaultdict(list)
    for r in rows:
        if r.class_id not in class_names:
            raise ValidationError(f"class id {r.class_id} has no name mapping")
        grouped[(r.class_id, r.source_id)].append(r)

    tracks = []
    for (cls, src), members in grouped.items():
        members.sort(key=lambda r: r.frame)
        tracks.append(EventTrack(
            label=class_names[cls],
            frames=[r.frame for r in members],
            doa_deg=[r.azimuth_deg for r in members],
            dist_m=[r.distance_m for r in members],
            class_id=cls,
            source_id=src,
        ))
    tracks.sort(key=track_sort_key)
    horizon = max((r.frame for r in rows), default=-1) + 1
    if num_frames is None:
        num_frames = horizon
    elif horizon > num_frames:
        raise ValidationError(f"frame {horizon - 1} beyond clip length {num_frames}")
    return SceneMetadata(clip_id=clip_id, num_frames=num_frames, tracks=tuple(tracks))


def scene_to_csv(scene: SceneMetadata, class_names: Mapping[int, str] | None = None) -> str:
    """Inverse of ``parse_metadata_csv`` (distances written in metres)."""
    class_names = DCASE_CLASS_NAMES if class_names is None else class_names
    by_name = {v: k for k, v in class_names.items()}
    rows = []
    source_counter: Counter = Counter()
    for t in scene.tracks:
        cls = t.class_id if t.class_id is not None else by_name[t.label]
        if t.source_id is not None:
            src = t.source_id
        else:
            src = source_counter[cls]
            source_counter[cls] += 1
        for f, az, d in zip(t.frames, t.doa_deg, t.dist_m):
            rows.append((f, cls, src, az, d))
    rows.sort()
    return "".join(f"{f},{c},{s},{az!r},{d!r}\n" for f, c, s, az, d in rows)


def validate_scene(scene: SceneMetadata) -> list[str]:
    diags = []
    if not scene.clip_id:
        diags.append("clip_id is empty")
    for i, t in enumerate(scene.tracks):
        name = f"track {i} ({t.label})"
        n = len(t.frames)
        if n == 0:
            diags.append(f"{name}: no frames")
        if len(t.doa_deg) != n or len(t.dist_m) != n:
            diags.append(
                f"{name}: length mismatch frames={n} doa={len(t.doa_deg)} dist={len(t.dist_m)}"
            )
        for j in range(1, n):
            if t.frames[j] <= t.frames[j - 1]:
                diags.append(f"{name}: frames not strictly increasing at index {j}")
        for j, f in enumerate(t.frames):
            if f < 0 or f >= scene.num_frames:
                diags.append(f"{name}: frame {f} at index {j} outside [0, {scene.num_frames})")
        for j, v in enumerate(t.doa_deg):
            if not AZIMUTH_RANGE[0] <= v <= AZIMUTH_RANGE[1]:
                diags.append(f"{name}: DoA {v} at index {j} outside [-90, 90]")
        for j, v in enumerate(t.dist_m):
            if not DISTANCE_RANGE[0] <= v <= DISTANCE_RANGE[1]:
                diags.append(f"{name}: distance {v} at index {j} outside [0, 6]")
    return diags


def _r(value: float, ndigits: int) -> float:
    # avoid "-0.0" in prompts
    return round(value, ndigits) + 0.0


def tracks_to_prompt(scene: SceneMetadata, frame_period_s: float = FRAME_PERIOD_S) -> str:
    diags = validate_scene(scene)
    if diags:
        raise ValidationError("; ".join(diags))
    order = sorted(range(len(scene.tracks)), key=lambda i: (scene.tracks[i].first_frame, scene.tracks[i].label))
    names = track_names(scene)
    events = []
    for i in order:
        t = scene.tracks[i]
        events.append({
            "Event": names[i],
            "DoA": [_r(v, 1) for v in t.doa_deg],
            "Source distance": [_r(v, 2) for v in t.dist_m],
            "Time frames": [_r(f * frame_period_s, 1) for f in t.frames],
        })
    return json.dumps(events, ensure_ascii=False)


def find_track(scene: SceneMetadata, name: str) -> int | None:
    for i, n in enumerate(track_names(scene)):
        if n == name:
            return i
    return None

