"""Seeded synthetic scenes for fixtures and experiments.

Trajectories are piecewise constant: positions hold, then jump by at least
``min_doa_step`` degrees / ``min_dist_step`` metres. Start and end azimuths sit
near bucket centres, and per-scene comparisons are kept well away from their
decision boundaries, so every generated answer survives per-frame jitter
smaller than half the significance tolerance.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, replace
from typing import Mapping

from .motion import Tolerances, summarize_motion
from .tracks import DCASE_CLASS_NAMES, EventTrack, SceneMetadata, track_sort_key

BUCKET_CENTRES = (67.5, 30.0, 0.0, -30.0, -67.5)


@dataclass(frozen=True)
class SynthConfig:
    num_frames: int = 50
    max_tracks: int = 3
    centre_jitter_deg: float = 5.0
    min_doa_step: float = 12.0
    min_dist_step: float = 0.1
    # separation kept between quantities that a question compares
    min_dist_gap: float = 0.05
    min_doa_total_gap: float = 15.0
    min_dist_total_gap: float = 0.05
    comparable_margin: float = 0.05
    fraction_guard: float = 0.04


def _rng(clip_id: str, seed: int) -> random.Random:
    digest = hashlib.sha256(f"synth\x00{seed}\x00{clip_id}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "little"))


def _steps(rng: random.Random, start: float, total: float, min_step: float, n_values: int, max_steps: int = 4) -> list[float]:
    """Piecewise-constant series of ``n_values`` from ``start`` to ``start + total``."""
    if total == 0 or n_values < 2:
        return [start] * n_values
    n_steps = max(1, min(max_steps, int(abs(total) // min_step), n_values - 1))
    at = sorted(rng.sample(range(1, n_values), n_steps))
    values, level, k = [], start, 0
    for i in range(n_values):
        if k < n_steps and i == at[k]:
            k += 1
            level = start + total * k / n_steps
        values.append(level)
    return values


def _track(rng: random.Random, cfg: SynthConfig, label: str, class_id: int, mode: str) -> EventTrack:
    first = rng.randrange(0, cfg.num_frames // 2)
    length = rng.randrange(min(15, cfg.num_frames - first), cfg.num_frames - first + 1)
    frames = list(range(first, first + length))
    if length > 20 and rng.random() < 0.2:
        gap = rng.randrange(5, length - 10)
        del frames[gap:gap + rng.randrange(2, 5)]
    n = len(frames)

    start_doa = round(rng.choice(BUCKET_CENTRES) + rng.uniform(-cfg.centre_jitter_deg, cfg.centre_jitter_deg), 1)
    start_dist = round(rng.uniform(0.8, 5.2), 2)
    doa_move = dist_move = 0.0
    if mode in ("direction", "both"):
        target = rng.choice([c for c in BUCKET_CENTRES if abs(c - start_doa) > 20])
        doa_move = round(target + rng.uniform(-cfg.centre_jitter_deg, cfg.centre_jitter_deg) - start_doa, 1)
    if mode in ("distance", "both"):
        room = [d for d in (-1, 1) if 0.5 <= start_dist + d * 0.3 <= 5.5]
        direction = rng.choice(room)
        limit = (start_dist - 0.5) if direction < 0 else (5.5 - start_dist)
        dist_move = direction * round(rng.uniform(0.3, min(2.0, limit)), 2)
    if mode == "comparable":
        # equal range fractions: 30 deg of 180 and 1 m of 6
        scale = rng.choice([1, 2])
        sign = 1 if start_doa < 0 else -1
        doa_move = sign * 30.0 * scale
        start_dist = round(rng.uniform(0.8, 2.5), 2)
        dist_move = 1.0 * scale
    doa = _steps(rng, start_doa, doa_move, cfg.min_doa_step, n)
    dist = _steps(rng, start_dist, dist_move, cfg.min_dist_step, n)
    return EventTrack(label, frames, [round(v, 3) for v in doa], [round(v, 4) for v in dist], class_id, 0)


def _well_separated(scene: SceneMetadata, cfg: SynthConfig) -> bool:
    tol = Tolerances(comparable_margin=cfg.comparable_margin)
    sums = [summarize_motion(t, tol) for t in scene.tracks]
    for s in sums:
        diff = abs(s.doa_range_fraction - s.dist_range_fraction)
        if not (diff <= 0.01 or abs(diff - cfg.comparable_margin) >= cfg.fraction_guard):
            return False
    for i in range(len(sums)):
        for j in range(i + 1, len(sums)):
            a, b = sums[i], sums[j]
            if abs(a.min_dist_m - b.min_dist_m) < cfg.min_dist_gap:
                return False
            gap = abs(a.total_doa_change_deg - b.total_doa_change_deg)
            if 0 < gap < cfg.min_doa_total_gap:
                return False
            gap = abs(a.total_dist_change_m - b.total_dist_change_m)
            if 0 < gap < cfg.min_dist_total_gap:
                return False
    return True


def synth_scene(clip_id: str, seed: int = 0, cfg: SynthConfig = SynthConfig(),
                class_names: Mapping[int, str] = DCASE_CLASS_NAMES) -> SceneMetadata:
    rng = _rng(clip_id, seed)
    modes = ("static", "direction", "distance", "both", "comparable")
    for _ in range(1000):
        n_tracks = rng.choice([1] + [2, 3] * (cfg.max_tracks - 1))
        n_tracks = min(n_tracks, cfg.max_tracks)
        ids = rng.sample(sorted(class_names), n_tracks)
        tracks = [_track(rng, cfg, class_names[c], c, rng.choice(modes)) for c in ids]
        scene = SceneMetadata(clip_id, cfg.num_frames, tuple(sorted(tracks, key=track_sort_key)))
        if _well_separated(scene, cfg):
            return scene
    raise RuntimeError(f"could not draw a well-separated scene for {clip_id}")


def perturb_scene(scene: SceneMetadata, rng: random.Random, doa_amp: float, dist_amp: float) -> SceneMetadata:
    """Add independent uniform jitter in ``(-amp, amp)`` to every frame value."""

    def jitter(amp):
        return rng.uniform(-amp, amp) if amp > 0 else 0.0

    tracks = []
    for t in scene.tracks:
        doa = [min(90.0, max(-90.0, v + jitter(doa_amp))) for v in t.doa_deg]
        dist = [min(6.0, max(0.0, v + jitter(dist_amp))) for v in t.dist_m]
        tracks.append(replace(t, doa_deg=tuple(doa), dist_m=tuple(dist)))
    return replace(scene, tracks=tuple(tracks))


def synth_corpus(n_clips: int, seed: int = 0, cfg: SynthConfig = SynthConfig()) -> list[SceneMetadata]:
    width = max(3, math.ceil(math.log10(max(n_clips, 1) + 1)))
    return [synth_scene(f"clip{i:0{width}d}", seed, cfg) for i in range(n_clips)]
