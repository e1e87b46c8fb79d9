"""Rule-based spatial motion reasoning over event tracks.

Azimuths are bucketed into five directional regions and a change only counts
as motion once it reaches the significance tolerance (5 deg / 0.005 m by
default). Significance is measured against the last significant value, so a
slow sub-threshold creep is eventually registered and jitter around a held
position never is.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

from .errors import ValidationError
from .tracks import EventTrack, SceneMetadata, track_names

DOA_SPAN_DEG = 180.0
DIST_SPAN_M = 6.0


class DoABucket(enum.Enum):
    FRONT_LEFT = "front-left"
    SLIGHTLY_LEFT = "slightly left"
    FRONT = "front"
    SLIGHTLY_RIGHT = "slightly right"
    FRONT_RIGHT = "front-right"


class SignConvention(enum.Enum):
    # positive azimuth = left, as in the bucket ranges
    LEFT_POSITIVE = "left-positive"
    # positive azimuth = right, as in the "-90 (left) to +90 (right)" wording
    RIGHT_POSITIVE = "right-positive"


class DistanceTrend(enum.Enum):
    CLOSER = "Closer"
    FARTHER = "Farther"
    ABOUT_SAME = "About the same"


class DominantChange(enum.Enum):
    DIRECTION = "Direction changed more"
    DISTANCE = "Distance changed more"
    COMPARABLE = "Comparable"


class CrossAspect(enum.Enum):
    CLOSEST_APPROACH = "closest_approach"
    LARGEST_DIRECTION_SHIFT = "largest_direction_shift"
    LARGEST_DISTANCE_CHANGE = "largest_distance_change"


@dataclass(frozen=True)
class Tolerances:
    doa_deg: float = 5.0
    dist_m: float = 0.005
    comparable_margin: float = 0.05
    convention: SignConvention = SignConvention.LEFT_POSITIVE
    # "total" counts every significant move; "net" uses |net change| only
    change_mode: str = "total"
    doa_span_deg: float = DOA_SPAN_DEG
    dist_span_m: float = DIST_SPAN_M

    def __post_init__(self):
        if self.doa_deg <= 0 or self.dist_m <= 0:
            raise ValidationError("tolerances must be positive")
        if self.comparable_margin < 0:
            raise ValidationError("comparable margin must be >= 0")
        if self.doa_span_deg <= 0 or self.dist_span_m <= 0:
            raise ValidationError("range spans must be positive")
        if self.change_mode not in ("total", "net"):
            raise ValidationError(f"unknown change mode {self.change_mode!r}")


@dataclass(frozen=True)
class MotionSummary:
    start_bucket: DoABucket
    end_bucket: DoABucket
    net_doa_change_deg: float
    total_doa_change_deg: float
    net_dist_change_m: float
    total_dist_change_m: float
    min_dist_m: float
    max_dist_m: float
    doa_range_fraction: float
    dist_range_fraction: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["start_bucket"] = self.start_bucket.value
        d["end_bucket"] = self.end_bucket.value
        return d


LEFT_SIDE = frozenset({DoABucket.FRONT_LEFT, DoABucket.SLIGHTLY_LEFT})
RIGHT_SIDE = frozenset({DoABucket.FRONT_RIGHT, DoABucket.SLIGHTLY_RIGHT})
FRONT = frozenset({DoABucket.FRONT})


def bucket_of(azimuth_deg: float, convention: SignConvention = SignConvention.LEFT_POSITIVE) -> DoABucket:
    if not -90.0 <= azimuth_deg <= 90.0:
        raise ValidationError(f"azimuth {azimuth_deg} outside [-90, 90]")
    az = azimuth_deg if convention is SignConvention.LEFT_POSITIVE else -azimuth_deg
    # boundaries go to the more frontal bucket
    if az > 45.0:
        return DoABucket.FRONT_LEFT
    if az > 15.0:
        return DoABucket.SLIGHTLY_LEFT
    if az >= -15.0:
        return DoABucket.FRONT
    if az >= -45.0:
        return DoABucket.SLIGHTLY_RIGHT
    return DoABucket.FRONT_RIGHT


def _reaches(magnitude: float, tol: float) -> bool:
    # absorb decimal representation error, e.g. 3.005 - 3.0 < 0.005 in binary
    return magnitude >= tol * (1.0 - 1e-9)


def significant_deltas(series, tol: float) -> list[tuple[int, float]]:
    """Deltas of at least ``tol`` relative to the last significant value.

    >>> significant_deltas([0, 10, 4], 5)
    [(1, 10.0), (2, -6.0)]
    """
    if tol <= 0:
        raise ValidationError("tolerance must be positive")
    values = [float(v) for v in series]
    if not values:
        return []
    anchor = values[0]
    out = []
    for i, v in enumerate(values[1:], start=1):
        delta = v - anchor
        if _reaches(abs(delta), tol):
            out.append((i, delta))
            anchor = v
    return out


def summarize_motion(track: EventTrack, tol: Tolerances = Tolerances()) -> MotionSummary:
    if not track.frames:
        raise ValidationError(f"track {track.label!r} has no frames")
    doa_steps = [d for _, d in significant_deltas(track.doa_deg, tol.doa_deg)]
    dist_steps = [d for _, d in significant_deltas(track.dist_m, tol.dist_m)]
    net_doa, net_dist = sum(doa_steps), sum(dist_steps)
    total_doa = sum(abs(d) for d in doa_steps)
    total_dist = sum(abs(d) for d in dist_steps)
    doa_measure = total_doa if tol.change_mode == "total" else abs(net_doa)
    dist_measure = total_dist if tol.change_mode == "total" else abs(net_dist)
    return MotionSummary(
        start_bucket=bucket_of(track.doa_deg[0], tol.convention),
        end_bucket=bucket_of(track.doa_deg[-1], tol.convention),
        net_doa_change_deg=net_doa,
        total_doa_change_deg=total_doa,
        net_dist_change_m=net_dist,
        total_dist_change_m=total_dist,
        min_dist_m=min(track.dist_m),
        max_dist_m=max(track.dist_m),
        doa_range_fraction=doa_measure / tol.doa_span_deg,
        dist_range_fraction=dist_measure / tol.dist_span_m,
    )


def distance_dynamics(track: EventTrack, tol: Tolerances = Tolerances()) -> DistanceTrend:
    net = summarize_motion(track, tol).net_dist_change_m
    if not _reaches(abs(net), tol.dist_m):
        return DistanceTrend.ABOUT_SAME
    return DistanceTrend.CLOSER if net < 0 else DistanceTrend.FARTHER


def trajectory_matches(track: EventTrack, tol: Tolerances, from_region, to_region) -> bool:
    s = summarize_motion(track, tol)
    return (
        s.start_bucket in from_region
        and s.end_bucket in to_region
        and _reaches(s.total_doa_change_deg, tol.doa_deg)
    )


def _aspect_value(summary: MotionSummary, aspect: CrossAspect, tol: Tolerances) -> float:
    if aspect is CrossAspect.CLOSEST_APPROACH:
        return summary.min_dist_m
    if aspect is CrossAspect.LARGEST_DIRECTION_SHIFT:
        return summary.total_doa_change_deg if tol.change_mode == "total" else abs(summary.net_doa_change_deg)
    return summary.total_dist_change_m if tol.change_mode == "total" else abs(summary.net_dist_change_m)


def cross_source_values(scene: SceneMetadata, aspect: CrossAspect, tol: Tolerances = Tolerances()) -> dict[str, float]:
    names = track_names(scene)
    return {n: _aspect_value(summarize_motion(t, tol), aspect, tol) for n, t in zip(names, scene.tracks)}


def cross_source_compare(scene: SceneMetadata, aspect: CrossAspect,
                         tol: Tolerances = Tolerances()) -> tuple[str, dict[str, float]]:
    """Winner name and per-track values.

    Ties go to the track with the earlier first frame, then the smaller label.
    """
    if len(scene.tracks) < 2:
        raise ValidationError("cross-source comparison needs at least 2 tracks")
    values = cross_source_values(scene, aspect, tol)
    names = track_names(scene)
    sign = 1.0 if aspect is CrossAspect.CLOSEST_APPROACH else -1.0
    best = min(
        range(len(names)),
        key=lambda i: (sign * values[names[i]], scene.tracks[i].first_frame, names[i]),
    )
    return names[best], values


def dominant_change(track: EventTrack, tol: Tolerances = Tolerances(), margin: float | None = None) -> DominantChange:
    margin = tol.comparable_margin if margin is None else margin
    s = summarize_motion(track, tol)
    diff = s.doa_range_fraction - s.dist_range_fraction
    if abs(diff) <= margin:
        return DominantChange.COMPARABLE
    return DominantChange.DIRECTION if diff > 0 else DominantChange.DISTANCE
