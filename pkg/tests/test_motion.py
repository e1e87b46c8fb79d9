from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from spatialqa import motion as mo
from spatialqa.errors import ValidationError
from spatialqa.motion import DistanceTrend as DT
from spatialqa.motion import DoABucket as B
from spatialqa.motion import DominantChange as DC
from spatialqa.tracks import EventTrack, SceneMetadata

TOL = mo.Tolerances()


def trk(doa, dist=None, label="x", first=0):
    n = len(doa)
    dist = [2.0] * n if dist is None else dist
    return EventTrack(label, range(first, first + n), doa, dist)


# ---- buckets ---------------------------------------------------------------

def test_bucket_examples():
    assert mo.bucket_of(0) is B.FRONT
    assert mo.bucket_of(70) is B.FRONT_LEFT
    assert mo.bucket_of(15) is B.FRONT and mo.bucket_of(-15) is B.FRONT
    assert mo.bucket_of(45) is B.SLIGHTLY_LEFT and mo.bucket_of(-45) is B.SLIGHTLY_RIGHT
    assert mo.bucket_of(90) is B.FRONT_LEFT and mo.bucket_of(-90) is B.FRONT_RIGHT
    with pytest.raises(ValidationError):
        mo.bucket_of(90.5)


def _reference_bucket(az):
    # written straight from the five ranges, frontal side closed
    if 45 < az <= 90:
        return B.FRONT_LEFT
    if 15 < az <= 45:
        return B.SLIGHTLY_LEFT
    if -15 <= az <= 15:
        return B.FRONT
    if -45 <= az < -15:
        return B.SLIGHTLY_RIGHT
    return B.FRONT_RIGHT


def test_bucket_partition_on_fine_grid():
    grid = np.round(np.arange(-900, 901) / 10, 1)
    seen = {b: 0 for b in B}
    for az in grid:
        b = mo.bucket_of(float(az))
        assert b is _reference_bucket(float(az))
        seen[b] += 1
    assert sum(seen.values()) == grid.size and all(seen.values())


@given(st.floats(-90, 90))
def test_sign_convention_mirrors(az):
    mirrored = {B.FRONT_LEFT: B.FRONT_RIGHT, B.SLIGHTLY_LEFT: B.SLIGHTLY_RIGHT, B.FRONT: B.FRONT,
                B.SLIGHTLY_RIGHT: B.SLIGHTLY_LEFT, B.FRONT_RIGHT: B.FRONT_LEFT}
    assert mo.bucket_of(az, mo.SignConvention.RIGHT_POSITIVE) is mirrored[mo.bucket_of(az)]


# ---- deltas and summaries --------------------------------------------------

def test_significant_deltas_examples():
    assert mo.significant_deltas([10, 10.1, 10.2], 5) == []
    assert mo.significant_deltas([0, 10, 4], 5) == [(1, 10.0), (2, -6.0)]
    assert mo.significant_deltas([7], 5) == []
    assert mo.significant_deltas([3.0, 3.005], 0.005) == [(1, pytest.approx(0.005))]


def test_summary_examples():
    s = mo.summarize_motion(trk([60, 30, 0], [2, 2, 2]))
    assert (s.net_doa_change_deg, s.total_doa_change_deg) == (-60, 60)
    assert (s.start_bucket, s.end_bucket) == (B.FRONT_LEFT, B.FRONT)
    assert (s.net_dist_change_m, s.total_dist_change_m) == (0, 0)
    s = mo.summarize_motion(trk([20, 20, 20], [1, 1, 1]))
    assert s.total_doa_change_deg == s.net_doa_change_deg == s.total_dist_change_m == 0
    assert s.start_bucket is s.end_bucket
    s = mo.summarize_motion(trk([0, 0], [2, 3]))
    assert s.dist_range_fraction == pytest.approx(1 / 6, abs=1e-12) and s.doa_range_fraction == 0
    assert s.to_dict()["start_bucket"] == "front"


def test_back_and_forth_total_vs_net():
    s = mo.summarize_motion(trk([0, 30, 0]))
    assert s.total_doa_change_deg == 60 and s.net_doa_change_deg == 0
    net = mo.Tolerances(change_mode="net")
    assert mo.summarize_motion(trk([0, 30, 0]), net).doa_range_fraction == 0


series = st.lists(st.floats(-90, 90), min_size=1, max_size=20)


@given(series, st.lists(st.floats(0.5, 6), min_size=20, max_size=20))
def test_total_bounds_net(doa, dist):
    s = mo.summarize_motion(trk(doa, dist[:len(doa)]))
    assert s.total_doa_change_deg >= abs(s.net_doa_change_deg) - 1e-9
    assert s.total_dist_change_m >= abs(s.net_dist_change_m) - 1e-9
    assert s.min_dist_m <= s.max_dist_m


@given(series, st.data())
def test_jitter_frames_leave_totals_unchanged(doa, data):
    # a jitter frame repeats the value held at that point, nudged by less than tol
    base = mo.summarize_motion(trk(doa))
    anchors, anchor = [], doa[0]
    for v in doa:
        if abs(v - anchor) >= TOL.doa_deg:
            anchor = v
        anchors.append(anchor)
    at = data.draw(st.integers(1, len(doa)))
    eps = data.draw(st.floats(-TOL.doa_deg * 0.99, TOL.doa_deg * 0.99))
    inserted = anchors[at - 1] + eps
    assume(-90 <= inserted <= 90)
    jittered = doa[:at] + [inserted] + doa[at:]
    s = mo.summarize_motion(trk(jittered))
    assert s.total_doa_change_deg == pytest.approx(base.total_doa_change_deg, abs=1e-9)
    assert s.net_doa_change_deg == pytest.approx(base.net_doa_change_deg, abs=1e-9)


# ---- distance dynamics -----------------------------------------------------

def test_distance_dynamics_examples():
    assert mo.distance_dynamics(trk([0, 0], [3.0, 3.002])) is DT.ABOUT_SAME
    assert mo.distance_dynamics(trk([0, 0], [3.0, 2.0])) is DT.CLOSER
    assert mo.distance_dynamics(trk([0, 0], [1.0, 4.0])) is DT.FARTHER
    assert mo.distance_dynamics(trk([0, 0], [3.0, 3.005])) is DT.FARTHER


SWAP = {DT.CLOSER: DT.FARTHER, DT.FARTHER: DT.CLOSER, DT.ABOUT_SAME: DT.ABOUT_SAME}


@given(st.lists(st.floats(0, 6), min_size=1, max_size=12))
def test_reversal_never_keeps_a_direction(dist):
    fwd = mo.distance_dynamics(trk([0] * len(dist), dist))
    back = mo.distance_dynamics(trk([0] * len(dist), dist[::-1]))
    assert not (fwd is back and fwd is not DT.ABOUT_SAME)


@given(st.lists(st.tuples(st.integers(1, 5), st.floats(0.5, 5.5)), min_size=1, max_size=5),
       st.lists(st.floats(-0.0024, 0.0024), min_size=25, max_size=25))
def test_reversal_antisymmetric_on_held_positions(levels, noise):
    # plateaus separated by significant jumps, jitter below half the tolerance
    plateaus = []
    for run, level in levels:
        if plateaus and abs(level - plateaus[-1][1]) < 0.02:
            continue
        plateaus.append((run, level))
    dist = [lv for run, lv in plateaus for _ in range(run)]
    dist = [min(6.0, max(0.0, v + n)) for v, n in zip(dist, noise)]
    fwd = mo.distance_dynamics(trk([0] * len(dist), dist))
    back = mo.distance_dynamics(trk([0] * len(dist), dist[::-1]))
    assert back is SWAP[fwd]


# ---- trajectories, cross-source, dominance ---------------------------------

def test_trajectory_examples():
    assert mo.trajectory_matches(trk([60, 30, 5]), TOL, mo.LEFT_SIDE, mo.FRONT)
    assert not mo.trajectory_matches(trk([60] * 5), TOL, mo.LEFT_SIDE, mo.LEFT_SIDE)
    assert not mo.trajectory_matches(trk([60, 5]), TOL, {B.FRONT_RIGHT}, mo.FRONT)


def _scene(*tracks):
    return SceneMetadata("c", 50, tracks)


def test_cross_source_examples():
    a = trk([0, 0], [1.2, 1.5], "A")
    b = trk([0, 0], [0.8, 2.0], "B", first=1)
    winner, values = mo.cross_source_compare(_scene(a, b), mo.CrossAspect.CLOSEST_APPROACH)
    assert winner == "B" and values == {"A": 1.2, "B": 0.8}
    a = trk([0, 20], label="A", first=0)
    b = trk([0, 20], label="B", first=3)
    assert mo.cross_source_compare(_scene(b, a), mo.CrossAspect.LARGEST_DIRECTION_SHIFT)[0] == "A"
    c = trk([0, 20], label="C", first=0)
    assert mo.cross_source_compare(_scene(c, a), mo.CrossAspect.LARGEST_DIRECTION_SHIFT)[0] == "A"
    with pytest.raises(ValidationError):
        mo.cross_source_compare(_scene(a), mo.CrossAspect.CLOSEST_APPROACH)


def test_cross_source_order_independent():
    a, b, c = trk([0, 40], label="A"), trk([0, 10], label="B"), trk([0, 70], label="C")
    for aspect in mo.CrossAspect:
        assert mo.cross_source_compare(_scene(a, b, c), aspect) == mo.cross_source_compare(_scene(c, a, b), aspect)


def test_dominant_examples():
    dist_more = trk([0, 10], [2.0, 3.0])
    s = mo.summarize_motion(dist_more)
    assert abs(s.dist_range_fraction - 1 / 6) < 1e-12 and abs(s.doa_range_fraction - 10 / 180) < 1e-12
    assert Fraction(1, 6) > Fraction(10, 180) + Fraction(1, 20)
    assert mo.dominant_change(dist_more) is DC.DISTANCE
    assert mo.dominant_change(trk([0, 0], [2, 2])) is DC.COMPARABLE
    assert mo.dominant_change(trk([0, 90], [2.0, 2.6])) is DC.DIRECTION
    assert mo.dominant_change(trk([0, 30], [2.0, 3.0])) is DC.COMPARABLE


@given(st.floats(0, 90), st.floats(0, 3), st.floats(0.1, 10))
def test_dominant_span_rescaling(d_doa, d_dist, factor):
    track = trk([0, d_doa], [1.0, 1.0 + d_dist])
    base = mo.Tolerances(comparable_margin=0.0)
    scaled = mo.Tolerances(comparable_margin=0.0, doa_span_deg=180 * factor, dist_span_m=6 * factor)
    s1 = mo.summarize_motion(track, base)
    assume(abs(s1.doa_range_fraction - s1.dist_range_fraction) > 1e-9)
    assert mo.dominant_change(track, base) is mo.dominant_change(track, scaled)


def test_tolerance_validation():
    with pytest.raises(ValidationError):
        mo.Tolerances(doa_deg=0)
    with pytest.raises(ValidationError):
        mo.Tolerances(change_mode="peak")
