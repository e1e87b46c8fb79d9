"""Multi-track activity-coupled DoA + distance targets, PIT loss and SELD metrics.

Tensors are ``T x K x C x 3`` with the last axis ``(x, y, d_norm)``: an active
event carries ``(cos az, sin az, dist / 6)``; inactive cells are zero.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, ValidationError
from .tracks import parse_metadata_rows

MAX_DISTANCE_M = 6.0
MAX_PIT_TRACKS = 4


@dataclass(frozen=True, order=True)
class FrameLabel:
    frame: int
    class_id: int
    track_id: int
    azimuth_deg: float
    distance_m: float


def encode_targets(labels: Iterable[FrameLabel], T: int, K: int, C: int) -> np.ndarray:
    labels = list(labels)
    per_cell = Counter((lb.frame, lb.class_id) for lb in labels)
    for (t, c), n in per_cell.items():
        if n > K:
            raise ValidationError(f"{n} concurrent events of class {c} at frame {t} exceed K={K} tracks")
    out = np.zeros((T, K, C, 3))
    filled = set()
    for lb in labels:
        if not (0 <= lb.frame < T and 0 <= lb.class_id < C and 0 <= lb.track_id < K):
            raise ValidationError(f"label index out of range: {lb}")
        if not -90.0 <= lb.azimuth_deg <= 90.0:
            raise ValidationError(f"azimuth {lb.azimuth_deg} outside [-90, 90]")
        if not 0.0 <= lb.distance_m <= MAX_DISTANCE_M:
            raise ValidationError(f"distance {lb.distance_m} outside [0, 6]")
        key = (lb.frame, lb.track_id, lb.class_id)
        if key in filled:
            raise ValidationError(f"two labels share frame/track/class {key}")
        filled.add(key)
        theta = math.radians(lb.azimuth_deg)
        out[key] = (math.cos(theta), math.sin(theta), lb.distance_m / MAX_DISTANCE_M)
    return out


def decode_predictions(tensor, activity_threshold: float = 0.5, ndigits: int | None = 6) -> list[FrameLabel]:
    """Emit a label for every cell whose (x, y) norm exceeds the threshold.

    Decoded values are rounded to ``ndigits`` decimals (None disables), which
    makes the encode/decode round trip exact for labels at that resolution.
    """
    tensor = np.asarray(tensor, dtype=np.float64)
    if tensor.ndim != 4 or tensor.shape[-1] != 3:
        raise DimensionError(f"expected T x K x C x 3, got {tensor.shape}")
    if not 0.0 < activity_threshold < 1.0:
        raise ValidationError("activity threshold must be in (0, 1)")
    norms = np.hypot(tensor[..., 0], tensor[..., 1])
    out = []
    for t, k, c in zip(*np.nonzero(norms > activity_threshold)):
        x, y, dn = tensor[t, k, c]
        az = min(90.0, max(-90.0, math.degrees(math.atan2(y, x))))
        dist = MAX_DISTANCE_M * min(1.0, max(0.0, dn))
        if ndigits is not None:
            az, dist = round(az, ndigits) + 0.0, round(dist, ndigits) + 0.0
        out.append(FrameLabel(int(t), int(c), int(k), az, dist))
    return sorted(out)


def _check_pair(pred, target):
    pred, target = np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"pred {pred.shape} and target {target.shape} differ")
    if pred.ndim != 4 or pred.shape[-1] != 3:
        raise DimensionError(f"expected T x K x C x 3, got {pred.shape}")
    if pred.shape[1] > MAX_PIT_TRACKS:
        raise DimensionError(f"exhaustive PIT supports K <= {MAX_PIT_TRACKS}, got {pred.shape[1]}")
    return pred, target


def pit_loss(pred, target, dist_weight: float = 0.0, return_perms: bool = False):
    """Per-class minimum over track permutations of the mean squared error.

    ``dist_weight`` adds a separately weighted distance MSE over cells active
    in the target, evaluated under the same permutation. Pairwise costs are
    combined with ``math.fsum`` so the result does not depend on track order.
    """
    pred, target = _check_pair(pred, target)
    T, K, C, _ = pred.shape
    perms = list(itertools.permutations(range(K)))
    losses, chosen = [], []
    for c in range(C):
        tgt = target[:, :, c, :]
        active = np.any(tgt != 0, axis=-1)  # T x K
        n_active = int(active.sum())
        # cost[i][j]: prediction track i against target track j
        cost = [[float(np.sum((pred[:, i, c, :] - tgt[:, j, :]) ** 2)) for j in range(K)] for i in range(K)]
        dcost = [[float(np.sum(((pred[:, i, c, 2] - tgt[:, j, 2]) ** 2)[active[:, j]])) for j in range(K)]
                 for i in range(K)]
        best, best_perm = math.inf, None
        for perm in perms:
            value = math.fsum(cost[perm[k]][k] for k in range(K)) / (T * K * 3)
            if dist_weight and n_active:
                value += dist_weight * math.fsum(dcost[perm[k]][k] for k in range(K)) / n_active
            if value < best:
                best, best_perm = value, perm
        losses.append(best)
        chosen.append(best_perm)
    total = math.fsum(losses) / C
    return (total, chosen) if return_perms else total


@dataclass
class SeldMetrics:
    f_score: float
    doa_error_deg: float | None
    rel_dist_error: float | None
    tp: int = 0
    fp: int = 0
    fn: int = 0
    matched: int = 0
    zero_distance_refs: int = 0

    @property
    def defined(self) -> bool:
        return self.matched > 0

    def to_json(self) -> str:
        return json.dumps({
            "f_score": self.f_score,
            "doa_error_deg": self.doa_error_deg,
            "rel_dist_error": self.rel_dist_error,
        })

    def table(self) -> str:
        header = ("F-Score", "DoA Error", "Rel. Dist. Error")
        cells = (
            f"{100.0 * self.f_score:.1f}",
            "n/a" if self.doa_error_deg is None else f"{self.doa_error_deg:.2f}",
            "n/a" if self.rel_dist_error is None else f"{self.rel_dist_error:.3f}",
        )
        widths = [max(len(h), len(c)) for h, c in zip(header, cells)]
        fmt = lambda row: " | ".join(s.rjust(w) for s, w in zip(row, widths))  # noqa: E731
        return fmt(header) + "\n" + fmt(cells)


@dataclass
class SeldCounts:
    """Additive accumulator; sum per-clip counts then call ``metrics()``."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    matched: int = 0
    doa_err_sum: float = 0.0
    rde_sum: float = 0.0
    rde_count: int = 0
    zero_distance_refs: int = 0

    def __add__(self, other: SeldCounts) -> SeldCounts:
        return SeldCounts(*(getattr(self, f) + getattr(other, f) for f in self.__dataclass_fields__))

    def metrics(self) -> SeldMetrics:
        denom = 2 * self.tp + self.fp + self.fn
        return SeldMetrics(
            f_score=1.0 if denom == 0 else 2 * self.tp / denom,
            doa_error_deg=self.doa_err_sum / self.matched if self.matched else None,
            rel_dist_error=self.rde_sum / self.rde_count if self.rde_count else None,
            tp=self.tp, fp=self.fp, fn=self.fn, matched=self.matched,
            zero_distance_refs=self.zero_distance_refs,
        )


def _best_assignment(preds: list[FrameLabel], refs: list[FrameLabel]) -> list[tuple[int, int]]:
    """Exact minimum total |delta az| matching of min(len) pairs, by enumeration."""
    if len(preds) <= len(refs):
        candidates = ((list(range(len(preds))), list(p)) for p in itertools.permutations(range(len(refs)), len(preds)))
    else:
        candidates = ((list(p), list(range(len(refs)))) for p in itertools.permutations(range(len(preds)), len(refs)))
    best, best_cost = [], math.inf
    for pi, ri in candidates:
        cost = sum(abs(preds[a].azimuth_deg - refs[b].azimuth_deg) for a, b in zip(pi, ri))
        if cost < best_cost:
            best, best_cost = list(zip(pi, ri)), cost
    return best


def seld_counts(preds: Sequence[FrameLabel], refs: Sequence[FrameLabel],
                angle_threshold_deg: float = 20.0, rde_threshold: float = 1.0,
                gate_distance: bool = True) -> SeldCounts:
    cells_p: dict[tuple[int, int], list[FrameLabel]] = defaultdict(list)
    cells_r: dict[tuple[int, int], list[FrameLabel]] = defaultdict(list)
    for p in preds:
        cells_p[(p.frame, p.class_id)].append(p)
    for r in refs:
        cells_r[(r.frame, r.class_id)].append(r)

    acc = SeldCounts()
    for key in sorted(set(cells_p) | set(cells_r)):
        ps, rs = sorted(cells_p.get(key, [])), sorted(cells_r.get(key, []))
        pairs = _best_assignment(ps, rs) if ps and rs else []
        acc.fp += len(ps) - len(pairs)
        acc.fn += len(rs) - len(pairs)
        for a, b in pairs:
            p, r = ps[a], rs[b]
            d_az = abs(p.azimuth_deg - r.azimuth_deg)
            acc.matched += 1
            acc.doa_err_sum += d_az
            if r.distance_m > 0:
                rde = abs(p.distance_m - r.distance_m) / r.distance_m
                acc.rde_sum += rde
                acc.rde_count += 1
                dist_ok = rde <= rde_threshold
            else:
                acc.zero_distance_refs += 1
                dist_ok = True
            if d_az <= angle_threshold_deg and (dist_ok or not gate_distance):
                acc.tp += 1
            else:
                acc.fp += 1
                acc.fn += 1
    return acc


def seld_metrics(preds: Sequence[FrameLabel], refs: Sequence[FrameLabel],
                 angle_threshold_deg: float = 20.0, rde_threshold: float = 1.0,
                 gate_distance: bool = True) -> SeldMetrics:
    return seld_counts(preds, refs, angle_threshold_deg, rde_threshold, gate_distance).metrics()


def labels_from_csv(text: str, distance_unit: str = "auto") -> list[FrameLabel]:
    """Read metadata CSV rows as frame labels (source index becomes the track id)."""
    return sorted(
        FrameLabel(r.frame, r.class_id, r.source_id, r.azimuth_deg, r.distance_m)
        for r in parse_metadata_rows(text, distance_unit)
    )
