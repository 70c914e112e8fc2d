"""One-pass evaluation metrics: precision and success curves.

Precision at threshold tau is the fraction of frames whose center error is
at most tau pixels (headline value at 20 px).  Success at overlap u is the
fraction of frames whose bounding-box IoU exceeds u, summarized by the area
under the curve over 101 thresholds.  At the top threshold u = 1 an IoU of
exactly 1 still counts, so a perfect track scores 1.0 everywhere.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence as Seq

import numpy as np

from d2cip.state import Array, TargetState

PRECISION_THRESHOLDS = np.arange(51, dtype=np.float64)
SUCCESS_THRESHOLDS = np.arange(101, dtype=np.float64) / 100.0
HEADLINE_PRECISION_TAU = 20.0


def center_error(a: TargetState, b: TargetState) -> float:
    return float(np.linalg.norm(a.position - b.position))


def iou(a: TargetState, b: TargetState) -> float:
    """Intersection over union of two center+size boxes."""
    ax0, ay0 = a.position - a.size / 2.0
    ax1, ay1 = a.position + a.size / 2.0
    bx0, by0 = b.position - b.size / 2.0
    bx1, by1 = b.position + b.size / 2.0
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.size[0] * a.size[1] + b.size[0] * b.size[1] - inter
    return float(inter / union)


@dataclass(frozen=True)
class MetricBundle:
    precision_curve: Array    # fraction of frames per integer tau in 0..50
    success_curve: Array      # fraction of frames per overlap threshold
    n_frames: int

    def __post_init__(self):
        p = np.asarray(self.precision_curve, dtype=np.float64)
        s = np.asarray(self.success_curve, dtype=np.float64)
        if p.shape != PRECISION_THRESHOLDS.shape or s.shape != SUCCESS_THRESHOLDS.shape:
            raise ValueError("curve lengths do not match the threshold grids")
        if np.any(np.diff(p) < 0):
            raise ValueError("precision curve must be non-decreasing in tau")
        if np.any(np.diff(s) > 0):
            raise ValueError("success curve must be non-increasing in u")
        object.__setattr__(self, "precision_curve", p)
        object.__setattr__(self, "success_curve", s)

    @property
    def precision_at_20(self) -> float:
        return float(self.precision_curve[int(HEADLINE_PRECISION_TAU)])

    @property
    def success_auc(self) -> float:
        return float(np.mean(self.success_curve))


def compute_metrics(estimates: Seq[TargetState], truths: Seq[TargetState]) -> MetricBundle:
    if len(estimates) == 0 or len(estimates) != len(truths):
        raise ValueError("need equally many estimates and ground-truth states")
    errors = np.array([center_error(e, g) for e, g in zip(estimates, truths)])
    overlaps = np.array([iou(e, g) for e, g in zip(estimates, truths)])
    precision = np.array([np.mean(errors <= tau) for tau in PRECISION_THRESHOLDS])
    success = np.empty_like(SUCCESS_THRESHOLDS)
    for i, u in enumerate(SUCCESS_THRESHOLDS):
        # closed at the top so a perfect track keeps success 1.0 at u = 1
        hits = overlaps >= u if i == len(SUCCESS_THRESHOLDS) - 1 else overlaps > u
        success[i] = np.mean(hits)
    return MetricBundle(precision_curve=precision, success_curve=success,
                        n_frames=len(estimates))


def write_metrics_csv(bundle: MetricBundle, path) -> None:
    """Plot-ready rows: curve name, threshold, value."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["curve", "threshold", "value"])
        for tau, value in zip(PRECISION_THRESHOLDS, bundle.precision_curve):
            writer.writerow(["precision", f"{tau:g}", repr(float(value))])
        for u, value in zip(SUCCESS_THRESHOLDS, bundle.success_curve):
            writer.writerow(["success", f"{u:g}", repr(float(value))])
