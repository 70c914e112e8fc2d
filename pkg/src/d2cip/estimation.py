"""Posterior over final peaks, mode clustering, state selection, ESS-gated
resampling and the handoff of surviving modes into the next frame's prior.

The posterior weight of a peak is the likelihood of the map generated at
that peak times the largest prior-component weight among the components
whose particles converged there; the winning state is chosen by converged
count within a cluster and by weight across clusters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence as Seq

import numpy as np

from d2cip.motion import PriorMode, TransitionMixture
from d2cip.refinement import ConvergedPeak
from d2cip.state import (Array, PosteriorMode, RandomSource, StateMean,
                         check_weights_normalized)


@dataclass(frozen=True)
class Posterior:
    modes: tuple[PosteriorMode, ...]
    frame_index: int

    def __post_init__(self):
        if not self.modes:
            raise ValueError("posterior needs at least one mode")
        check_weights_normalized(self.modes)

    def __len__(self) -> int:
        return len(self.modes)

    @property
    def weights(self) -> Array:
        return np.array([m.weight for m in self.modes], dtype=np.float64)


@dataclass(frozen=True)
class ClusterAssignment:
    k: int
    labels: tuple[int, ...]
    centroids: Array                  # (k, 2) positions
    silhouette_score: float           # NaN when k == 1 (undefined)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        seen = set(self.labels)
        if seen != set(range(self.k)):
            raise ValueError("labels must cover 0..k-1 with no empty cluster")
        centroids = np.asarray(self.centroids, dtype=np.float64)
        if centroids.shape != (self.k, 2):
            raise ValueError("centroids must be (k, 2)")
        object.__setattr__(self, "centroids", centroids)


@dataclass(frozen=True)
class EstimatorConfig:
    gamma: float = 0.5
    k_max: int = 4
    cluster_scale: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.cluster_scale <= 0:
            raise ValueError("cluster_scale must be > 0")


def build_posterior(peaks: Seq[ConvergedPeak], prior_mixture: TransitionMixture,
                    frame_index: int = 0) -> Posterior:
    """Normalized posterior over converged peaks.

    Each unnormalized weight is the peak's final-map likelihood times the
    largest prior-component weight among the components that fed it; an
    all-zero frame (every likelihood zero) degrades to equal weights.
    """
    if not peaks:
        raise ValueError("cannot build a posterior from zero peaks")
    prior_w = prior_mixture.prior_weights
    raw = np.empty(len(peaks), dtype=np.float64)
    for i, cp in enumerate(peaks):
        carry = max(float(prior_w[j]) for j in cp.source_components)
        raw[i] = cp.likelihood * carry
    total = float(raw.sum())
    weights = raw / total if total > 0 else np.full(len(peaks), 1.0 / len(peaks))
    modes = []
    for cp, w in zip(peaks, weights):
        modes.append(PosteriorMode(
            peak=cp.peak,
            weight=float(w),
            converged_count=cp.converged_count,
            source_components=cp.source_components,
            model_id=cp.model_id,
            likelihood=cp.likelihood,
            component_counts=cp.component_counts,
        ))
    return Posterior(modes=tuple(modes), frame_index=frame_index)


# -- k-means with deterministic restarts ---------------------------------

def _farthest_point_init(points: Array, first: int, k: int) -> list[int]:
    chosen = [first]
    d2 = np.sum((points - points[first]) ** 2, axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(d2))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((points - points[nxt]) ** 2, axis=1))
    return chosen


def _lloyd(points: Array, centroids: Array, k: int, max_iter: int = 50):
    n = len(points)
    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        dist = ((points[:, np.newaxis, :] - centroids[np.newaxis, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(dist, axis=1)
        for c in range(k):
            if np.any(new_labels == c):
                continue
            # revive an empty cluster with the worst-fit stealable point
            counts = np.bincount(new_labels, minlength=k)
            movable = counts[new_labels] > 1
            if not np.any(movable):
                break
            own = dist[np.arange(n), new_labels]
            new_labels[int(np.argmax(np.where(movable, own, -1.0)))] = c
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            sel = labels == c
            if np.any(sel):
                centroids[c] = points[sel].mean(axis=0)
    sse = float(((points - centroids[labels]) ** 2).sum())
    return labels, centroids, sse


def _kmeans(points: Array, k: int):
    """Best-of-n-restarts Lloyd iteration, fully deterministic.

    Every point serves once as the first farthest-point seed; the restart
    with the lowest sum of squared errors wins, earliest restart on ties.
    """
    best = None
    for first in range(len(points)):
        init = _farthest_point_init(points, first, k)
        labels, centroids, sse = _lloyd(points, points[init].copy(), k)
        if best is None or sse < best[0]:
            best = (sse, labels, centroids)
    _, labels, centroids = best
    # relabel by first appearance so output does not depend on seed order
    remap: dict[int, int] = {}
    for lab in labels:
        if int(lab) not in remap:
            remap[int(lab)] = len(remap)
    new_labels = np.array([remap[int(lab)] for lab in labels], dtype=np.int64)
    new_centroids = np.empty_like(centroids)
    for old, new in remap.items():
        new_centroids[new] = centroids[old]
    return new_labels, new_centroids


def _simplified_silhouette(points: Array, labels: Array, centroids: Array) -> float:
    """Mean of (b - a) / max(a, b) with centroid distances only."""
    n = len(points)
    dist = np.sqrt(((points[:, np.newaxis, :] - centroids[np.newaxis, :, :]) ** 2).sum(axis=2))
    a = dist[np.arange(n), labels]
    masked = dist.copy()
    masked[np.arange(n), labels] = np.inf
    b = masked.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(np.mean(s))


def cluster_modes(posterior: Posterior, cfg: EstimatorConfig) -> ClusterAssignment:
    """Spatial clustering of mode peaks with silhouette-chosen k.

    One cluster is used whenever the peak spread stays below
    ``cluster_scale`` times the mean target size; otherwise k in
    2..min(k_max, #modes) is picked by the simplified silhouette (smaller k
    on ties).
    """
    points = np.array([m.peak.position for m in posterior.modes], dtype=np.float64)
    n = len(points)
    mean_size = float(np.mean([np.mean(m.peak.size) for m in posterior.modes]))
    spread = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            spread = max(spread, float(np.linalg.norm(points[i] - points[j])))
    k_hi = min(cfg.k_max, n)
    if k_hi < 2 or spread < cfg.cluster_scale * mean_size:
        return ClusterAssignment(k=1, labels=(0,) * n,
                                 centroids=points.mean(axis=0, keepdims=True),
                                 silhouette_score=float("nan"))
    best = None
    for k in range(2, k_hi + 1):
        labels, centroids = _kmeans(points, k)
        score = _simplified_silhouette(points, labels, centroids)
        if best is None or score > best[0]:
            best = (score, k, labels, centroids)
    score, k, labels, centroids = best
    return ClusterAssignment(k=k, labels=tuple(int(x) for x in labels),
                             centroids=centroids, silhouette_score=score)


def single_cluster(posterior: Posterior) -> ClusterAssignment:
    """Degenerate assignment putting every mode in one cluster."""
    points = np.array([m.peak.position for m in posterior.modes], dtype=np.float64)
    return ClusterAssignment(k=1, labels=(0,) * len(points),
                             centroids=points.mean(axis=0, keepdims=True),
                             silhouette_score=float("nan"))


def select_mode(posterior: Posterior, clusters: ClusterAssignment) -> int:
    """Index of the winning mode.

    Within each cluster the candidate is the mode most particles converged
    to (ties: heavier weight, then lower index); across clusters the
    candidate with the largest weight wins (ties: larger count, lower index).
    """
    candidates = []
    for c in range(clusters.k):
        member_idx = [i for i, lab in enumerate(clusters.labels) if lab == c]
        best = max(member_idx, key=lambda i: (
            posterior.modes[i].converged_count, posterior.modes[i].weight, -i))
        candidates.append(best)
    return max(candidates, key=lambda i: (
        posterior.modes[i].weight, posterior.modes[i].converged_count, -i))


def estimate_state(posterior: Posterior, clusters: ClusterAssignment):
    return posterior.modes[select_mode(posterior, clusters)].peak


def ess_of_weights(weights: Array) -> float:
    w = np.asarray(weights, dtype=np.float64)
    return float(1.0 / np.sum(w * w))


def effective_sample_size(posterior: Posterior) -> float:
    return ess_of_weights(posterior.weights)


def systematic_indices(weights: Array, n_draw: int, rng: RandomSource) -> Array:
    """Systematic (low-variance) resampling: indices drawn by weight."""
    w = np.asarray(weights, dtype=np.float64)
    edges = np.cumsum(w)
    edges[-1] = 1.0  # guard the top edge against rounding
    u0 = float(rng.uniform(0.0, 1.0 / n_draw))
    points = u0 + np.arange(n_draw, dtype=np.float64) / n_draw
    return np.searchsorted(edges, points, side="left").astype(np.int64)


def resample(posterior: Posterior, rng: RandomSource) -> Posterior:
    """Systematic resampling over modes; duplicates collapse, weights equalize."""
    idx = systematic_indices(posterior.weights, len(posterior.modes), rng)
    unique = sorted(set(int(i) for i in idx))
    w = 1.0 / len(unique)
    modes = tuple(replace(posterior.modes[i], weight=w) for i in unique)
    return Posterior(modes=modes, frame_index=posterior.frame_index)


def should_resample(posterior: Posterior, cfg: EstimatorConfig) -> bool:
    return effective_sample_size(posterior) < cfg.gamma * len(posterior.modes)


def maybe_resample(posterior: Posterior, cfg: EstimatorConfig,
                   rng: RandomSource) -> Posterior:
    """Resample only when the effective sample size falls below gamma * n.

    Leaving the posterior untouched lets informative weights survive into
    the next frame's prior carry-over factor.
    """
    if should_resample(posterior, cfg):
        return resample(posterior, rng)
    return posterior


def handoff_modes(posterior: Posterior, previous_modes: Seq[StateMean],
                  m_max: Optional[int] = None) -> list[PriorMode]:
    """Turn surviving modes into next-frame prior components.

    Position and size come from each peak; position velocity is the shift
    from the previous-frame mode that contributed the plurality of the
    mode's members (zero when no parent is known); size velocity stays zero.
    Modes are capped at m_max by weight and weights renormalized.
    """
    modes = list(posterior.modes)
    if m_max is not None and len(modes) > m_max:
        ranked = sorted(range(len(modes)),
                        key=lambda i: (-modes[i].weight, i))[:m_max]
        keep = sorted(ranked)
        modes = [modes[i] for i in keep]
    total = sum(m.weight for m in modes)
    out = []
    for m in modes:
        velocity = np.zeros(4, dtype=np.float64)
        if m.component_counts and previous_modes:
            parent = max(m.component_counts, key=lambda cj: (cj[1], -cj[0]))[0]
            if 0 <= parent < len(previous_modes):
                prev = previous_modes[parent].state.position
                velocity[0:2] = m.peak.position - prev
        mean = StateMean(state=m.peak, velocity=velocity)
        out.append(PriorMode(mean=mean, weight=m.weight / total,
                             model_id=m.model_id))
    return out
