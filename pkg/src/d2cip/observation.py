"""Appearance models and correlation response maps.

Two backends stand in for a learned correlation filter.  The synthetic
backend evaluates a scenario's peak-sum surface analytically (no pixels
needed), with hash-seeded per-cell noise so overlapping windows of different
particles agree on shared cells.  The template backend scores normalized
cross-correlation of a grayscale patch kept at a fixed internal resolution.
Everything downstream (refinement, weighting, clustering) only sees response
maps and is agnostic to the backend.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence as Seq

import numpy as np

from d2cip import kernels
from d2cip.state import Array, PosteriorMode, ResponseMap, TargetState, snap_to_grid

SYNTHETIC = "synthetic"
TEMPLATE = "template"
BACKENDS = (SYNTHETIC, TEMPLATE)

# Template patches are resampled to this square resolution (nearest neighbor).
TEMPLATE_RESOLUTION = 32


@dataclass(frozen=True)
class Frame:
    """One observed grayscale frame.

    ``pixels`` may be None for scenario-driven runs where the synthetic
    backend evaluates the surface analytically; the template backend and the
    frame writer require materialized pixels.
    """

    width: int
    height: int
    index: int
    pixels: Optional[Array] = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("frame dimensions must be >= 1")
        if self.pixels is not None:
            px = np.asarray(self.pixels, dtype=np.float64)
            if px.shape != (self.height, self.width):
                raise ValueError("pixels must be (height, width)")
            if not np.all(np.isfinite(px)) or px.min() < 0.0 or px.max() > 1.0:
                raise ValueError("pixel intensities must be finite in [0, 1]")
            object.__setattr__(self, "pixels", px)

    @classmethod
    def from_pixels(cls, pixels, index: int) -> "Frame":
        px = np.asarray(pixels, dtype=np.float64)
        return cls(width=px.shape[1], height=px.shape[0], index=index, pixels=px)


@dataclass(frozen=True)
class Sequence:
    """Frames plus per-frame ground truth (one state per frame)."""

    frames: tuple[Frame, ...]
    truth: tuple[TargetState, ...]
    scenario: object = None

    def __post_init__(self):
        if len(self.frames) != len(self.truth):
            raise ValueError("sequence and ground truth lengths differ")

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class AppearanceModelHandle:
    """One live appearance model.

    Synthetic handles reference the scenario ground truth and are stateless;
    template handles carry the grayscale patch plus its cached statistics.
    """

    model_id: int
    backend: str
    scenario: object = None
    patch: Optional[Array] = None
    patch_mean: float = 0.0
    patch_var: float = 0.0


def make_synthetic_model(scenario, model_id: int = 0) -> AppearanceModelHandle:
    return AppearanceModelHandle(model_id=model_id, backend=SYNTHETIC, scenario=scenario)


def _with_stats(handle: AppearanceModelHandle, patch: Array) -> AppearanceModelHandle:
    mean = float(patch.sum() / patch.size)
    var = float(((patch - mean) ** 2).sum())
    return replace(handle, patch=patch, patch_mean=mean, patch_var=var)


def frame_patch(frame: Frame, state: TargetState) -> Array:
    """Cut the patch under ``state`` and rescale it to the model resolution."""
    if frame.pixels is None:
        raise ValueError("frame has no pixels; template backend needs rendered frames")
    cx, cy = clamp_center(frame, state.position)
    return np.asarray(kernels.extract_patch(
        frame.pixels, cx, cy, float(state.size[0]), float(state.size[1]),
        TEMPLATE_RESOLUTION, TEMPLATE_RESOLUTION))


def make_template_model(frame: Frame, state: TargetState, model_id: int = 0) -> AppearanceModelHandle:
    handle = AppearanceModelHandle(model_id=model_id, backend=TEMPLATE)
    return _with_stats(handle, frame_patch(frame, state))


def clamp_center(frame: Frame, position) -> tuple[int, int]:
    """Snap a candidate position to the pixel grid, clamped into the frame."""
    cx, cy = snap_to_grid(np.asarray(position, dtype=np.float64))
    cx = int(min(max(cx, 0), frame.width - 1))
    cy = int(min(max(cy, 0), frame.height - 1))
    return cx, cy


def respond_many(model: AppearanceModelHandle, frame: Frame, centers: Array,
                 grid_radius: int, sizes: Optional[Array] = None) -> Array:
    """Response maps for many integer grid centers at once: (n, 2R+1, 2R+1).

    ``centers`` must already be snapped and clamped (see
    :func:`clamp_center`).  For the template backend ``sizes`` gives each
    candidate's (w, h) patch extent; the synthetic surface does not depend
    on candidate size.
    """
    if grid_radius < 1:
        raise ValueError("grid_radius must be >= 1")
    centers = np.asarray(centers, dtype=np.int64)
    if model.backend == SYNTHETIC:
        px, py, amps, widths = model.scenario.peaks_at(frame.index)
        return kernels.gauss_response_maps(
            centers[:, 0], centers[:, 1], px, py, amps, widths,
            model.scenario.noise_std, model.scenario.seed, frame.index, grid_radius)
    if model.backend == TEMPLATE:
        if frame.pixels is None:
            raise ValueError("template backend needs rendered frames")
        if model.patch is None:
            raise ValueError(f"template model {model.model_id} has no patch")
        if sizes is None:
            raise ValueError("template backend needs candidate sizes")
        sizes = np.asarray(sizes, dtype=np.float64)
        side = 2 * grid_radius + 1
        out = np.empty((len(centers), side, side), dtype=np.float64)
        for i in range(len(centers)):
            out[i] = kernels.ncc_response_maps(
                frame.pixels, model.patch, centers[i:i + 1, 0], centers[i:i + 1, 1],
                grid_radius, float(sizes[i, 0]), float(sizes[i, 1]))[0]
        return out
    raise ValueError(f"unknown backend {model.backend!r}")


def respond(model: AppearanceModelHandle, frame: Frame, candidate: TargetState,
            grid_radius: int) -> ResponseMap:
    """Response map centered at (the grid snap of) a candidate state."""
    cx, cy = clamp_center(frame, candidate.position)
    sizes = np.asarray([candidate.size], dtype=np.float64)
    maps = respond_many(model, frame, np.array([[cx, cy]], dtype=np.int64),
                        grid_radius, sizes=sizes)
    origin = np.array([cx - grid_radius, cy - grid_radius], dtype=np.float64)
    return ResponseMap(scores=maps[0], origin=origin)


def likelihood_of_scores(scores: Array) -> float:
    """Sum of the grid scores with negatives clipped to zero first."""
    return float(np.sum(np.maximum(scores, 0.0)))


def likelihood_of(rmap: ResponseMap) -> float:
    return likelihood_of_scores(rmap.scores)


def refresh_model(model: AppearanceModelHandle, frame: Frame, state: TargetState,
                  likelihood: float, *, eta: float = 0.01,
                  l_update: float = 0.0) -> AppearanceModelHandle:
    """Blend one shared model toward the frame content at ``state``.

    No-op for the synthetic backend, for eta = 0, and when the supporting
    likelihood falls below ``l_update``.
    """
    if model.backend != TEMPLATE or eta <= 0.0 or likelihood < l_update:
        return model
    target = frame_patch(frame, state)
    return _with_stats(model, (1.0 - eta) * model.patch + eta * target)


def update_models(models: dict[int, AppearanceModelHandle], frame: Frame,
                  final_modes: Seq[PosteriorMode], *, eta: float = 0.01,
                  l_update: float = 0.0, next_id: int = 0,
                  ) -> tuple[dict[int, AppearanceModelHandle], list[int], int]:
    """Rebuild the model registry so exactly one model serves each mode.

    A mode reuses the model it references; when several modes reference the
    same parent (a merge) the extras are forked under fresh ids, and a mode
    whose reference is gone forks from the highest-weight mode's parent.
    Template patches are blended toward the frame patch at the mode's peak
    with rate ``eta``, skipped when the mode's peak likelihood falls below
    ``l_update``.  Models no modes reference anymore are retired.

    Returns (new registry, per-mode model ids, next free id).
    """
    if next_id <= (max(models) if models else -1):
        next_id = (max(models) + 1) if models else 0
    fallback_parent: Optional[int] = None
    for mode in sorted(final_modes, key=lambda m: -m.weight):
        if mode.model_id in models:
            fallback_parent = mode.model_id
            break
    new_models: dict[int, AppearanceModelHandle] = {}
    mode_ids: list[int] = []
    claimed: set[int] = set()
    for mode in final_modes:
        parent_id = mode.model_id if mode.model_id in models else fallback_parent
        if parent_id is None:
            raise ValueError("no live model to fork from")
        parent = models[parent_id]
        if parent_id in claimed:
            assigned = next_id
            next_id += 1
        else:
            assigned = parent_id
            claimed.add(parent_id)
        handle = replace(parent, model_id=assigned)
        if handle.backend == TEMPLATE and eta > 0.0 and mode.likelihood >= l_update:
            target = frame_patch(frame, mode.peak)
            handle = _with_stats(handle, (1.0 - eta) * handle.patch + eta * target)
        new_models[assigned] = handle
        mode_ids.append(assigned)
    return new_models, mode_ids, next_id
