"""Shared domain types: target states, particles, response maps, posterior modes.

Conventions used throughout the package:

- positions are (x, y) bounding-box centers in pixels, sizes are (w, h);
- the 8-component flattened state is ordered [px, py, sw, sh, vpx, vpy, vsw, vsh]
  so the constant-velocity process matrix applies unambiguously;
- response maps are discrete grids with one-pixel cells; ``scores[row, col]``
  corresponds to pixel (origin_x + col * cell, origin_y + row * cell).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

Array = np.ndarray


def _as_vec(value, n: int, name: str) -> Array:
    vec = np.asarray(value, dtype=np.float64)
    if vec.shape != (n,):
        raise ValueError(f"{name} must be a {n}-vector, got shape {vec.shape}")
    return vec


@dataclass(frozen=True)
class TargetState:
    """A target hypothesis: box center position and box size, both in pixels."""

    position: Array
    size: Array

    def __post_init__(self):
        position = _as_vec(self.position, 2, "position")
        size = _as_vec(self.size, 2, "size")
        if not np.all(np.isfinite(position)):
            raise ValueError("position must be finite")
        if not np.all(np.isfinite(size)) or np.any(size <= 0):
            raise ValueError("size components must be strictly positive")
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "size", size)

    def as_xywh(self) -> tuple[float, float, float, float]:
        return (float(self.position[0]), float(self.position[1]),
                float(self.size[0]), float(self.size[1]))


@dataclass(frozen=True)
class StateMean:
    """A mixture-component mean: target state plus its per-frame velocity.

    ``velocity`` holds [vpx, vpy, vsw, vsh] in pixels/frame.
    """

    state: TargetState
    velocity: Array

    def __post_init__(self):
        velocity = _as_vec(self.velocity, 4, "velocity")
        if not np.all(np.isfinite(velocity)):
            raise ValueError("velocity must be finite")
        object.__setattr__(self, "velocity", velocity)


def flatten(mean: StateMean) -> Array:
    """Pack a StateMean into the fixed 8-vector [p, s, pdot, sdot]."""
    out = np.empty(8, dtype=np.float64)
    out[0:2] = mean.state.position
    out[2:4] = mean.state.size
    out[4:8] = mean.velocity
    return out


def unflatten(vec) -> StateMean:
    """Inverse of :func:`flatten`."""
    vec = _as_vec(vec, 8, "state vector")
    return StateMean(TargetState(vec[0:2], vec[2:4]), vec[4:8])


@dataclass(frozen=True)
class Particle:
    """One sampled hypothesis with its refinement bookkeeping.

    ``trace`` records the grid positions the refinement loop visited (the
    first entry is the sampled position snapped to the pixel grid) and
    ``trace_likelihoods`` the response-map likelihood evaluated at each of
    them, so the displacement ledger of a refined particle can be audited:
    final position - first position == sum of per-iteration displacements.
    """

    state: TargetState
    initial_state: TargetState
    source_component: int
    iteration_count: int = 0
    likelihood: float = 0.0
    alive: bool = True
    trace: tuple[tuple[float, float], ...] = ()
    trace_likelihoods: tuple[float, ...] = ()


@dataclass(frozen=True)
class ResponseMap:
    """A 2-D correlation score grid centered at the position that produced it."""

    scores: Array
    origin: Array
    cell_size: float = 1.0

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 2 or scores.shape[0] < 1 or scores.shape[1] < 1:
            raise ValueError("scores must be a non-empty 2-D grid")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "origin", _as_vec(self.origin, 2, "origin"))

    @property
    def center(self) -> Array:
        h, w = self.scores.shape
        return self.origin + self.cell_size * np.array([(w - 1) // 2, (h - 1) // 2], dtype=np.float64)


def peak_of(rmap: ResponseMap) -> tuple[Array, float]:
    """Pixel coordinate and score of the maximum cell.

    Ties are broken deterministically toward the lowest row-major index.
    """
    flat = int(np.argmax(rmap.scores))
    row, col = divmod(flat, rmap.scores.shape[1])
    coord = rmap.origin + rmap.cell_size * np.array([col, row], dtype=np.float64)
    return coord, float(rmap.scores[row, col])


@dataclass(frozen=True)
class PosteriorMode:
    """A converged final peak with its normalized weight and bookkeeping.

    ``likelihood`` is the response-map likelihood evaluated at ``peak`` (the
    factor entering the weight before the prior-weight carry-over), kept so
    the weight support can be audited against a fresh map evaluation.
    ``component_counts`` maps source-component index -> number of member
    particles, which the next-frame handoff uses to find the plurality parent.
    """

    peak: TargetState
    weight: float
    converged_count: int
    source_components: frozenset[int]
    model_id: int
    likelihood: float
    component_counts: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.converged_count < 1:
            raise ValueError("convergedCount must be >= 1")
        if not (0.0 <= self.weight <= 1.0 + 1e-9):
            raise ValueError("weight must be normalized into [0, 1]")


def check_weights_normalized(modes: Iterable[PosteriorMode], tol: float = 1e-9) -> None:
    total = sum(m.weight for m in modes)
    if abs(total - 1.0) > tol:
        raise ValueError(f"mode weights sum to {total!r}, expected 1 within {tol}")


class RandomSource:
    """Deterministic random stream with explicit splitting.

    Identical seeds produce identical draw sequences. A source is
    single-owner; independent child streams for parallel or per-frame use are
    obtained with :meth:`child` / :meth:`split`, which are themselves
    deterministic in spawn order.
    """

    def __init__(self, seed: Optional[int] = None, _seq: Optional[np.random.SeedSequence] = None):
        if _seq is None:
            _seq = np.random.SeedSequence(seed)
        self._seq = _seq
        self.seed = seed
        self.generator = np.random.Generator(np.random.PCG64(_seq))

    def child(self) -> "RandomSource":
        (seq,) = self._seq.spawn(1)
        return RandomSource(None, _seq=seq)

    def split(self, n: int) -> list["RandomSource"]:
        return [RandomSource(None, _seq=seq) for seq in self._seq.spawn(n)]

    # Thin passthroughs for the draws the tracker actually makes.
    def normal(self, loc=0.0, scale=1.0, size=None) -> Array:
        return self.generator.normal(loc, scale, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)


def snap_to_grid(positions) -> Array:
    """Round continuous pixel positions to the nearest integer grid cell.

    Uses floor(x + 0.5) so behaviour matches the compiled kernels exactly.
    """
    arr = np.asarray(positions, dtype=np.float64)
    return np.floor(arr + 0.5).astype(np.int64)
