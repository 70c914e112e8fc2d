"""Constant-velocity prediction and stratified sampling from the transition mixture.

The transition prior is a mixture with one component per surviving posterior
mode.  Mixture coefficients are equal (1/J); each component additionally
carries its mode's normalized posterior weight, which the weight update of
the next frame multiplies back in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from d2cip.state import Array, Particle, RandomSource, StateMean, TargetState, flatten, unflatten

# 8x8 process matrix: position/size advance by velocity, velocity unchanged.
PROCESS_MATRIX = np.block([
    [np.eye(4), np.eye(4)],
    [np.zeros((4, 4)), np.eye(4)],
])


@dataclass(frozen=True)
class PriorMode:
    """A surviving posterior mode handed to the next frame's prediction."""

    mean: StateMean
    weight: float
    model_id: int = 0


@dataclass(frozen=True)
class TransitionMixture:
    """Equal-coefficient Gaussian mixture over predicted mode states.

    ``sigma`` is the per-dimension standard deviation of every component in
    the flattened [p, s, pdot, sdot] space.  ``prior_weights[j]`` retains
    component j's normalized posterior weight from the previous frame.
    """

    means: tuple[StateMean, ...]
    prior_weights: tuple[float, ...]
    sigma: Array
    model_ids: tuple[int, ...]

    def __post_init__(self):
        if len(self.means) < 1:
            raise ValueError("mixture needs at least one component")
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if sigma.shape != (8,):
            raise ValueError("sigma must be an 8-vector")
        if np.any(sigma < 0):
            raise ValueError("sigma components must be >= 0")
        total = sum(self.prior_weights)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"prior weights sum to {total!r}, expected 1")
        object.__setattr__(self, "sigma", sigma)

    @property
    def n_components(self) -> int:
        return len(self.means)

    @property
    def coefficient(self) -> float:
        """Equal mixture coefficient 1/J used for sampling quotas."""
        return 1.0 / len(self.means)


def predict_mean(mean: StateMean) -> StateMean:
    """One constant-velocity step: flatten, apply the process matrix, unpack."""
    vec = flatten(mean)
    out = np.empty(8, dtype=np.float64)
    out[0:4] = vec[0:4] + vec[4:8]
    out[4:8] = vec[4:8]
    return unflatten(out)


def build_mixture(prior_modes: Sequence[PriorMode], sigma, m_max: Optional[int] = None) -> TransitionMixture:
    """Predict every prior mode one step ahead and wrap them as a mixture.

    Modes beyond the ``m_max`` highest-weight ones are dropped (ties keep the
    earlier mode) and the retained weights are renormalized.
    """
    if len(prior_modes) == 0:
        raise ValueError("cannot build a transition mixture from an empty prior")
    modes = list(prior_modes)
    if m_max is not None and len(modes) > m_max:
        order = sorted(range(len(modes)), key=lambda i: (-modes[i].weight, i))
        keep = sorted(order[:m_max])
        modes = [modes[i] for i in keep]
    total = sum(m.weight for m in modes)
    if total <= 0:
        weights = tuple(1.0 / len(modes) for _ in modes)
    else:
        weights = tuple(m.weight / total for m in modes)
    return TransitionMixture(
        means=tuple(predict_mean(m.mean) for m in modes),
        prior_weights=weights,
        sigma=np.asarray(sigma, dtype=np.float64),
        model_ids=tuple(m.model_id for m in modes),
    )


def split_budget(n_total: int, n_components: int) -> int:
    """Per-component quota for a total particle budget: ceil(N / J)."""
    return max(1, math.ceil(n_total / n_components))


def sample_stratified(mixture: TransitionMixture, n_per_component: int,
                      rng: RandomSource, size_max=None) -> list[Particle]:
    """Draw ``n_per_component`` particles from every mixture component.

    Draws are made in the flattened 8-vector space; the velocity dimensions
    are then discarded (particles carry position and size only).  Sampled
    sizes are clamped to at least one pixel, and to ``size_max`` when given.
    """
    if n_per_component < 1:
        raise ValueError("n_per_component must be >= 1")
    sigma = mixture.sigma
    hi = None if size_max is None else np.asarray(size_max, dtype=np.float64)
    particles: list[Particle] = []
    for j, mean in enumerate(mixture.means):
        base = flatten(mean)
        draws = base[np.newaxis, :] + rng.normal(size=(n_per_component, 8)) * sigma[np.newaxis, :]
        for i in range(n_per_component):
            size = np.maximum(draws[i, 2:4], 1.0)
            if hi is not None:
                size = np.minimum(size, hi)
            state = TargetState(draws[i, 0:2], size)
            particles.append(Particle(state=state, initial_state=state, source_component=j))
    return particles
