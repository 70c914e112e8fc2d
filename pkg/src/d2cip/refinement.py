"""Iterative refinement of particles onto response-map peaks.

Each alive particle is repeatedly re-centered on the peak of its own
response map until the displacement drops below ``epsilon``, with a map
likelihood below ``l_min`` discarding the particle at any pass.  Survivors
that end within ``epsilon`` of each other are merged into one converged
peak whose likelihood comes from the map generated at the peak itself, so
the weight-bearing map and the support point always agree.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence as Seq

import numpy as np

from d2cip import observation
from d2cip.observation import AppearanceModelHandle, Frame
from d2cip.state import Particle, TargetState, peak_of


@dataclass(frozen=True)
class RefinementConfig:
    epsilon: float = 1.0
    l_min: float = 0.0
    max_iterations: int = 10
    grid_radius: int = 15

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.l_min < 0:
            raise ValueError("l_min must be >= 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.grid_radius < 1:
            raise ValueError("grid_radius must be >= 1")


@dataclass(frozen=True)
class ConvergedPeak:
    """A merged final peak and the particles whose refinement ended there."""

    peak: TargetState
    likelihood: float                    # map likelihood generated at the peak
    members: tuple[int, ...]             # indices into the refined-particle list
    member_components: tuple[int, ...]   # source component of each member
    iterations: tuple[int, ...]          # per-member pass counts
    model_id: int                        # model that produced the peak's map
    on_border: bool = False

    def __post_init__(self):
        if not self.members:
            raise ValueError("a converged peak needs at least one member")
        if not (len(self.members) == len(self.member_components) == len(self.iterations)):
            raise ValueError("per-member fields must align")

    @property
    def converged_count(self) -> int:
        return len(self.members)

    @property
    def source_components(self) -> frozenset:
        return frozenset(self.member_components)

    @property
    def component_counts(self) -> tuple[tuple[int, int], ...]:
        counts: dict[int, int] = {}
        for j in self.member_components:
            counts[j] = counts.get(j, 0) + 1
        return tuple(sorted(counts.items()))


class AllParticlesDiscarded(Exception):
    """Every particle fell below l_min; the frame carries no information."""


def _models_by_component(models) -> "Mapping[int, AppearanceModelHandle] | None":
    if isinstance(models, AppearanceModelHandle):
        return None  # single shared handle
    return models


def _handle_for(models, shared, component: int) -> AppearanceModelHandle:
    if shared is not None:
        return shared
    return models[component]


def refine_particle(particle: Particle, model: AppearanceModelHandle,
                    frame: Frame, cfg: RefinementConfig) -> Particle:
    """Refine one particle; returns it finalized, or dead if gated out.

    The returned particle's trace holds every evaluated position with the
    matching map likelihoods; its state sits at the last trace entry and its
    likelihood is the last trace likelihood.  Size is held fixed throughout.
    """
    if not particle.alive:
        return particle
    size = particle.state.size
    center = observation.clamp_center(frame, particle.state.position)
    trace: list[tuple[int, int]] = []
    trace_l: list[float] = []
    best_l = -math.inf
    best = center
    converged = False
    passes = 0
    for _ in range(cfg.max_iterations):
        passes += 1
        rmap = observation.respond(model, frame, TargetState(center, size),
                                   cfg.grid_radius)
        like = observation.likelihood_of(rmap)
        trace.append(center)
        trace_l.append(like)
        if like < cfg.l_min:
            return _finalize(particle, center, size, passes, like, trace, trace_l,
                             alive=False, frame=frame)
        if like > best_l:
            best_l, best = like, center
        coord, _ = peak_of(rmap)
        peak = observation.clamp_center(frame, coord)
        if math.hypot(peak[0] - center[0], peak[1] - center[1]) < cfg.epsilon:
            converged = True
            break
        center = peak
    if not converged:
        # ran out of passes; settle on the best position actually evaluated
        center = best
        if trace[-1] != best:
            trace.append(best)
            trace_l.append(best_l)
    return _finalize(particle, center, size, passes, trace_l[-1], trace, trace_l,
                     alive=True, frame=frame)


def _finalize(particle, center, size, passes, like, trace, trace_l, alive, frame):
    return Particle(
        state=TargetState(np.array(center, dtype=np.float64), size),
        initial_state=particle.initial_state,
        source_component=particle.source_component,
        iteration_count=passes,
        likelihood=like,
        alive=alive,
        trace=tuple(trace),
        trace_likelihoods=tuple(trace_l),
    )


def refine_all(particles: Seq[Particle], models, frame: Frame,
               cfg: RefinementConfig) -> tuple[list[ConvergedPeak], list[Particle]]:
    """Refine every alive particle and merge coincident final positions.

    ``models`` is either one shared handle or a mapping from source-component
    index to handle.  Returns the merged peaks plus the full refined particle
    list (dead ones included, for diagnostics).  Raises
    :class:`AllParticlesDiscarded` when nothing survives the gate.
    """
    mapping = _models_by_component(models)
    shared = models if mapping is None else None
    n = len(particles)
    if n == 0 or not any(p.alive for p in particles):
        raise AllParticlesDiscarded("no alive particles to refine")

    centers = np.zeros((n, 2), dtype=np.int64)
    sizes = np.zeros((n, 2), dtype=np.float64)
    handles: list[AppearanceModelHandle] = []
    alive = np.zeros(n, dtype=bool)
    for i, p in enumerate(particles):
        handles.append(_handle_for(mapping, shared, p.source_component))
        if not p.alive:
            continue
        alive[i] = True
        centers[i] = observation.clamp_center(frame, p.state.position)
        sizes[i] = p.state.size

    converged = np.zeros(n, dtype=bool)
    dead = ~alive
    passes = np.zeros(n, dtype=np.int64)
    best_l = np.full(n, -np.inf)
    best = centers.copy()
    traces: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    trace_l: list[list[float]] = [[] for _ in range(n)]

    for _ in range(cfg.max_iterations):
        pending = np.flatnonzero(~converged & ~dead)
        if pending.size == 0:
            break
        # one batched map evaluation per distinct model handle
        by_handle: dict[int, list[int]] = {}
        for i in pending:
            by_handle.setdefault(id(handles[i]), []).append(int(i))
        for group in by_handle.values():
            idx = np.asarray(group, dtype=np.int64)
            maps = observation.respond_many(handles[group[0]], frame,
                                            centers[idx], cfg.grid_radius,
                                            sizes=sizes[idx])
            for row, i in enumerate(group):
                like = observation.likelihood_of_scores(maps[row])
                passes[i] += 1
                traces[i].append((int(centers[i, 0]), int(centers[i, 1])))
                trace_l[i].append(like)
                if like < cfg.l_min:
                    dead[i] = True
                    continue
                if like > best_l[i]:
                    best_l[i] = like
                    best[i] = centers[i]
                flat = int(np.argmax(maps[row]))
                side = maps.shape[2]
                px = centers[i, 0] - cfg.grid_radius + flat % side
                py = centers[i, 1] - cfg.grid_radius + flat // side
                peak = observation.clamp_center(frame, (px, py))
                d = math.hypot(peak[0] - centers[i, 0], peak[1] - centers[i, 1])
                if d < cfg.epsilon:
                    converged[i] = True
                else:
                    centers[i] = peak

    refined: list[Particle] = []
    for i, p in enumerate(particles):
        if not alive[i]:
            refined.append(p)
            continue
        if dead[i]:
            refined.append(_finalize(p, (int(centers[i, 0]), int(centers[i, 1])),
                                     p.state.size, int(passes[i]), trace_l[i][-1],
                                     traces[i], trace_l[i], alive=False, frame=frame))
            continue
        if not converged[i]:
            centers[i] = best[i]
            last = traces[i][-1]
            if last != (int(best[i, 0]), int(best[i, 1])):
                traces[i].append((int(best[i, 0]), int(best[i, 1])))
                trace_l[i].append(float(best_l[i]))
        refined.append(_finalize(p, (int(centers[i, 0]), int(centers[i, 1])),
                                 p.state.size, int(passes[i]), trace_l[i][-1],
                                 traces[i], trace_l[i], alive=True, frame=frame))

    peaks = merge_peaks(refined, frame, cfg, handles)
    if not peaks:
        raise AllParticlesDiscarded("every particle fell below l_min")
    return peaks, refined


def merge_peaks(refined: Seq[Particle], frame: Frame, cfg: RefinementConfig,
                handles: Seq[AppearanceModelHandle]) -> list[ConvergedPeak]:
    """Group survivors whose final positions coincide within epsilon.

    Greedy assignment in a fixed order (likelihood desc, then position, then
    component) so the grouping does not depend on input particle order; the
    group's peak is its highest-likelihood member and the group likelihood is
    that member's final-map likelihood.
    """
    survivors = [i for i, p in enumerate(refined) if p.alive]
    if not survivors:
        return []
    order = sorted(survivors, key=lambda i: (
        -refined[i].likelihood,
        refined[i].state.position[1], refined[i].state.position[0],
        refined[i].source_component, i))
    taken = set()
    peaks: list[ConvergedPeak] = []
    for owner in order:
        if owner in taken:
            continue
        opos = refined[owner].state.position
        members = []
        for i in order:
            if i in taken:
                continue
            d = math.hypot(refined[i].state.position[0] - opos[0],
                           refined[i].state.position[1] - opos[1])
            if d <= cfg.epsilon:
                members.append(i)
                taken.add(i)
        members.sort()
        cx, cy = int(opos[0]), int(opos[1])
        border = cx in (0, frame.width - 1) or cy in (0, frame.height - 1)
        peaks.append(ConvergedPeak(
            peak=refined[owner].state,
            likelihood=refined[owner].likelihood,
            members=tuple(members),
            member_components=tuple(refined[i].source_component for i in members),
            iterations=tuple(refined[i].iteration_count for i in members),
            model_id=handles[owner].model_id,
            on_border=border,
        ))
    return peaks


def dump_traces(refined: Seq[Particle], path) -> None:
    """Write one JSON line per particle with its refinement history."""
    with open(path, "w") as fh:
        for i, p in enumerate(refined):
            fh.write(json.dumps({
                "particle": i,
                "component": p.source_component,
                "alive": p.alive,
                "iterations": p.iteration_count,
                "likelihoods": list(p.trace_likelihoods),
                "positions": [list(pos) for pos in p.trace],
            }) + "\n")
