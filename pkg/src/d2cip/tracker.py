"""End-to-end tracking over one sequence.

Each frame runs predict -> sample -> refine -> posterior -> cluster ->
estimate -> model update -> handoff -> resample under one of four variants:

PF     one shift per particle to its initial map's peak, weights taken from
       the maps at the pre-shift positions (deliberately keeping the
       mismatched support), argmax-weight estimate, resample every frame;
IPF    full iterative refinement with converged-count estimation, still
       resampling every frame;
IPFK   IPF plus mode clustering (counts within a cluster, weights across);
D2CIP  IPFK plus per-mode appearance models and ESS-gated resampling.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Optional, Sequence as Seq

import numpy as np

from d2cip import estimation, motion, observation
from d2cip.estimation import EstimatorConfig, Posterior
from d2cip.metrics import MetricBundle, compute_metrics
from d2cip.motion import PriorMode
from d2cip.observation import AppearanceModelHandle, Frame, Sequence
from d2cip.refinement import (AllParticlesDiscarded, RefinementConfig,
                              merge_peaks, refine_all)
from d2cip.state import (Particle, PosteriorMode, RandomSource, StateMean,
                         TargetState)

VARIANTS = ("PF", "IPF", "IPFK", "D2CIP")

SIGMA_POSITION_FRACTION = 0.08   # of mean initial size, floored at 1.5 px
SIGMA_SIZE_FRACTION = 0.02
L_MIN_FRACTION = 0.05            # of the centered frame-1 map likelihood
CLUSTER_SCALE = 1.0


@dataclass(frozen=True)
class RunConfig:
    backend: str = observation.SYNTHETIC
    variant: str = "D2CIP"
    n_total: int = 200
    sigma: Optional[tuple] = None     # 8-vector; None = scaled to target size
    epsilon: float = 1.0
    l_min: Optional[float] = None     # None = L_MIN_FRACTION of reference
    max_iterations: int = 10
    grid_radius: int = 15
    gamma: float = 0.5
    k_max: int = 4
    m_max: int = 5
    eta: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.backend not in observation.BACKENDS:
            raise ValueError(f"backend must be one of {observation.BACKENDS}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.n_total < 1:
            raise ValueError("n_total must be >= 1")
        if self.m_max < 1:
            raise ValueError("m_max must be >= 1")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.sigma is not None:
            sigma = tuple(float(x) for x in self.sigma)
            if len(sigma) != 8 or any(x < 0 for x in sigma):
                raise ValueError("sigma must be 8 non-negative values")
            object.__setattr__(self, "sigma", sigma)
        if self.l_min is not None and self.l_min < 0:
            raise ValueError("l_min must be >= 0")
        # range checks shared with the per-module configs
        RefinementConfig(epsilon=self.epsilon, l_min=self.l_min or 0.0,
                         max_iterations=self.max_iterations,
                         grid_radius=self.grid_radius)
        EstimatorConfig(gamma=self.gamma, k_max=self.k_max)


@dataclass(frozen=True)
class FrameRecord:
    frame_index: int
    estimate: TargetState
    truth: Optional[TargetState]
    ess: float
    n_modes: int
    n_clusters: int
    n_discarded: int
    mean_iterations: float
    lost: bool
    resampled: bool


@dataclass(frozen=True)
class TrackResult:
    config: RunConfig
    records: tuple[FrameRecord, ...]

    def __post_init__(self):
        idx = [r.frame_index for r in self.records]
        if idx != list(range(idx[0], idx[0] + len(idx))):
            raise ValueError("frame records must be contiguous")

    @property
    def estimates(self) -> list[TargetState]:
        return [r.estimate for r in self.records]

    @property
    def truths(self) -> list[TargetState]:
        return [r.truth for r in self.records]

    def metrics(self) -> MetricBundle:
        if any(t is None for t in self.truths):
            raise ValueError("metrics need ground truth on every frame")
        return compute_metrics(self.estimates, self.truths)

    def to_dict(self) -> dict:
        return {
            "format": "d2cip-result",
            "version": 1,
            "config": asdict(self.config),
            "frames": [_record_dict(r) for r in self.records],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrackResult":
        if doc.get("format") != "d2cip-result":
            raise ValueError("not a track-result document")
        raw = dict(doc["config"])
        if raw.get("sigma") is not None:
            raw["sigma"] = tuple(raw["sigma"])
        return cls(config=RunConfig(**raw),
                   records=tuple(_record_from(d) for d in doc["frames"]))


def _state_dict(s: Optional[TargetState]):
    if s is None:
        return None
    return {"position": [float(x) for x in s.position],
            "size": [float(x) for x in s.size]}


def _state_from(d) -> Optional[TargetState]:
    return None if d is None else TargetState(d["position"], d["size"])


def _record_dict(r: FrameRecord) -> dict:
    return {
        "frame": r.frame_index,
        "estimate": _state_dict(r.estimate),
        "truth": _state_dict(r.truth),
        "ess": None if math.isnan(r.ess) else r.ess,
        "modes": r.n_modes,
        "clusters": r.n_clusters,
        "discarded": r.n_discarded,
        "mean_iterations": r.mean_iterations,
        "lost": r.lost,
        "resampled": r.resampled,
    }


def _record_from(d: dict) -> FrameRecord:
    return FrameRecord(
        frame_index=int(d["frame"]),
        estimate=_state_from(d["estimate"]),
        truth=_state_from(d["truth"]),
        ess=float("nan") if d["ess"] is None else float(d["ess"]),
        n_modes=int(d["modes"]),
        n_clusters=int(d["clusters"]),
        n_discarded=int(d["discarded"]),
        mean_iterations=float(d["mean_iterations"]),
        lost=bool(d["lost"]),
        resampled=bool(d["resampled"]),
    )


def _default_sigma(truth0: TargetState) -> np.ndarray:
    mean_size = float(np.mean(truth0.size))
    sp = max(1.5, SIGMA_POSITION_FRACTION * mean_size)
    ss = SIGMA_SIZE_FRACTION * mean_size
    return np.array([sp, sp, ss, ss, 0.0, 0.0, 0.0, 0.0])


def _initial_model(cfg: RunConfig, sequence: Sequence) -> AppearanceModelHandle:
    if cfg.backend == observation.SYNTHETIC:
        if sequence.scenario is None:
            raise ValueError("synthetic backend needs a scenario-bearing sequence")
        return observation.make_synthetic_model(sequence.scenario, model_id=0)
    return observation.make_template_model(sequence.frames[0], sequence.truth[0],
                                           model_id=0)


def reference_likelihood(cfg: RunConfig, sequence: Sequence) -> float:
    """Likelihood of the map centered on the frame-1 ground truth."""
    model = _initial_model(cfg, sequence)
    rmap = observation.respond(model, sequence.frames[0], sequence.truth[0],
                               cfg.grid_radius)
    return observation.likelihood_of(rmap)


def run_sequence(cfg: RunConfig, sequence: Sequence,
                 trace_sink: Optional[list] = None) -> TrackResult:
    """Track one sequence from its frame-1 ground truth (one-pass protocol).

    When ``trace_sink`` is a list it receives one ``(frame_index, posterior,
    clusters)`` tuple per tracked frame, taken before any resampling so the
    recorded weights are the informative ones.
    """
    if len(sequence) < 2:
        raise ValueError("a sequence needs at least 2 frames")
    truth0 = sequence.truth[0]
    frame0 = sequence.frames[0]
    rng = RandomSource(cfg.seed)
    sigma = (_default_sigma(truth0) if cfg.sigma is None
             else np.asarray(cfg.sigma, dtype=np.float64))
    model0 = _initial_model(cfg, sequence)
    l_min = (cfg.l_min if cfg.l_min is not None
             else L_MIN_FRACTION * observation.likelihood_of(
                 observation.respond(model0, frame0, truth0, cfg.grid_radius)))
    rcfg = RefinementConfig(epsilon=cfg.epsilon, l_min=l_min,
                            max_iterations=cfg.max_iterations,
                            grid_radius=cfg.grid_radius)
    ecfg = EstimatorConfig(gamma=cfg.gamma, k_max=cfg.k_max,
                           cluster_scale=CLUSTER_SCALE)

    models: dict[int, AppearanceModelHandle] = {0: model0}
    next_id = 1
    prior: list[PriorMode] = [PriorMode(
        mean=StateMean(state=truth0, velocity=np.zeros(4)), weight=1.0,
        model_id=0)]
    estimate = truth0
    size_max = np.array([frame0.width, frame0.height], dtype=np.float64)
    records = [FrameRecord(frame_index=frame0.index, estimate=truth0,
                           truth=truth0, ess=1.0, n_modes=1, n_clusters=1,
                           n_discarded=0, mean_iterations=0.0, lost=False,
                           resampled=False)]

    for t in range(1, len(sequence)):
        frame = sequence.frames[t]
        rng_sample, rng_resample = rng.split(2)
        previous_means = [pm.mean for pm in prior]
        mixture = motion.build_mixture(prior, sigma, m_max=cfg.m_max)
        n_per = motion.split_budget(cfg.n_total, mixture.n_components)
        particles = motion.sample_stratified(mixture, n_per, rng_sample,
                                             size_max=size_max)
        if cfg.variant == "PF":
            step = _pf_step(particles, models[0], frame, rcfg)
        else:
            if cfg.variant == "D2CIP":
                handles = {j: models[mid] for j, mid in enumerate(mixture.model_ids)}
            else:
                handles = models[0]
            step = _refine_step(particles, handles, frame, rcfg, mixture,
                                cfg.variant, ecfg)
        if step is None:
            # nothing survived the gate: hold the estimate, let the prior
            # coast on its own velocity, leave models untouched
            prior = [replace(pm, mean=motion.predict_mean(pm.mean))
                     for pm in prior]
            records.append(FrameRecord(
                frame_index=frame.index, estimate=estimate,
                truth=sequence.truth[t], ess=float("nan"), n_modes=0,
                n_clusters=0, n_discarded=len(particles),
                mean_iterations=0.0, lost=True, resampled=False))
            continue
        posterior, clusters, est_idx, n_discarded, mean_iters = step
        estimate = posterior.modes[est_idx].peak

        if cfg.variant == "D2CIP":
            models, mode_ids, next_id = observation.update_models(
                models, frame, posterior.modes, eta=cfg.eta, l_update=l_min,
                next_id=next_id)
            posterior = Posterior(
                tuple(replace(m, model_id=mid)
                      for m, mid in zip(posterior.modes, mode_ids)),
                posterior.frame_index)
            final = estimation.maybe_resample(posterior, ecfg, rng_resample)
            resampled = final is not posterior
        else:
            models = {0: observation.refresh_model(
                models[0], frame, estimate, posterior.modes[est_idx].likelihood,
                eta=cfg.eta, l_update=l_min)}
            final = estimation.resample(posterior, rng_resample)
            resampled = True
        if trace_sink is not None:
            trace_sink.append((frame.index, posterior, clusters))
        prior = estimation.handoff_modes(final, previous_means, m_max=cfg.m_max)
        records.append(FrameRecord(
            frame_index=frame.index, estimate=estimate,
            truth=sequence.truth[t],
            ess=estimation.effective_sample_size(posterior),
            n_modes=len(posterior), n_clusters=clusters.k,
            n_discarded=n_discarded, mean_iterations=mean_iters, lost=False,
            resampled=resampled))
    return TrackResult(config=cfg, records=tuple(records))


def _refine_step(particles, handles, frame, rcfg, mixture, variant, ecfg):
    try:
        peaks, refined = refine_all(particles, handles, frame, rcfg)
    except AllParticlesDiscarded:
        return None
    posterior = estimation.build_posterior(peaks, mixture, frame.index)
    if variant in ("IPFK", "D2CIP"):
        clusters = estimation.cluster_modes(posterior, ecfg)
    else:
        clusters = estimation.single_cluster(posterior)
    est_idx = estimation.select_mode(posterior, clusters)
    n_discarded = sum(1 for p in refined if not p.alive)
    alive = [p.iteration_count for p in refined if p.alive]
    mean_iters = float(np.mean(alive)) if alive else 0.0
    return posterior, clusters, est_idx, n_discarded, mean_iters


def _pf_step(particles: Seq[Particle], model: AppearanceModelHandle,
             frame: Frame, rcfg: RefinementConfig):
    """Single-shift baseline with the pre-shift (mismatched) map weights."""
    centers = np.array([observation.clamp_center(frame, p.state.position)
                        for p in particles], dtype=np.int64)
    sizes = np.array([p.state.size for p in particles], dtype=np.float64)
    maps = observation.respond_many(model, frame, centers, rcfg.grid_radius,
                                    sizes=sizes)
    side = maps.shape[2]
    shifted: list[Particle] = []
    for i, p in enumerate(particles):
        like = observation.likelihood_of_scores(maps[i])
        flat = int(np.argmax(maps[i]))
        px = int(centers[i, 0]) - rcfg.grid_radius + flat % side
        py = int(centers[i, 1]) - rcfg.grid_radius + flat // side
        pos = observation.clamp_center(frame, (px, py))
        # the final position deliberately carries the likelihood of the map
        # at the pre-shift position; no map is generated at the new support
        shifted.append(Particle(
            state=TargetState(np.array(pos, dtype=np.float64), p.state.size),
            initial_state=p.initial_state,
            source_component=p.source_component,
            iteration_count=1, likelihood=like, alive=True,
            trace=((int(centers[i, 0]), int(centers[i, 1])),),
            trace_likelihoods=(like,)))
    groups = merge_peaks(shifted, frame, rcfg, [model] * len(shifted))
    raw = np.array([sum(shifted[m].likelihood for m in g.members)
                    for g in groups])
    total = float(raw.sum())
    weights = raw / total if total > 0 else np.full(len(raw), 1.0 / len(raw))
    modes = tuple(PosteriorMode(
        peak=g.peak, weight=float(w), converged_count=g.converged_count,
        source_components=g.source_components, model_id=0,
        likelihood=float(r), component_counts=g.component_counts)
        for g, w, r in zip(groups, weights, raw))
    posterior = Posterior(modes=modes, frame_index=frame.index)
    clusters = estimation.single_cluster(posterior)
    est_idx = int(np.argmax(weights))
    return posterior, clusters, est_idx, 0, 1.0
