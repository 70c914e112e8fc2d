"""Synthetic tracking scenarios: a moving peak-sum surface with clutter,
occlusion windows and seeded noise.

A scenario fully determines both the analytic response surface the synthetic
observation backend evaluates and, when rendering is requested, the pixel
frames (the same surface clipped into [0, 1]), so template-backend runs can
reuse the generated sequences.  Scenarios serialize to a small JSON document
(see :func:`SyntheticScenario.to_dict` for the schema).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from d2cip import kernels
from d2cip.observation import Frame, Sequence
from d2cip.state import Array, TargetState

SCENARIO_KINDS = ("linear", "fast-motion", "occlusion", "distractor")
SCENARIO_FORMAT = "d2cip-scenario"


@dataclass(frozen=True)
class ClutterPeak:
    """A non-target peak moving on a straight path, active in [start, stop)."""

    position: tuple[float, float]
    velocity: tuple[float, float]
    amplitude: float
    width: float
    start: int = 0
    stop: Optional[int] = None
    occludable: bool = False

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("clutter amplitude must be >= 0")

    def position_at(self, t: int) -> tuple[float, float]:
        return (self.position[0] + self.velocity[0] * t,
                self.position[1] + self.velocity[1] * t)

    def active_at(self, t: int) -> bool:
        return t >= self.start and (self.stop is None or t < self.stop)


@dataclass(frozen=True)
class Occlusion:
    """Frames [start, stop) in which occludable peaks lose ``attenuation``
    of their amplitude (attenuation 0.9 leaves 10% of the peak)."""

    start: int
    stop: int
    attenuation: float

    def __post_init__(self):
        if not 0.0 <= self.attenuation <= 1.0:
            raise ValueError("attenuation must lie in [0, 1]")


@dataclass(frozen=True)
class SyntheticScenario:
    """Per-frame ground truth plus everything needed to evaluate the surface."""

    width: int
    height: int
    positions: Array          # (T, 2) target center per frame
    sizes: Array              # (T, 2) target size per frame
    amplitude: float = 1.0
    peak_width: float = 6.0
    clutter: tuple[ClutterPeak, ...] = ()
    occlusions: tuple[Occlusion, ...] = ()
    noise_std: float = 0.0
    seed: int = 0
    name: str = "scenario"

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=np.float64)
        sizes = np.asarray(self.sizes, dtype=np.float64)
        if positions.ndim != 2 or positions.shape[1] != 2 or positions.shape[0] < 1:
            raise ValueError("positions must be (T, 2)")
        if sizes.shape != positions.shape:
            raise ValueError("sizes must match positions")
        if np.any(sizes <= 0):
            raise ValueError("ground-truth sizes must be positive")
        if self.amplitude < 0 or self.noise_std < 0:
            raise ValueError("amplitude and noise_std must be >= 0")
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "sizes", sizes)

    @property
    def n_frames(self) -> int:
        return self.positions.shape[0]

    def truth(self, t: int) -> TargetState:
        return TargetState(self.positions[t], self.sizes[t])

    def target_attenuation(self, t: int) -> float:
        """Multiplier applied to occludable peak amplitudes at frame t."""
        factor = 1.0
        for occ in self.occlusions:
            if occ.start <= t < occ.stop:
                factor *= 1.0 - occ.attenuation
        return factor

    def peaks_at(self, t: int):
        """Peak arrays (x, y, amplitude, width) for the surface at frame t.

        The target peak comes first; its amplitude (and that of occludable
        clutter) carries the occlusion attenuation of the frame.
        """
        factor = self.target_attenuation(t)
        xs = [float(self.positions[t, 0])]
        ys = [float(self.positions[t, 1])]
        amps = [self.amplitude * factor]
        widths = [self.peak_width]
        for peak in self.clutter:
            if not peak.active_at(t):
                continue
            px, py = peak.position_at(t)
            xs.append(px)
            ys.append(py)
            amps.append(peak.amplitude * (factor if peak.occludable else 1.0))
            widths.append(peak.width)
        return (np.asarray(xs), np.asarray(ys), np.asarray(amps), np.asarray(widths))

    def render(self, t: int) -> Array:
        px, py, amps, widths = self.peaks_at(t)
        return np.asarray(kernels.render_intensity(
            self.width, self.height, px, py, amps, widths,
            self.noise_std, self.seed, t))

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": SCENARIO_FORMAT,
            "version": 1,
            "name": self.name,
            "width": self.width,
            "height": self.height,
            "seed": self.seed,
            "noise_std": self.noise_std,
            "target": {
                "amplitude": self.amplitude,
                "peak_width": self.peak_width,
                "positions": self.positions.tolist(),
                "sizes": self.sizes.tolist(),
            },
            "clutter": [
                {
                    "position": list(c.position),
                    "velocity": list(c.velocity),
                    "amplitude": c.amplitude,
                    "width": c.width,
                    "start": c.start,
                    "stop": c.stop,
                    "occludable": c.occludable,
                }
                for c in self.clutter
            ],
            "occlusions": [
                {"start": o.start, "stop": o.stop, "attenuation": o.attenuation}
                for o in self.occlusions
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SyntheticScenario":
        if doc.get("format") != SCENARIO_FORMAT:
            raise ValueError("not a scenario document")
        target = doc["target"]
        return cls(
            width=int(doc["width"]),
            height=int(doc["height"]),
            positions=np.asarray(target["positions"], dtype=np.float64),
            sizes=np.asarray(target["sizes"], dtype=np.float64),
            amplitude=float(target["amplitude"]),
            peak_width=float(target["peak_width"]),
            clutter=tuple(
                ClutterPeak(
                    position=tuple(c["position"]),
                    velocity=tuple(c["velocity"]),
                    amplitude=float(c["amplitude"]),
                    width=float(c["width"]),
                    start=int(c["start"]),
                    stop=None if c.get("stop") is None else int(c["stop"]),
                    occludable=bool(c.get("occludable", False)),
                )
                for c in doc.get("clutter", [])
            ),
            occlusions=tuple(
                Occlusion(int(o["start"]), int(o["stop"]), float(o["attenuation"]))
                for o in doc.get("occlusions", [])
            ),
            noise_std=float(doc["noise_std"]),
            seed=int(doc["seed"]),
            name=str(doc.get("name", "scenario")),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "SyntheticScenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


def make_sequence(scenario: SyntheticScenario, render: bool = False) -> Sequence:
    """Wrap a scenario as a trackable sequence; pixels only when rendering."""
    frames = []
    for t in range(scenario.n_frames):
        pixels = scenario.render(t) if render else None
        frames.append(Frame(width=scenario.width, height=scenario.height,
                            index=t, pixels=pixels))
    truth = tuple(scenario.truth(t) for t in range(scenario.n_frames))
    return Sequence(frames=tuple(frames), truth=truth, scenario=scenario)


def _linear_track(n_frames, start, velocity, size, width, height, margin):
    """Constant-velocity path; raises if it would leave the safe interior."""
    t = np.arange(n_frames, dtype=np.float64)[:, np.newaxis]
    positions = np.asarray(start, dtype=np.float64) + t * np.asarray(velocity, dtype=np.float64)
    lo = np.array([margin, margin])
    hi = np.array([width - 1 - margin, height - 1 - margin])
    if np.any(positions < lo) or np.any(positions > hi):
        raise ValueError("track leaves the frame interior; shorten it or slow it down")
    sizes = np.tile(np.asarray(size, dtype=np.float64), (n_frames, 1))
    return positions, sizes


def generate_scenario(kind: str, params: Optional[dict] = None, seed: int = 0) -> SyntheticScenario:
    """Build one of the four deterministic scenario kinds.

    linear       constant-velocity target, nothing else;
    fast-motion  a 5-frame velocity spike well beyond the sampling spread;
    occlusion    the target peak attenuated over a 10-frame window;
    distractor   a second peak at a fraction of the target amplitude
                 shadowing the target path.
    """
    p = dict(params or {})
    kind = kind.strip().lower()
    if kind not in SCENARIO_KINDS:
        raise ValueError(f"unknown scenario kind {kind!r} (choose from {SCENARIO_KINDS})")

    width = int(p.pop("width", 160))
    height = int(p.pop("height", 120))
    n_frames = int(p.pop("n_frames", 50))
    size = tuple(p.pop("size", (22.0, 22.0)))
    amplitude = float(p.pop("amplitude", 1.0))
    peak_width = float(p.pop("peak_width", 6.0))
    noise_std = float(p.pop("noise_std", 0.01))
    start = tuple(p.pop("start", (30.0, 40.0)))
    velocity = tuple(p.pop("velocity", (1.5, 0.5)))
    margin = float(p.pop("margin", 12.0))
    name = p.pop("name", f"{kind}-{seed}")

    clutter: tuple[ClutterPeak, ...] = ()
    occlusions: tuple[Occlusion, ...] = ()

    if kind == "linear":
        positions, sizes = _linear_track(n_frames, start, velocity, size, width, height, margin)
    elif kind == "fast-motion":
        spike_start = int(p.pop("spike_start", n_frames // 3))
        spike_frames = int(p.pop("spike_frames", 5))
        spike_delta = p.pop("spike_delta", None)
        if spike_delta is None:
            # comfortably beyond 3x the default position-sampling spread
            mag = 3.0 * 0.05 * (size[0] + size[1]) / 2.0 + 2.0
            spike_delta = (mag, 0.0)
        base = np.tile(np.asarray(velocity, dtype=np.float64), (n_frames, 1))
        base[spike_start:spike_start + spike_frames] += np.asarray(spike_delta, dtype=np.float64)
        positions = np.asarray(start, dtype=np.float64) + np.vstack(
            [np.zeros(2), np.cumsum(base[:-1], axis=0)])
        lo = np.array([margin, margin])
        hi = np.array([width - 1 - margin, height - 1 - margin])
        if np.any(positions < lo) or np.any(positions > hi):
            raise ValueError("spiked track leaves the frame interior")
        sizes = np.tile(np.asarray(size, dtype=np.float64), (n_frames, 1))
    elif kind == "occlusion":
        positions, sizes = _linear_track(n_frames, start, velocity, size, width, height, margin)
        occ_start = int(p.pop("occlusion_start", n_frames // 2 - 5))
        occ_frames = int(p.pop("occlusion_frames", 10))
        attenuation = float(p.pop("attenuation", 0.9))
        occlusions = (Occlusion(occ_start, occ_start + occ_frames, attenuation),)
    else:  # distractor
        positions, sizes = _linear_track(n_frames, start, velocity, size, width, height, margin)
        offset = tuple(p.pop("distractor_offset", (0.0, 16.0)))
        rel_amp = float(p.pop("distractor_amplitude", 0.8))
        clutter = (ClutterPeak(
            position=(start[0] + offset[0], start[1] + offset[1]),
            velocity=velocity,
            amplitude=rel_amp * amplitude,
            width=float(p.pop("distractor_width", peak_width)),
        ),)
    if p:
        raise ValueError(f"unknown scenario parameters: {sorted(p)}")

    return SyntheticScenario(
        width=width, height=height, positions=positions, sizes=sizes,
        amplitude=amplitude, peak_width=peak_width, clutter=clutter,
        occlusions=occlusions, noise_std=noise_std, seed=seed, name=str(name))
