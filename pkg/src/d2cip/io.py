"""Disk formats: binary PGM frames, groundtruth.txt, flat config files and
saved track results.

A sequence directory holds ``%06d.pgm`` frames plus a ``groundtruth.txt``
with one ``x,y,w,h`` line per frame (top-left corner convention, converted
to center+size internally).  Synthetic scenarios travel as JSON next to the
frames, so both backends can run from the same directory.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Optional

import numpy as np

from d2cip.observation import Frame, Sequence
from d2cip.scenario import SyntheticScenario, make_sequence
from d2cip.state import Array, TargetState

SCENARIO_FILE = "scenario.json"
GROUNDTRUTH_FILE = "groundtruth.txt"


def write_pgm(path, pixels: Array) -> None:
    """Binary 8-bit PGM from a [0, 1] float image."""
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 2:
        raise ValueError("PGM needs a 2-D image")
    data = np.floor(np.clip(pixels, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> Array:
    """[0, 1] float image from a binary 8-bit PGM."""
    blob = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos:pos + 1] == b"#":
            while pos < len(blob) and blob[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        tokens.append(blob[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if not 0 < maxval < 256:
        raise ValueError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    pos += 1  # single whitespace byte after the header
    if len(blob) - pos < w * h:
        raise ValueError(f"{path}: truncated pixel data")
    data = np.frombuffer(blob, dtype=np.uint8, count=w * h, offset=pos)
    return data.reshape(h, w).astype(np.float64) / float(maxval)


def parse_groundtruth_line(line: str) -> TargetState:
    """One ``x,y,w,h`` record (commas or whitespace), top-left convention."""
    parts = [p for p in re.split(r"[,\s]+", line.strip()) if p]
    if len(parts) != 4:
        raise ValueError(f"groundtruth line needs 4 values, got {line!r}")
    x, y, w, h = (float(p) for p in parts)
    return TargetState(position=(x + w / 2.0, y + h / 2.0), size=(w, h))


def format_groundtruth_line(state: TargetState) -> str:
    x = state.position[0] - state.size[0] / 2.0
    y = state.position[1] - state.size[1] / 2.0
    return f"{x:g},{y:g},{state.size[0]:g},{state.size[1]:g}"


def read_groundtruth(path) -> list[TargetState]:
    states = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            states.append(parse_groundtruth_line(line))
    return states


def load_sequence(directory) -> Sequence:
    """Sequence from a frame directory.

    A ``scenario.json`` present in the directory is attached (and supplies
    the frames when no PGM files exist); PGM frames are matched by numeric
    filename order and must agree with the groundtruth line count.
    """
    directory = Path(directory)
    scenario = None
    scenario_path = directory / SCENARIO_FILE
    if scenario_path.exists():
        scenario = SyntheticScenario.load(scenario_path)
    pgms = sorted(directory.glob("*.pgm"),
                  key=lambda p: int(re.sub(r"\D", "", p.stem) or 0))
    if not pgms:
        if scenario is None:
            raise FileNotFoundError(f"{directory}: no PGM frames and no {SCENARIO_FILE}")
        return make_sequence(scenario, render=False)
    truth_path = directory / GROUNDTRUTH_FILE
    if not truth_path.exists():
        raise FileNotFoundError(f"{directory}: missing {GROUNDTRUTH_FILE}")
    truth = read_groundtruth(truth_path)
    if len(truth) != len(pgms):
        raise ValueError(f"{directory}: {len(pgms)} frames but {len(truth)} "
                         "groundtruth lines")
    frames = []
    for i, path in enumerate(pgms):
        pixels = read_pgm(path)
        frames.append(Frame(width=pixels.shape[1], height=pixels.shape[0],
                            index=i, pixels=pixels))
    return Sequence(frames=tuple(frames), truth=tuple(truth), scenario=scenario)


def write_sequence(directory, scenario: SyntheticScenario, render: bool = False) -> None:
    """Materialize a scenario: scenario.json, groundtruth.txt, PGMs if asked."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    scenario.save(directory / SCENARIO_FILE)
    lines = [format_groundtruth_line(scenario.truth(t))
             for t in range(scenario.n_frames)]
    (directory / GROUNDTRUTH_FILE).write_text("\n".join(lines) + "\n")
    if render:
        for t in range(scenario.n_frames):
            write_pgm(directory / f"{t:06d}.pgm", scenario.render(t))


# -- flat key = value config files ---------------------------------------

_CONFIG_PARSERS = {
    "backend": str,
    "variant": str,
    "n_total": int,
    "epsilon": float,
    "max_iterations": int,
    "grid_radius": int,
    "gamma": float,
    "k_max": int,
    "m_max": int,
    "eta": float,
    "seed": int,
}


def parse_sigma(text: str):
    if text.strip().lower() == "auto":
        return None
    values = tuple(float(p) for p in re.split(r"[,\s]+", text.strip()) if p)
    if len(values) != 8:
        raise ValueError("sigma needs 8 comma-separated values or 'auto'")
    return values


def parse_l_min(text: str):
    if text.strip().lower() == "auto":
        return None
    return float(text)


def parse_config(text: str) -> dict:
    """``key = value`` lines into RunConfig keyword overrides."""
    overrides: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "sigma":
            overrides[key] = parse_sigma(value)
        elif key == "l_min":
            overrides[key] = parse_l_min(value)
        elif key in _CONFIG_PARSERS:
            overrides[key] = _CONFIG_PARSERS[key](value)
        else:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
    return overrides


def read_config(path) -> dict:
    return parse_config(Path(path).read_text())


def save_result(result, path) -> None:
    Path(path).write_text(json.dumps(result.to_dict(), indent=2) + "\n")


def load_result(path):
    from d2cip.tracker import TrackResult
    return TrackResult.from_dict(json.loads(Path(path).read_text()))
