"""Shared builders for the test suite.

Most tests need a tiny synthetic scene, a hand-built converged peak, or a
posterior with chosen weights; the helpers here keep that construction in
one place.  ACCEPTANCE_LINES collects the per-criterion verdict lines from
test_acceptance.py so they are echoed after the normal pytest summary.
"""

import numpy as np

from d2cip.estimation import Posterior
from d2cip.motion import PriorMode, TransitionMixture
from d2cip.refinement import ConvergedPeak
from d2cip.scenario import SyntheticScenario
from d2cip.state import PosteriorMode, StateMean, TargetState

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def target(x, y, w=20.0, h=20.0) -> TargetState:
    return TargetState(position=(float(x), float(y)), size=(float(w), float(h)))


def mean_at(x, y, w=20.0, h=20.0, velocity=(0.0, 0.0, 0.0, 0.0)) -> StateMean:
    return StateMean(state=target(x, y, w, h), velocity=velocity)


def static_scenario(position=(40.0, 40.0), size=(20.0, 20.0), n_frames=3,
                    width=96, height=96, noise_std=0.0, peak_width=6.0,
                    clutter=(), occlusions=(), amplitude=1.0, seed=7,
                    name="unit") -> SyntheticScenario:
    """A target that sits still; the workhorse of the unit tests."""
    positions = np.tile(np.asarray(position, dtype=np.float64), (n_frames, 1))
    sizes = np.tile(np.asarray(size, dtype=np.float64), (n_frames, 1))
    return SyntheticScenario(width=width, height=height, positions=positions,
                             sizes=sizes, amplitude=amplitude,
                             peak_width=peak_width, clutter=tuple(clutter),
                             occlusions=tuple(occlusions), noise_std=noise_std,
                             seed=seed, name=name)


def converged(x, y, likelihood, members, components=None, model_id=0,
              size=(20.0, 20.0)) -> ConvergedPeak:
    """A converged peak with ``members`` particles behind it.

    ``members`` may be an int (that many members, indices 0..n-1) or an
    explicit index tuple; ``components`` defaults to component 0 for all.
    """
    if isinstance(members, int):
        members = tuple(range(members))
    members = tuple(members)
    if components is None:
        components = (0,) * len(members)
    return ConvergedPeak(peak=TargetState(position=(x, y), size=size),
                         likelihood=float(likelihood), members=members,
                         member_components=tuple(components),
                         iterations=(1,) * len(members), model_id=model_id)


def mixture_with_weights(weights, sigma=0.0) -> TransitionMixture:
    """One component per normalized weight, parked on a line of states."""
    from d2cip.motion import build_mixture
    modes = [PriorMode(mean=mean_at(40.0 + 2.0 * j, 40.0), weight=float(w),
                       model_id=j)
             for j, w in enumerate(weights)]
    return build_mixture(modes, np.full(8, float(sigma)))


def posterior_of(*specs, frame_index=0, size=(20.0, 20.0)) -> Posterior:
    """Build a posterior from (x, y, weight, count) tuples.

    Weights are taken as given (caller keeps them summing to 1); counts
    drive the within-cluster vote.
    """
    modes = []
    for i, (x, y, weight, count) in enumerate(specs):
        modes.append(PosteriorMode(
            peak=TargetState(position=(x, y), size=size), weight=float(weight),
            converged_count=int(count), source_components=frozenset({0}),
            model_id=0, likelihood=1.0, component_counts=((0, int(count)),)))
    return Posterior(modes=tuple(modes), frame_index=frame_index)


# -- independent clustering oracle ---------------------------------------
# Exhaustive search over every set partition, scored with an independently
# written simplified-silhouette formula. Feasible for the <= 8 modes the
# clustering contract covers.

def blob_mode_points(trial: int, rng):
    """Well-separated blob layouts for clustering round trips.

    Blob counts cycle 1/2/3 with the trial index.  Any blob that a spare
    cluster could dismantle carries >= 3 points, and jitter is redrawn until
    no two points in a blob fall within 2 px of each other.  Both rules keep
    the exhaustive silhouette optimum on the blob partition itself: a
    2-point blob with a cluster to spare would split into two perfect
    singletons, which K-means seeding never proposes.
    """
    n_blobs = 1 + trial % 3
    if n_blobs == 1:
        sizes = [3 + trial % 3]
    elif n_blobs == 2:
        sizes = [3 + (trial + b) % 2 for b in range(2)]
    else:
        sizes = [3, 3, 2]
    points = []
    for b, m in enumerate(sizes):
        cx, cy = 30.0 + 70.0 * b, 40.0 + 25.0 * (b % 2)
        while True:
            blob = [(cx + jx, cy + jy)
                    for jx, jy in rng.normal(scale=2.0, size=(m, 2))]
            if all(np.hypot(p[0] - q[0], p[1] - q[1]) >= 2.0
                   for i, p in enumerate(blob) for q in blob[:i]):
                break
        points.extend(blob)
    return points, n_blobs


def canonical_labels(labels):
    """Relabel clusters in order of first appearance."""
    order: dict = {}
    out = []
    for lab in labels:
        if lab not in order:
            order[lab] = len(order)
        out.append(order[lab])
    return tuple(out)


def _partitions(n: int, k: int):
    """Canonical labelings (first-appearance order) of n items into
    exactly k non-empty parts; item 0 is always labeled 0."""
    labels = [0] * n

    def rec(i, top):
        if i == n:
            if top + 1 == k:
                yield tuple(labels)
            return
        for lab in range(min(top + 1, k - 1) + 1):
            labels[i] = lab
            yield from rec(i + 1, max(top, lab))

    yield from rec(1, 0)


def silhouette_of_partition(points, labels, k: int) -> float:
    pts = np.asarray(points, dtype=np.float64)
    labs = np.asarray(labels)
    cents = np.array([pts[labs == c].mean(axis=0) for c in range(k)])
    scores = []
    for i in range(len(pts)):
        d = np.sqrt(((pts[i] - cents) ** 2).sum(axis=1))
        a = float(d[labs[i]])
        b = min(float(d[c]) for c in range(k) if c != labs[i])
        m = max(a, b)
        scores.append(0.0 if m <= 0 else (b - a) / m)
    return sum(scores) / len(scores)


def oracle_cluster(points, mean_size: float, k_max: int,
                   cluster_scale: float = 1.0):
    """Reference (k, labels): brute force over all partitions per k.

    Mirrors the production contract's k = 1 gate (peak spread below
    cluster_scale times the target size) and its smaller-k tie preference.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    spread = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            spread = max(spread, float(np.linalg.norm(pts[i] - pts[j])))
    k_hi = min(k_max, n)
    if k_hi < 2 or spread < cluster_scale * mean_size:
        return 1, (0,) * n
    best = None
    for k in range(2, k_hi + 1):
        for labels in _partitions(n, k):
            score = silhouette_of_partition(pts, labels, k)
            if best is None or score > best[0] + 1e-12:
                best = (score, k, labels)
    return best[1], best[2]
