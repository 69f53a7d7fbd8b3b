"""Scenario generation and measurement synthesis.

Ground truths are generated deterministically from per-target motion segments
(the canned scenarios use noiseless CV/CT segments); measurements add Gaussian
position noise to detected targets and Poisson-distributed clutter uniform
over the surveillance disk.  Everything is reproducible from a seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .association import ScanFrame
from .motion import CT, CV, STATE_DIM, MotionModel

TURN_RATE = math.radians(2.25)  # rad/s, the canned scenarios' turn magnitude


@dataclass(frozen=True)
class Segment:
    """A run of ``steps`` transitions under one motion model."""

    kind: str
    steps: int
    omega: float | None = None

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise ValueError("segment length must be nonnegative")
        if self.kind == CT and not self.omega:
            raise ValueError("turn segments need a nonzero rate")


@dataclass(frozen=True)
class TargetSpec:
    """Lifespan, initial state and motion segments of one true target."""

    born: int
    died: int
    initial: tuple[float, float, float, float]
    segments: tuple[Segment, ...]

    def __post_init__(self) -> None:
        if not (1 <= self.born <= self.died):
            raise ValueError("need 1 <= born <= died")
        total = sum(s.steps for s in self.segments)
        if total != self.died - self.born:
            raise ValueError(
                f"segments cover {total} transitions, lifespan needs {self.died - self.born}"
            )


@dataclass(frozen=True)
class ScenarioSpec:
    """Full scenario description: targets, sensor and clutter parameters."""

    duration: int
    dt: float
    targets: tuple[TargetSpec, ...]
    region_radius: float = 5000.0
    sigma_w: float = 10.0
    p_d: float = 0.995
    clutter_mean: float = 10.0
    birth_mean: float | None = None  # default: 1e-5 * assumed clutter mean
    groups: dict[str, tuple[int, ...]] = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.duration < 1 or self.dt <= 0 or self.region_radius <= 0:
            raise ValueError("bad scenario dimensions")
        if not (0.0 < self.p_d <= 1.0) or self.sigma_w <= 0 or self.clutter_mean < 0:
            raise ValueError("bad sensor parameters")
        for t in self.targets:
            if t.died > self.duration:
                raise ValueError("target outlives the scenario")

    @property
    def clutter_density(self) -> float:
        return 1.0 / (math.pi * self.region_radius**2)

    @property
    def assumed_clutter_mean(self) -> float:
        # Likelihood ratios need a positive clutter rate even in clutter-free
        # scenarios; 1.0 is the documented fallback.
        return self.clutter_mean if self.clutter_mean > 0 else 1.0

    @property
    def mu_b(self) -> float:
        if self.birth_mean is not None:
            return self.birth_mean
        return 1e-5 * self.assumed_clutter_mean


class GroundTruth:
    """Per-step true states keyed by target id (1-based)."""

    def __init__(self, states: dict[int, dict[int, np.ndarray]]):
        self.states = states

    def alive(self, step: int) -> dict[int, np.ndarray]:
        return {tid: per[step] for tid, per in self.states.items() if step in per}

    def lifespan(self, tid: int) -> tuple[int, int]:
        steps = sorted(self.states[tid])
        return steps[0], steps[-1]

    def positions(self) -> dict[int, dict[int, np.ndarray]]:
        """Track-set view: per target, step -> planar position."""
        return {
            tid: {k: s[[0, 2]].copy() for k, s in per.items()}
            for tid, per in self.states.items()
        }


def simulate_truth(spec: ScenarioSpec) -> GroundTruth:
    """Roll every target through its (noiseless) motion segments."""
    out: dict[int, dict[int, np.ndarray]] = {}
    for tid, target in enumerate(spec.targets, start=1):
        state = np.asarray(target.initial, dtype=float)
        per = {target.born: state.copy()}
        k = target.born
        for seg in target.segments:
            model = MotionModel(kind=seg.kind, dt=spec.dt, omega=seg.omega)
            for _ in range(seg.steps):
                state = model.step(state)
                k += 1
                per[k] = state.copy()
        out[tid] = per
    return GroundTruth(out)


def build_scenario1(
    approach_steps: int = 5,
    turn_steps: int = 10,
    formation_steps: int = 44,
) -> ScenarioSpec:
    """Three targets that merge into a triangular formation and split again,
    plus an independent fourth target born mid-scene.

    The 45-degree merge/split turns take ``turn_steps`` transitions at
    +-2.25 deg/s; switch times are reconstruction parameters.  With the
    defaults the formation (about 50 m across) closes around step 15 and
    splits after step 60.
    """
    tail = 79 - approach_steps - 2 * turn_steps - formation_steps
    if tail < 0:
        raise ValueError("segment schedule exceeds the 80-step lifespan")
    sqrt2 = math.sqrt(2.0)

    def turniness(omega: float) -> tuple[Segment, ...]:
        return (
            Segment(CV, approach_steps),
            Segment(CT, turn_steps, omega),
            Segment(CV, formation_steps),
            Segment(CT, turn_steps, omega),
            Segment(CV, tail),
        )

    targets = (
        TargetSpec(1, 80, (800.0, 10.0, 3255.0, -10.0), turniness(+TURN_RATE)),
        TargetSpec(1, 80, (740.0, 10.0 * sqrt2, 3000.0, 0.0), (Segment(CV, 79),)),
        TargetSpec(1, 80, (800.0, 10.0, 2745.0, 10.0), turniness(-TURN_RATE)),
        TargetSpec(21, 100, (1010.0, 8.0, 2500.0, -8.0), (Segment(CV, 79),)),
    )
    return ScenarioSpec(
        duration=100,
        dt=2.0,
        targets=targets,
        groups={"group": (1, 2, 3), "single": (4,)},
    )


def build_scenario2(
    n_targets: int = 5,
    spacing: float = 50.0,
    centered: bool = False,
    duration: int = 100,
) -> ScenarioSpec:
    """A single coordinated group flying CV/CT segments in line formation.

    Target 1 starts at (800, 3000) moving east at 10 m/s; the others are
    offset by ``spacing`` along y.  ``centered=True`` spreads the offsets
    symmetrically about y=3000 instead (keeps large stacks inside the
    surveillance disk for benchmark sweeps).
    """
    if n_targets < 1:
        raise ValueError("need at least one target")
    transitions = duration - 1
    leg = transitions // 5
    segments = (
        Segment(CV, leg),
        Segment(CT, leg, +TURN_RATE),
        Segment(CV, leg),
        Segment(CT, leg, -TURN_RATE),
        Segment(CV, transitions - 4 * leg),
    )
    targets = []
    for i in range(n_targets):
        offset = (i - (n_targets - 1) / 2.0) * spacing if centered else i * spacing
        targets.append(
            TargetSpec(1, duration, (800.0, 10.0, 3000.0 + offset, 0.0), segments)
        )
    return ScenarioSpec(
        duration=duration,
        dt=2.0,
        targets=tuple(targets),
        groups={"group": tuple(range(1, n_targets + 1)), "single": ()},
    )


def synthesize(truth: GroundTruth, spec: ScenarioSpec, rng: np.random.Generator) -> list[ScanFrame]:
    """Measurement frames: noisy detections plus uniform-disk clutter, shuffled."""
    frames = []
    for k in range(1, spec.duration + 1):
        alive = truth.alive(k)
        detections = []
        for tid in sorted(alive):
            if rng.random() < spec.p_d:
                pos = alive[tid][[0, 2]]
                detections.append(pos + spec.sigma_w * rng.standard_normal(2))
        n_clutter = rng.poisson(spec.clutter_mean) if spec.clutter_mean > 0 else 0
        radii = spec.region_radius * np.sqrt(rng.random(n_clutter))
        angles = 2.0 * np.pi * rng.random(n_clutter)
        clutter = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
        z = np.array(detections).reshape(len(detections), 2)
        z = np.concatenate([z, clutter], axis=0)
        z = z[rng.permutation(len(z))]
        frames.append(
            ScanFrame(
                k=k,
                z=z,
                mu_c=spec.assumed_clutter_mean,
                f_c=spec.clutter_density,
                p_d=spec.p_d,
                mu_b=spec.mu_b,
                sigma_w=spec.sigma_w,
                region_radius=spec.region_radius,
            )
        )
    return frames


class BirthModel:
    """Birth proposal built from the previous scan's measurements.

    The cloud for a new potential target is Gaussian around the previous-step
    measurement nearest to the spawning measurement, with position covariance
    ``inflation * sigma_w**2 * I`` (clamped to the surveillance disk);
    velocities are uniform on ``[-v_max, v_max]^2``.  With no previous
    measurements the positions fall back to uniform over the disk.
    """

    def __init__(
        self,
        previous: np.ndarray | None,
        region_radius: float,
        sigma_w: float,
        inflation: float = 4.0,
        v_max: float = 30.0,
    ):
        self.previous = None
        if previous is not None and len(previous):
            self.previous = np.atleast_2d(np.asarray(previous, dtype=float))
        self.region_radius = region_radius
        self.pos_std = math.sqrt(inflation) * sigma_w
        self.v_max = v_max

    def sample(self, rng: np.random.Generator, n: int, at: np.ndarray | None = None) -> np.ndarray:
        """One cloud of ``n`` particles, seeded near ``at`` when given."""
        seeds = None if at is None else np.asarray(at, dtype=float).reshape(1, 2)
        return self.sample_batch(rng, 1, n, current=seeds)[0]

    def sample_batch(
        self,
        rng: np.random.Generator,
        count: int,
        n: int,
        current: np.ndarray | None = None,
    ) -> np.ndarray:
        """``count`` clouds of ``n`` particles in one rng pass.

        ``current`` holds the spawning measurements ``(count, 2)``; each cloud
        is seeded at the previous measurement nearest its spawning one.
        Without ``current`` the seeding measurement is drawn uniformly per
        particle.
        """
        out = np.empty((count, n, STATE_DIM))
        if count == 0:
            return out
        if self.previous is None:
            radii = self.region_radius * np.sqrt(rng.random((count, n)))
            angles = 2.0 * np.pi * rng.random((count, n))
            pos = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=-1)
        else:
            if current is not None:
                current = np.asarray(current, dtype=float).reshape(count, 2)
                dists = np.linalg.norm(
                    current[:, None, :] - self.previous[None, :, :], axis=-1
                )
                picks = np.repeat(dists.argmin(axis=1)[:, None], n, axis=1)
            else:
                picks = rng.integers(0, len(self.previous), size=(count, n))
            pos = self.previous[picks] + self.pos_std * rng.standard_normal((count, n, 2))
            norms = np.linalg.norm(pos, axis=-1)
            over = norms > self.region_radius
            if over.any():
                pos[over] *= (self.region_radius / norms[over])[:, None]
        vel = rng.uniform(-self.v_max, self.v_max, size=(count, n, 2))
        out[..., 0] = pos[..., 0]
        out[..., 2] = pos[..., 1]
        out[..., 1] = vel[..., 0]
        out[..., 3] = vel[..., 1]
        return out
