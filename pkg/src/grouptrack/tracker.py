"""Particle filter over tracks, group partitions and data association.

Each step runs, in order: candidate-partition generation and weighting,
per-partition prediction (grouped tracks move with their group's virtual
leader, others singly), association-evidence computation, the iterative
association kernel, the legacy and new-track measurement updates, the
partition posterior, declaration, pruning, and a systematic resampling that
reduces each legacy track's L*M particles back to L.

Tracks carry L weighted particles whose weight sum equals the track's
existence probability.  All randomness flows through the caller-supplied
generator, so a fixed (state, frame, config, seed) tuple reproduces the step
bit for bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import association as assoc
from . import grouping
from .association import ScanFrame
from .grouping import GroupPartition, PartitionHypothesisSet, TrackSummary
from .motion import STATE_DIM, cv_matrix, noise_matrix, process_noise_cov
from .sim import BirthModel

EXISTENCE_EPS = 1e-12


@dataclass
class FilterConfig:
    """Tracker parameters; defaults follow the reference scenario setup."""

    l_particles: int = 3000
    m_best: int = 2
    n_max: int = 8
    confirm_threshold: float = 0.8
    prune_threshold: float = 1e-4
    p0: float = 0.001
    gate_distance: float = 16.0
    survival_prob: float = 0.9999
    bp_max_iterations: int = 100
    bp_tol: float = 1e-5
    bp_fixed_iterations: int | None = None
    censor_threshold: float = 0.9
    sigma_v: float = 10.0
    dt: float = 2.0
    grouping: bool = True
    candidate_mode: str = "full"
    alpha_mode: str = "estimate"
    candidate_cap: int = 64
    birth_inflation: float = 4.0
    birth_v_max: float = 30.0

    def __post_init__(self) -> None:
        if min(self.l_particles, self.m_best, self.n_max) < 1:
            raise ValueError("l_particles, m_best and n_max must be at least 1")
        for name in ("confirm_threshold", "prune_threshold", "survival_prob", "p0", "censor_threshold"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be a probability, got {v}")
        if self.candidate_mode not in ("full", "singletons"):
            raise ValueError("candidate_mode must be 'full' or 'singletons'")
        if self.alpha_mode not in ("estimate", "particle"):
            raise ValueError("alpha_mode must be 'estimate' or 'particle'")
        if self.dt <= 0 or self.sigma_v < 0 or self.gate_distance <= 0:
            raise ValueError("bad kinematics parameters")


@dataclass
class Track:
    """A potential target: particle cloud, existence belief and identity."""

    id: int
    particles: np.ndarray
    weights: np.ndarray
    existence: float
    confirmed: bool
    born: int

    def __post_init__(self) -> None:
        self.particles = np.asarray(self.particles, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.particles.ndim != 2 or self.particles.shape[1] != STATE_DIM:
            raise ValueError("particles must be (L, 4)")
        if self.weights.shape != (self.particles.shape[0],):
            raise ValueError("weights must be (L,)")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")

    def summary(self) -> TrackSummary:
        total = self.weights.sum()
        if total > EXISTENCE_EPS:
            mean = self.weights @ self.particles / total
            diff = self.particles - mean
            cov = (self.weights[:, None] * diff).T @ diff / total
        else:
            mean = self.particles.mean(axis=0)
            diff = self.particles - mean
            cov = diff.T @ diff / max(len(diff), 1)
        return TrackSummary(
            state=mean,
            cov=cov,
            existence=min(self.existence, 1.0),
            confirmed=self.confirmed,
        )


@dataclass
class FilterState:
    """Mutable-by-replacement filter state between steps."""

    tracks: list[Track] = field(default_factory=list)
    step: int = 0
    previous_partitions: list[dict[int, int]] = field(default_factory=list)
    prev_measurements: np.ndarray | None = None
    next_id: int = 1

    @property
    def n_tracks(self) -> int:
        return len(self.tracks)


@dataclass
class StepReport:
    """Per-step outputs: estimates, beliefs, hypotheses and phase timings."""

    step: int
    estimates: dict[int, np.ndarray]
    existences: dict[int, float]
    confirmed: list[int]
    partitions: list[tuple[int, ...]]
    partition_ids: list[int]
    alpha: np.ndarray
    posterior: np.ndarray
    bp_iterations: int
    bp_converged: bool
    n_pre_prune: int
    m_k: int
    spawned: list[int]
    censor_scores: np.ndarray
    timings: dict[str, float]
    warnings: list[str] = field(default_factory=list)


@dataclass
class Prediction:
    """Per-partition predicted particles with partition prior weights."""

    hypotheses: PartitionHypothesisSet
    particles: np.ndarray  # (M, n, L, 4)
    w_star: np.ndarray  # (n, L), shared across partitions
    summaries: list[TrackSummary]


def _singleton_partition(summaries: list[TrackSummary]) -> GroupPartition:
    labels = []
    nxt = 0
    for s in summaries:
        if s.confirmed:
            nxt += 1
            labels.append(nxt)
        else:
            labels.append(0)
    return GroupPartition(tuple(labels))


def _transition_summaries(
    summaries: list[TrackSummary], config: FilterConfig
) -> list[TrackSummary]:
    """Summaries propagated one step ahead (mean and covariance).

    Partition plausibility concerns the transition the partition will govern,
    so membership distances are taken under the predicted covariance
    ``F P F^T + Q`` rather than the posterior cloud spread alone.
    """
    f_cv = cv_matrix(config.dt)
    q = process_noise_cov(config.dt, config.sigma_v)
    return [
        replace(s, state=f_cv @ s.state, cov=f_cv @ s.cov @ f_cv.T + q)
        for s in summaries
    ]


def predict(state: FilterState, config: FilterConfig, rng: np.random.Generator) -> Prediction:
    """Partition weighting plus per-partition particle propagation."""
    tracks = state.tracks
    n = len(tracks)
    summaries = [t.summary() for t in tracks]
    existence_sums = np.array([t.weights.sum() for t in tracks])

    if not config.grouping:
        hypotheses = PartitionHypothesisSet(
            partitions=(_singleton_partition(summaries),), prior=np.ones(1)
        )
    else:
        ahead = _transition_summaries(summaries, config)
        if config.candidate_mode == "singletons":
            candidates = [_singleton_partition(summaries)]
        else:
            candidates = grouping.generate_candidates(
                ahead,
                config.gate_distance,
                previous=state.previous_partitions,
                ids=[t.id for t in tracks],
                cap=config.candidate_cap,
            )
        if config.alpha_mode == "particle" and n:
            particles = np.stack([t.particles for t in tracks])
            weights = np.stack([t.weights for t in tracks])
        else:
            particles = weights = None
        hypotheses = grouping.predict_partition_weights(
            ahead,
            existence_sums,
            candidates,
            config.m_best,
            p0=config.p0,
            particles=particles,
            particle_weights=weights,
        )

    m_kept = len(hypotheses)
    length = config.l_particles
    out = np.empty((m_kept, n, length, STATE_DIM))
    f_cv = cv_matrix(config.dt)
    g_mat = noise_matrix(config.dt)
    if n:
        base = np.stack([t.particles for t in tracks])  # (n, L, 4)
        for g, partition in enumerate(hypotheses.partitions):
            noise = config.sigma_v * rng.standard_normal((n, length, 2))
            det = np.empty_like(base)
            for j in range(1, partition.n_groups + 1):
                members = partition.members(j)
                leader = base[members].mean(axis=0)  # (L, 4)
                det[members] = leader @ f_cv.T + (base[members] - leader)
            loners = [i for i, v in enumerate(partition.labels) if v == 0]
            if loners:
                det[loners] = base[loners] @ f_cv.T
            out[g] = det + noise @ g_mat.T
    w_star = config.survival_prob * np.stack(
        [t.weights for t in tracks]
    ) if n else np.zeros((0, length))
    return Prediction(hypotheses=hypotheses, particles=out, w_star=w_star, summaries=summaries)


@dataclass
class LegacyUpdate:
    """Updated per-partition weights and the per-track beliefs."""

    weights: np.ndarray  # (M, n, L), normalized per track/partition
    evidence: np.ndarray  # (M, n), unnormalized total mass
    existence: np.ndarray  # (n,)
    estimates: np.ndarray  # (n, 4)
    degenerate: np.ndarray  # (n,) bool, zero total mass in some partition


def update_legacy(
    prediction: Prediction,
    ratios: np.ndarray,
    kappa: np.ndarray,
    frame: ScanFrame,
) -> LegacyUpdate:
    """Measurement update of the legacy tracks given association messages.

    ``ratios`` is the (M, n, L, m) likelihood-ratio array matching the
    predicted particles; ``kappa`` the (n, m+1) extrinsic association message
    matrix (any positive per-row scale).
    """
    alpha = prediction.hypotheses.prior
    m_kept, n, length, _ = prediction.particles.shape
    w_star = prediction.w_star
    sums = np.minimum(w_star.sum(axis=1), 1.0)
    gamma = (1.0 - frame.p_d) * kappa[:, 0][None, :, None] + frame.p_d * np.einsum(
        "gnlm,nm->gnl", ratios, kappa[:, 1:]
    )
    w_a = w_star[None, :, :] * gamma
    w_b = (1.0 - sums) * kappa[:, 0]  # (n,)
    evidence = w_a.sum(axis=2) + w_b[None, :]  # (M, n)
    degenerate = ~(evidence > 0).all(axis=0)
    safe = np.where(evidence > 0, evidence, 1.0)
    weights = w_a / safe[:, :, None]
    weights[:, degenerate, :] = 0.0
    existence = np.einsum("g,gn->n", alpha, weights.sum(axis=2))
    num = np.einsum("g,gnl,gnld->nd", alpha, weights, prediction.particles)
    est = np.where(existence[:, None] > EXISTENCE_EPS, num / np.maximum(existence, EXISTENCE_EPS)[:, None], np.nan)
    return LegacyUpdate(
        weights=weights,
        evidence=evidence,
        existence=existence,
        estimates=est,
        degenerate=degenerate,
    )


def partition_posterior(
    alpha: np.ndarray, evidence: np.ndarray
) -> tuple[np.ndarray, bool]:
    """Posterior partition weights from the per-track evidence products.

    Tracks with zero evidence under every partition carry no partition
    information and are left out of the product; if no track has evidence at
    all the result falls back to uniform (flagged).
    """
    evidence = np.asarray(evidence)
    alive = (evidence > 0).any(axis=0)
    if evidence.shape[1] and not alive.any():
        return np.full(len(alpha), 1.0 / len(alpha)), True
    with np.errstate(divide="ignore"):
        logs = np.log(alpha) + np.log(evidence[:, alive]).sum(axis=1)
    finite = np.isfinite(logs)
    if not finite.any():
        return np.full(len(alpha), 1.0 / len(alpha)), True
    w = np.exp(logs - logs[finite].max())
    w[~finite] = 0.0
    return w / w.sum(), False


def update_new(
    frame: ScanFrame,
    iota: np.ndarray,
    birth_particles: np.ndarray,
    birth_ratios: np.ndarray,
    spawn_mask: np.ndarray,
    config: FilterConfig,
    state: FilterState,
) -> list[Track]:
    """Spawn one track per uncensored measurement from its birth cloud.

    ``iota`` rows are normalized, so the nonexistence mass per measurement is
    exactly 1 and the existence ratio is scale-correct.  ``birth_ratios`` is
    the (m, L) array of ``f(z_m | x_l) / (mu_c f_c)`` for each measurement's
    own cloud.
    """
    spawned = []
    next_id = state.next_id
    length = config.l_particles
    for j in range(frame.m):
        if not spawn_mask[j]:
            continue
        w_a = (1.0 / length) * frame.mu_b * birth_ratios[j] * iota[j, 0]
        total = w_a.sum() + 1.0
        weights = w_a / total
        existence = float(weights.sum())
        spawned.append(
            Track(
                id=next_id,
                particles=birth_particles[j],
                weights=weights,
                existence=existence,
                confirmed=existence > config.confirm_threshold,
                born=frame.k,
            )
        )
        next_id += 1
    return spawned


def systematic_resample(weights: np.ndarray, n_out: int, u: float) -> np.ndarray:
    """Systematic resampling indices for a normalized weight vector."""
    edges = np.cumsum(weights)
    edges[-1] = 1.0
    positions = (np.arange(n_out) + u) / n_out
    return np.searchsorted(edges, positions)


def prune_and_resample(
    state: FilterState,
    prediction: Prediction,
    legacy: LegacyUpdate,
    posterior: np.ndarray,
    new_tracks: list[Track],
    config: FilterConfig,
    rng: np.random.Generator,
    warnings: list[str],
) -> list[Track]:
    """Declaration, pruning, capacity enforcement and legacy resampling."""
    n = len(state.tracks)
    m_kept = len(prediction.hypotheses)
    survivors: list[tuple[float, Track, int | None]] = []
    for i, old in enumerate(state.tracks):
        existence = float(legacy.existence[i])
        if existence < config.prune_threshold:
            continue
        survivors.append((existence, old, i))
    for t in new_tracks:
        if t.existence >= config.prune_threshold:
            survivors.append((t.existence, t, None))

    if len(survivors) > config.n_max:
        order = sorted(range(len(survivors)), key=lambda s: (-survivors[s][0], survivors[s][1].id))
        keep = set(order[: config.n_max])
        survivors = [s for idx, s in enumerate(survivors) if idx in keep]

    out: list[Track] = []
    length = config.l_particles
    for existence, old, i in survivors:
        if i is None:
            out.append(old)
            continue
        mixture = posterior[:, None] * legacy.weights[:, i, :]  # (M, L)
        total = mixture.sum()
        stacked = prediction.particles[:, i].reshape(m_kept * length, STATE_DIM)
        if total <= 0:
            warnings.append(f"track {old.id}: zero resampling mass, kept top partition cloud")
            particles = prediction.particles[0, i]
        else:
            idx = systematic_resample(mixture.reshape(-1) / total, length, rng.random())
            particles = stacked[idx]
        out.append(
            Track(
                id=old.id,
                particles=particles.copy(),
                weights=np.full(length, existence / length),
                existence=existence,
                confirmed=existence > config.confirm_threshold,
                born=old.born,
            )
        )
    return out


def extract(state: FilterState) -> dict[int, tuple[float, np.ndarray, bool]]:
    """Per-track (existence, estimate, confirmed) from the stored clouds."""
    out = {}
    for t in state.tracks:
        total = t.weights.sum()
        if t.existence <= EXISTENCE_EPS or total <= EXISTENCE_EPS:
            continue
        est = t.weights @ t.particles / total
        out[t.id] = (t.existence, est, t.confirmed)
    return out


def step(
    state: FilterState,
    frame: ScanFrame,
    config: FilterConfig,
    rng: np.random.Generator,
) -> tuple[FilterState, StepReport]:
    """Advance the filter by one scan."""
    if frame.k != state.step + 1:
        raise ValueError(f"frame {frame.k} does not follow state step {state.step}")
    warnings: list[str] = []
    t0 = time.perf_counter()

    prediction = predict(state, config, rng)
    alpha = prediction.hypotheses.prior
    n = len(state.tracks)
    t1 = time.perf_counter()

    ratios = assoc.likelihood_ratios(prediction.particles, frame)  # (M, n, L, m)
    beta = np.zeros((n, frame.m + 1))
    if n:
        sums = np.minimum(prediction.w_star.sum(axis=1), 1.0)
        beta[:, 0] = (1.0 - frame.p_d) * sums + (1.0 - sums)
        if frame.m:
            beta[:, 1:] = frame.p_d * np.einsum(
                "g,gnlm,nl->nm", alpha, ratios, prediction.w_star
            )
    birth_model = BirthModel(
        previous=state.prev_measurements,
        region_radius=frame.region_radius,
        sigma_w=frame.sigma_w,
        inflation=config.birth_inflation,
        v_max=config.birth_v_max,
    )
    birth_particles = birth_model.sample_batch(
        rng, frame.m, config.l_particles, current=frame.z
    )
    # each cloud's own-measurement likelihood serves both xi0 and the update
    diff = birth_particles[:, :, [0, 2]] - frame.z[:, None, :]
    d2 = np.einsum("mld,mld->ml", diff, diff)
    sw2 = frame.sigma_w * frame.sigma_w
    birth_ratios = np.exp(-0.5 * d2 / sw2) / (2.0 * np.pi * sw2 * frame.mu_c * frame.f_c)
    xi0 = frame.mu_b * birth_ratios.mean(axis=1) + 1.0 if frame.m else np.zeros(0)
    spawn_mask, xi0_bp, scores = assoc.censor_new(
        xi0, frame.mu_b, frame.mu_c, config.censor_threshold
    )
    marginals = assoc.bp_associate(
        beta,
        xi0_bp,
        max_iterations=config.bp_max_iterations,
        tol=config.bp_tol,
        fixed_iterations=config.bp_fixed_iterations,
    )
    t2 = time.perf_counter()

    legacy = update_legacy(prediction, ratios, marginals.kappa, frame)
    if legacy.degenerate.any():
        for i in np.flatnonzero(legacy.degenerate):
            warnings.append(f"track {state.tracks[i].id}: zero update mass, existence set to 0")
    posterior, post_fallback = partition_posterior(alpha, legacy.evidence)
    if post_fallback and n:
        warnings.append("partition posterior fell back to uniform")
    new_tracks = update_new(
        frame, marginals.iota, birth_particles, birth_ratios, spawn_mask, config, state
    )
    n_pre_prune = n + frame.m
    t3 = time.perf_counter()

    tracks = prune_and_resample(
        state, prediction, legacy, posterior, new_tracks, config, rng, warnings
    )
    t4 = time.perf_counter()

    id_list = [t.id for t in state.tracks]
    label_maps = _posterior_label_maps(prediction.hypotheses, posterior, id_list)
    new_state = FilterState(
        tracks=tracks,
        step=frame.k,
        previous_partitions=label_maps,
        prev_measurements=frame.z.copy() if frame.m else np.zeros((0, 2)),
        next_id=state.next_id + int(spawn_mask.sum()),
    )
    estimates = {}
    existences = {}
    for i, old in enumerate(state.tracks):
        existences[old.id] = float(legacy.existence[i])
        if legacy.existence[i] > EXISTENCE_EPS:
            estimates[old.id] = legacy.estimates[i]
    for t in new_tracks:
        existences[t.id] = t.existence
        if t.existence > EXISTENCE_EPS:
            estimates[t.id] = t.weights @ t.particles / t.weights.sum()
    report = StepReport(
        step=frame.k,
        estimates=estimates,
        existences=existences,
        confirmed=[t.id for t in tracks if t.confirmed],
        partitions=[p.labels for p in prediction.hypotheses.partitions],
        partition_ids=id_list,
        alpha=alpha.copy(),
        posterior=posterior,
        bp_iterations=marginals.iterations,
        bp_converged=marginals.converged,
        n_pre_prune=n_pre_prune,
        m_k=frame.m,
        spawned=[t.id for t in new_tracks],
        censor_scores=scores,
        timings={
            "predict": t1 - t0,
            "associate": t2 - t1,
            "update": t3 - t2,
            "resample": t4 - t3,
        },
        warnings=warnings,
    )
    return new_state, report


def _posterior_label_maps(
    hypotheses: PartitionHypothesisSet, posterior: np.ndarray, ids: list[int]
) -> list[dict[int, int]]:
    order = np.argsort(-posterior, kind="stable")
    maps = []
    for g in order:
        labels = hypotheses.partitions[g].labels
        maps.append({ids[i]: labels[i] for i in range(len(ids)) if labels[i] != 0})
    return maps


def run_filter(
    frames: list[ScanFrame],
    config: FilterConfig,
    seed,
    initial: FilterState | None = None,
) -> tuple[list[StepReport], FilterState]:
    """Run the tracker over a frame sequence from a fresh (or given) state."""
    rng = np.random.default_rng(seed)
    state = initial if initial is not None else FilterState()
    reports = []
    for frame in frames:
        state, report = step(state, frame, config, rng)
        reports.append(report)
    return reports, state
