"""Group partitions over confirmed tracks and their probabilistic weighting.

A partition assigns every track a group label: 0 marks unconfirmed tracks
(excluded from grouping), labels 1..N are group ids.  Canonical form means the
nonzero labels appear in first-occurrence order starting at 1 with no gaps, so
two label vectors describe the same set partition iff they canonicalize to the
same tuple.

Partition plausibility is scored from pairwise statistical distances: a track's
membership probability in a group decays as ``exp(-d/2)`` with the squared
Mahalanobis distance ``d`` between the track estimate and the group's
virtual-leader estimate, using the track covariance plus the group's average
covariance.  Nonexistent tracks join any group with a small constant
probability ``p0``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .motion import STATE_DIM

COV_REGULARIZATION = 1e-6

WEIGHT_TOL = 1e-9


def canonicalize(labels) -> "GroupPartition":
    """Relabel nonzero groups by first occurrence; idempotent."""
    labels = [int(v) for v in labels]
    if any(v < 0 for v in labels):
        raise ValueError("labels must be nonnegative integers")
    mapping: dict[int, int] = {}
    out = []
    for v in labels:
        if v == 0:
            out.append(0)
            continue
        if v not in mapping:
            mapping[v] = len(mapping) + 1
        out.append(mapping[v])
    return GroupPartition(tuple(out))


@dataclass(frozen=True)
class GroupPartition:
    """Canonical group-label assignment; construct via :func:`canonicalize`."""

    labels: tuple[int, ...]

    def __post_init__(self) -> None:
        seen = 0
        for v in self.labels:
            if v < 0:
                raise ValueError("labels must be nonnegative")
            if v > seen + 1:
                raise ValueError(f"labels not canonical: {self.labels}")
            seen = max(seen, v)

    @property
    def n_groups(self) -> int:
        return max(self.labels, default=0)

    def members(self, group: int) -> list[int]:
        return [i for i, v in enumerate(self.labels) if v == group]

    def grouped_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.labels) if v != 0]

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class TrackSummary:
    """Point summary of a track used for partition scoring and gating."""

    state: np.ndarray
    cov: np.ndarray
    existence: float
    confirmed: bool

    def __post_init__(self) -> None:
        state = np.asarray(self.state, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if state.shape != (STATE_DIM,) or cov.shape != (STATE_DIM, STATE_DIM):
            raise ValueError("bad summary shapes")
        if not (0.0 <= self.existence <= 1.0):
            raise ValueError("existence must be in [0, 1]")
        object.__setattr__(self, "state", state)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))


def regularized_cov(cov: np.ndarray) -> np.ndarray:
    """Symmetrize and add the standard diagonal regularization."""
    cov = np.asarray(cov, dtype=float)
    return 0.5 * (cov + cov.T) + COV_REGULARIZATION * np.eye(cov.shape[-1])


def mahalanobis_sq(x: np.ndarray, y: np.ndarray, cov_sum: np.ndarray) -> float:
    """Squared Mahalanobis distance with the summed covariance."""
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    sol = np.linalg.solve(cov_sum, diff)
    return float(diff @ sol)


def membership_prob(
    state: np.ndarray,
    cov: np.ndarray,
    leader_state: np.ndarray,
    leader_cov: np.ndarray,
    exists: bool = True,
    p0: float = 0.001,
) -> float:
    """Probability that a track belongs with a group's virtual leader.

    Returns ``p0`` on the nonexistence branch, else ``exp(-d/2)`` with ``d``
    the squared Mahalanobis distance under ``cov + leader_cov``.  Raises
    ``numpy.linalg.LinAlgError`` if the summed covariance is singular.
    """
    if not exists:
        return p0
    d = mahalanobis_sq(state, leader_state, np.asarray(cov) + np.asarray(leader_cov))
    return float(np.exp(-0.5 * d))


def _group_leaders(
    states: np.ndarray, covs: np.ndarray, partition: GroupPartition
) -> tuple[np.ndarray, np.ndarray]:
    n_groups = partition.n_groups
    leaders = np.empty((n_groups, STATE_DIM))
    leader_covs = np.empty((n_groups, STATE_DIM, STATE_DIM))
    for j in range(1, n_groups + 1):
        members = partition.members(j)
        leaders[j - 1] = states[members].mean(axis=0)
        leader_covs[j - 1] = covs[members].mean(axis=0)
    return leaders, leader_covs


def _membership_matrix(
    states: np.ndarray, covs: np.ndarray, partition: GroupPartition
) -> np.ndarray:
    """P[i, j-1] = exp(-d/2) between track i and the leader of group j.

    One batched solve over all (track, group) pairs; rows for label-0 tracks
    are computed but unused by callers.
    """
    n = len(partition)
    if partition.n_groups == 0:
        return np.ones((n, 1))
    leaders, leader_covs = _group_leaders(states, covs, partition)
    diff = states[:, None, :] - leaders[None, :, :]
    cov_sum = covs[:, None, :, :] + leader_covs[None, :, :, :]
    sol = np.linalg.solve(cov_sum, diff[..., None])[..., 0]
    d = np.einsum("ijd,ijd->ij", diff, sol)
    return np.exp(-0.5 * d)


def _hit_probs(partition: GroupPartition, probs: np.ndarray) -> np.ndarray:
    """Per grouped track: P[i, g(i)] * prod over other groups of (1 - P[i, j])."""
    grouped = partition.grouped_indices()
    if not grouped:
        return np.ones(0)
    rows = np.asarray(grouped)
    own = np.asarray([partition.labels[i] - 1 for i in grouped])
    factors = 1.0 - probs[rows]
    factors[np.arange(len(rows)), own] = probs[rows, own]
    return factors.prod(axis=1)


def partition_pmf(
    summaries: list[TrackSummary], candidates: list[GroupPartition]
) -> tuple[np.ndarray, bool]:
    """Normalized candidate-partition weights from the scoring product.

    Every confirmed track must carry a nonzero label in every candidate.
    Returns ``(weights, fallback)`` where ``fallback`` is True when all scores
    vanished and the uniform distribution was substituted.
    """
    if not candidates:
        raise ValueError("no candidate partitions")
    states, covs, confirmed = _summary_arrays(summaries)
    logs = np.empty(len(candidates))
    for c, partition in enumerate(candidates):
        _check_candidate(partition, summaries, confirmed)
        probs = _membership_matrix(states, covs, partition)
        hit = _hit_probs(partition, probs)
        with np.errstate(divide="ignore"):
            logs[c] = np.log(hit).sum()
    return _normalize_log_weights(logs)


def _summary_arrays(summaries: list[TrackSummary]):
    states = np.array([s.state for s in summaries]).reshape(len(summaries), STATE_DIM)
    covs = np.array([regularized_cov(s.cov) for s in summaries]).reshape(
        len(summaries), STATE_DIM, STATE_DIM
    )
    confirmed = [i for i, s in enumerate(summaries) if s.confirmed]
    return states, covs, confirmed


def _check_candidate(
    partition: GroupPartition, summaries: list, confirmed: list[int]
) -> None:
    if len(partition) != len(summaries):
        raise ValueError("partition length does not match track count")
    if any(partition.labels[i] == 0 for i in confirmed):
        raise ValueError("confirmed track left unlabeled in a candidate")


def _normalize_log_weights(logs: np.ndarray) -> tuple[np.ndarray, bool]:
    finite = np.isfinite(logs)
    if not finite.any():
        n = len(logs)
        return np.full(n, 1.0 / n), True
    w = np.exp(logs - logs[finite].max())
    w[~finite] = 0.0
    return w / w.sum(), False


@dataclass(frozen=True)
class PartitionHypothesisSet:
    """The preserved partitions with prior weights and (optional) posterior."""

    partitions: tuple[GroupPartition, ...]
    prior: np.ndarray
    posterior: np.ndarray | None = None
    fallback: bool = False

    def __post_init__(self) -> None:
        prior = np.asarray(self.prior, dtype=float)
        if len(prior) != len(self.partitions):
            raise ValueError("weight/partition length mismatch")
        if len(self.partitions) != len(set(p.labels for p in self.partitions)):
            raise ValueError("duplicate partitions after canonicalization")
        for w in (prior, self.posterior):
            if w is None:
                continue
            w = np.asarray(w, dtype=float)
            if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
                raise ValueError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "prior", prior)

    def __len__(self) -> int:
        return len(self.partitions)


def predict_partition_weights(
    summaries: list[TrackSummary],
    existence_sums: np.ndarray,
    candidates: list[GroupPartition],
    m_best: int,
    p0: float = 0.001,
    particles: np.ndarray | None = None,
    particle_weights: np.ndarray | None = None,
) -> PartitionHypothesisSet:
    """Predicted partition weights, truncated to the ``m_best`` most likely.

    Each grouped track contributes
    ``p0*(1-p0)**(N-1)*(1-s_i) + s_i * P[i,g(i)] * prod_j (1-P[i,j])``
    with ``s_i`` the track's particle existence sum.  ``P`` comes from the
    state estimates by default; passing ``particles`` of shape ``(n, L, 4)``
    with matching ``particle_weights`` switches to the per-particle form, where
    the product is evaluated particle-by-particle with particle-wise leaders
    and the existence-weighted sum replaces ``s_i * P * prod``.
    """
    if m_best < 1:
        raise ValueError("m_best must be at least 1")
    if not candidates:
        raise ValueError("no candidate partitions")
    existence_sums = np.clip(np.asarray(existence_sums, dtype=float), 0.0, 1.0)
    states, covs, confirmed = _summary_arrays(summaries)
    logs = np.empty(len(candidates))
    for c, partition in enumerate(candidates):
        _check_candidate(partition, summaries, confirmed)
        miss = p0 * (1.0 - p0) ** max(partition.n_groups - 1, 0)
        grouped = partition.grouped_indices()
        if particles is None:
            probs = _membership_matrix(states, covs, partition)
            hit = existence_sums[grouped] * _hit_probs(partition, probs)
        else:
            hit = _particle_hit_probs(partition, particles, particle_weights, covs)
        terms = miss * (1.0 - existence_sums[grouped]) + hit
        with np.errstate(divide="ignore"):
            logs[c] = np.log(terms).sum()
    weights, fallback = _normalize_log_weights(logs)
    order = sorted(
        range(len(candidates)), key=lambda c: (-weights[c], candidates[c].labels)
    )[:m_best]
    kept = weights[order]
    total = kept.sum()
    if total <= 0:
        kept = np.full(len(order), 1.0 / len(order))
        fallback = True
    else:
        kept = kept / total
    return PartitionHypothesisSet(
        partitions=tuple(candidates[c] for c in order), prior=kept, fallback=fallback
    )


def _particle_hit_probs(
    partition: GroupPartition,
    particles: np.ndarray,
    particle_weights: np.ndarray,
    covs: np.ndarray,
) -> np.ndarray:
    """Weight-summed membership products evaluated per particle."""
    grouped = partition.grouped_indices()
    n_groups = partition.n_groups
    if not grouped:
        return np.ones(0)
    leaders = np.stack(
        [particles[partition.members(j)].mean(axis=0) for j in range(1, n_groups + 1)]
    )  # (G, L, 4)
    leader_covs = np.stack(
        [covs[partition.members(j)].mean(axis=0) for j in range(1, n_groups + 1)]
    )
    out = np.empty(len(grouped))
    for pos, i in enumerate(grouped):
        diff = particles[i][None, :, :] - leaders  # (G, L, 4)
        cov_sum = covs[i][None] + leader_covs  # (G, 4, 4)
        sol = np.linalg.solve(cov_sum[:, None], diff[..., None])[..., 0]
        p = np.exp(-0.5 * np.einsum("gld,gld->gl", diff, sol))  # (G, L)
        own = partition.labels[i] - 1
        factors = 1.0 - p
        factors[own] = p[own]
        out[pos] = float(particle_weights[i] @ factors.prod(axis=0))
    return out


def generate_candidates(
    summaries: list[TrackSummary],
    gate_distance: float,
    previous: list[dict[int, int]] | None = None,
    ids: list[int] | None = None,
    cap: int = 64,
) -> list[GroupPartition]:
    """Deduplicated candidate partitions over the current tracks.

    Always contains the gating-graph component partition and the all-singletons
    partition, then previous preserved partitions re-expressed over the current
    confirmed tracks (matched by id), then pairwise merges and longest-edge
    splits of the gating components, truncated to ``cap`` in that order.
    ``previous`` holds label maps keyed by track id.
    """
    if gate_distance <= 0:
        raise ValueError("gate_distance must be positive")
    n = len(summaries)
    confirmed = [i for i, s in enumerate(summaries) if s.confirmed]
    if not confirmed:
        return [GroupPartition(tuple([0] * n))]
    states = np.array([summaries[i].state for i in confirmed])
    covs = np.array([regularized_cov(summaries[i].cov) for i in confirmed])
    k = len(confirmed)
    diff = states[:, None, :] - states[None, :, :]
    cov_sum = covs[:, None, :, :] + covs[None, :, :, :]
    sol = np.linalg.solve(cov_sum, diff[..., None])[..., 0]
    dist = np.einsum("abd,abd->ab", diff, sol)

    def to_partition(comp_labels: np.ndarray) -> GroupPartition:
        labels = [0] * n
        for pos, i in enumerate(confirmed):
            labels[i] = int(comp_labels[pos]) + 1
        return canonicalize(labels)

    adjacency = (dist < gate_distance) & ~np.eye(k, dtype=bool)
    comp = _components(adjacency)
    gated = to_partition(comp)
    singles = to_partition(np.arange(k))

    candidates: list[GroupPartition] = [gated, singles]

    if previous:
        id_list = list(ids) if ids is not None else list(range(n))
        for label_map in previous:
            labels = [0] * n
            fresh = max(label_map.values(), default=0)
            for pos, i in enumerate(confirmed):
                old = label_map.get(id_list[i], 0)
                if old == 0:
                    fresh += 1
                    old = fresh
                labels[i] = old
            candidates.append(canonicalize(labels))

    n_comp = comp.max() + 1
    for a, b in itertools.combinations(range(n_comp), 2):
        merged = np.where(comp == b, a, comp)
        candidates.append(to_partition(merged))
    for g in range(n_comp):
        members = np.flatnonzero(comp == g)
        if len(members) < 2:
            continue
        candidates.append(to_partition(_split_longest_edge(comp, members, dist)))

    seen: set[tuple[int, ...]] = set()
    unique = []
    for cand in candidates:
        if cand.labels not in seen:
            seen.add(cand.labels)
            unique.append(cand)
    return unique[:cap]


def _components(adjacency: np.ndarray) -> np.ndarray:
    """Connected-component labels of a boolean adjacency matrix."""
    k = adjacency.shape[0]
    labels = np.full(k, -1, dtype=int)
    current = 0
    for start in range(k):
        if labels[start] >= 0:
            continue
        stack = [start]
        labels[start] = current
        while stack:
            node = stack.pop()
            for nbr in np.flatnonzero(adjacency[node]):
                if labels[nbr] < 0:
                    labels[nbr] = current
                    stack.append(nbr)
        current += 1
    return labels


def _split_longest_edge(
    comp: np.ndarray, members: np.ndarray, dist: np.ndarray
) -> np.ndarray:
    """Split one component in two by dropping the longest edge of its MST.

    Prim's algorithm on the dense pairwise-distance submatrix; the two sides
    of the dropped edge become separate groups.
    """
    k = len(members)
    sub = dist[np.ix_(members, members)]
    in_tree = np.zeros(k, dtype=bool)
    in_tree[0] = True
    best_cost = sub[0].copy()
    best_from = np.zeros(k, dtype=int)
    edges = []  # (cost, parent, child)
    for _ in range(k - 1):
        masked = np.where(in_tree, np.inf, best_cost)
        nxt = int(np.argmin(masked))
        edges.append((masked[nxt], int(best_from[nxt]), nxt))
        in_tree[nxt] = True
        closer = sub[nxt] < best_cost
        best_cost[closer] = sub[nxt][closer]
        best_from[closer] = nxt
    _, parent, child = max(edges)
    children: dict[int, list[int]] = {i: [] for i in range(k)}
    for _, p, c in edges:
        if (p, c) != (parent, child):
            children[p].append(c)
            children[c].append(p)
    side = np.zeros(k, dtype=bool)
    stack = [child]
    side[child] = True
    while stack:
        node = stack.pop()
        for nbr in children[node]:
            if not side[nbr]:
                side[nbr] = True
                stack.append(nbr)
    out = comp.copy()
    out[members[side]] = comp.max() + 1
    return out
