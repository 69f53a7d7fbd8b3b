"""Likelihood factors and the iterative data-association kernel.

Association couples a target-oriented vector (entry i points at the measurement
claimed by track i, 0 = missed) with a measurement-oriented vector (entry m
points at the claiming track, 0 = clutter/new target), tied by pairwise
consistency factors.  The message-passing iteration below computes approximate
marginal association probabilities.

Every message vector in the full formulation takes one value at its "own"
index and a common value everywhere else, so messages are stored as scalar
ratios (own/common): ``u[i, m]`` is the track-to-measurement message and
``v[i, m]`` the measurement-to-track message.  This is exactly the stated
iteration with per-message normalization by the common value, at O(n*m) per
iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class BPNumericalError(ValueError):
    """A non-finite message appeared during the association iteration."""


@dataclass(frozen=True)
class ScanFrame:
    """One timestamped measurement batch plus the sensor model parameters."""

    k: int
    z: np.ndarray
    mu_c: float
    f_c: float
    p_d: float
    mu_b: float
    sigma_w: float
    region_radius: float

    def __post_init__(self) -> None:
        z = np.atleast_2d(np.asarray(self.z, dtype=float))
        if z.size == 0:
            z = z.reshape(0, 2)
        if z.shape[1] != 2:
            raise ValueError("measurements must be planar positions")
        if self.mu_c <= 0 or self.f_c <= 0 or self.mu_b <= 0:
            raise ValueError("clutter/birth parameters must be positive")
        if not (0.0 < self.p_d <= 1.0):
            raise ValueError("p_d must be in (0, 1]")
        if self.sigma_w <= 0 or self.region_radius <= 0:
            raise ValueError("sigma_w and region_radius must be positive")
        object.__setattr__(self, "z", z)

    @property
    def m(self) -> int:
        return self.z.shape[0]


def gaussian_likelihood(z: np.ndarray, positions: np.ndarray, sigma_w: float) -> np.ndarray:
    """Planar Gaussian measurement density N(z; pos, sigma_w^2 I).

    ``positions`` has shape ``(..., 2)`` and ``z`` ``(m, 2)``; the result is
    ``(..., m)``.
    """
    z = np.atleast_2d(z)
    diff = positions[..., None, :] - z  # (..., m, 2)
    d2 = np.einsum("...md,...md->...m", diff, diff)
    return np.exp(-0.5 * d2 / (sigma_w * sigma_w)) / (2.0 * np.pi * sigma_w * sigma_w)


def likelihood_ratios(particles: np.ndarray, frame: ScanFrame) -> np.ndarray:
    """f(z_m | x_l) / (mu_c * f_c) for every particle/measurement pair.

    ``particles`` is ``(..., 4)`` with positions at components 0 and 2; the
    result is ``(..., m)``.
    """
    positions = particles[..., [0, 2]]
    return gaussian_likelihood(frame.z, positions, frame.sigma_w) / (frame.mu_c * frame.f_c)


def legacy_factor(x: np.ndarray, exists: bool, a: int, frame: ScanFrame) -> float:
    """Single-point association factor for a legacy track.

    Existing, a=m: ``p_d f(z_m|x) / (mu_c f_c)``; existing, a=0: ``1 - p_d``;
    nonexistent: indicator of a=0.
    """
    if not 0 <= a <= frame.m:
        raise ValueError("association index out of range")
    if not exists:
        return 1.0 if a == 0 else 0.0
    if a == 0:
        return 1.0 - frame.p_d
    x = np.asarray(x, dtype=float)
    lik = gaussian_likelihood(frame.z[a - 1 : a], x[[0, 2]], frame.sigma_w)[0]
    return float(frame.p_d * lik / (frame.mu_c * frame.f_c))


def new_factor(z_index: int, b: int, x: np.ndarray, frame: ScanFrame) -> float:
    """Per-particle new-target factor for a birth particle ``x``.

    The particle is assumed drawn from the birth prior, whose density cancels
    against the proposal, leaving ``mu_b f(z|x) / (mu_c f_c)`` on the b=0
    branch and 0 when a legacy track claims the measurement.
    """
    if b != 0:
        return 0.0
    x = np.asarray(x, dtype=float)
    lik = gaussian_likelihood(frame.z[z_index : z_index + 1], x[[0, 2]], frame.sigma_w)[0]
    return float(frame.mu_b * lik / (frame.mu_c * frame.f_c))


def compute_xi0(
    birth_particles: np.ndarray, birth_weights: np.ndarray, frame: ScanFrame
) -> np.ndarray:
    """Clutter-or-new messages ``xi_m(0)`` from the birth particle clouds.

    ``birth_particles`` is ``(m, L, 4)`` (cloud per measurement) and
    ``birth_weights`` ``(L,)`` or ``(m, L)``.  Entries for b != 0 are
    implicitly 1.
    """
    m = frame.m
    if m == 0:
        return np.zeros(0)
    weights = np.asarray(birth_weights, dtype=float)
    if weights.ndim == 1:
        weights = np.broadcast_to(weights, (m, weights.shape[0]))
    lik = np.empty((m,))
    for j in range(m):
        f = gaussian_likelihood(
            frame.z[j : j + 1], birth_particles[j][:, [0, 2]], frame.sigma_w
        )[:, 0]
        lik[j] = weights[j] @ f
    return frame.mu_b * lik / (frame.mu_c * frame.f_c) + 1.0


def censor_scores(xi0: np.ndarray, mu_b: float, mu_c: float) -> np.ndarray:
    """Normalized new-target evidence in [0, 1).

    Maps the birth-vs-clutter evidence ``xi0 - 1`` through
    ``e / (e + mu_b/mu_c)``, i.e. the ratio of birth to clutter density at the
    measurement squashed to a probability-like score.
    """
    evidence = np.maximum(np.asarray(xi0, dtype=float) - 1.0, 0.0)
    return evidence / (evidence + mu_b / mu_c)


def censor_new(
    xi0: np.ndarray, mu_b: float, mu_c: float, threshold: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Select which measurements may spawn new tracks.

    Returns ``(spawn_mask, censored_xi0, scores)``: measurements scoring below
    ``threshold`` get their ``xi0`` forced to 1 (no new-target hypothesis in
    the association) and are excluded from spawning; they remain available to
    legacy tracks as possible clutter.
    """
    if not (0.0 < threshold <= 1.0) and threshold != 0.0:
        raise ValueError("threshold must lie in [0, 1]")
    scores = censor_scores(xi0, mu_b, mu_c)
    spawn = scores >= threshold
    censored = np.where(spawn, xi0, 1.0)
    return spawn, censored, scores


@dataclass(frozen=True)
class AssociationProblem:
    """Inputs to the association iteration.

    ``beta`` is the (n, m+1) matrix of track evidence (column 0 = missed) and
    ``xi0`` the per-measurement clutter-or-new value; the implicit entries of
    each measurement's vector at b >= 1 are 1.
    """

    beta: np.ndarray
    xi0: np.ndarray

    def __post_init__(self) -> None:
        beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        xi0 = np.asarray(self.xi0, dtype=float)
        if beta.shape[1] != xi0.shape[0] + 1:
            raise ValueError("beta columns must be one more than measurement count")
        if np.any(beta < 0) or not np.all(np.isfinite(beta)):
            raise ValueError("beta entries must be finite and nonnegative")
        if np.any(xi0 < 0) or not np.all(np.isfinite(xi0)):
            raise ValueError("xi0 entries must be finite and nonnegative")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "xi0", xi0)


@dataclass(frozen=True)
class AssociationMarginals:
    """Outputs of the association iteration.

    ``kappa``/``iota`` are the extrinsic messages back to the track and
    measurement factors (rows normalized to sum 1); ``target_beliefs`` /
    ``measurement_beliefs`` are the normalized marginal association beliefs
    including the local evidence.
    """

    kappa: np.ndarray
    iota: np.ndarray
    target_beliefs: np.ndarray
    measurement_beliefs: np.ndarray
    iterations: int
    converged: bool


def _check_finite(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise BPNumericalError(f"non-finite {name} message at entry {tuple(int(b) for b in bad)}")


def bp_associate(
    beta: np.ndarray,
    xi0: np.ndarray,
    max_iterations: int = 100,
    tol: float = 1e-5,
    fixed_iterations: int | None = None,
) -> AssociationMarginals:
    """Iterative marginal association via scalar message ratios.

    Messages are initialized from the track evidence alone, then each
    iteration updates measurement-to-track ratios from the current
    track-to-measurement ratios and vice versa.  The loop stops after
    ``max_iterations`` or when the Frobenius norm of the change in the
    normalized per-track belief matrix drops below ``tol``; passing
    ``fixed_iterations`` runs exactly that many iterations with no stopping
    test.
    """
    if fixed_iterations is None and max_iterations < 1:
        raise ValueError("max_iterations must be at least 1")
    if tol <= 0 and fixed_iterations is None:
        raise ValueError("tol must be positive")
    beta = np.atleast_2d(np.asarray(beta, dtype=float))
    xi0 = np.asarray(xi0, dtype=float)
    n, m1 = beta.shape
    m = m1 - 1
    if xi0.shape != (m,):
        raise ValueError("xi0 length must match measurement count")
    if n == 0 or m == 0:
        kappa = np.ones((n, m + 1))
        kappa /= kappa.sum(axis=1, keepdims=True) if n else 1
        iota = np.ones((m, n + 1))
        iota /= iota.sum(axis=1, keepdims=True) if m else 1
        beliefs = _target_beliefs(beta, np.ones((n, m)))
        meas_beliefs = _measurement_beliefs(xi0, np.ones((n, m)))
        return AssociationMarginals(kappa, iota, beliefs, meas_beliefs, 0, True)

    total = beta.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = beta[:, 1:] / (total - beta[:, 1:])
    _check_finite(u, "track-to-measurement")

    n_iters = fixed_iterations if fixed_iterations is not None else max_iterations
    prev = None
    converged = False
    iterations = 0
    v = np.ones((n, m))
    for iterations in range(1, n_iters + 1):
        with np.errstate(divide="ignore", invalid="ignore"):
            v = 1.0 / (xi0[None, :] + u.sum(axis=0, keepdims=True) - u)
            _check_finite(v, "measurement-to-track")
            bv = beta[:, 1:] * v
            u = beta[:, 1:] / (beta[:, :1] + bv.sum(axis=1, keepdims=True) - bv)
            _check_finite(u, "track-to-measurement")
        belief = _target_beliefs(beta, v)
        if fixed_iterations is None and prev is not None:
            if np.linalg.norm(belief - prev) < tol:
                converged = True
                break
        prev = belief

    kappa = np.concatenate([np.ones((n, 1)), v], axis=1)
    kappa /= kappa.sum(axis=1, keepdims=True)
    iota = np.concatenate([np.ones((m, 1)), u.T], axis=1)
    iota /= iota.sum(axis=1, keepdims=True)
    return AssociationMarginals(
        kappa=kappa,
        iota=iota,
        target_beliefs=_target_beliefs(beta, v),
        measurement_beliefs=_measurement_beliefs(xi0, u),
        iterations=iterations,
        converged=converged,
    )


def _target_beliefs(beta: np.ndarray, v: np.ndarray) -> np.ndarray:
    belief = np.concatenate([beta[:, :1], beta[:, 1:] * v], axis=1)
    total = belief.sum(axis=1, keepdims=True)
    if belief.shape[0] and not np.all(total > 0):
        bad = int(np.argwhere(~(total[:, 0] > 0))[0][0])
        raise BPNumericalError(f"zero belief mass for track {bad}")
    return belief / total if belief.shape[0] else belief


def _measurement_beliefs(xi0: np.ndarray, u: np.ndarray) -> np.ndarray:
    belief = np.concatenate([xi0[:, None], u.T], axis=1)
    total = belief.sum(axis=1, keepdims=True)
    if belief.shape[0] and not np.all(total > 0):
        bad = int(np.argwhere(~(total[:, 0] > 0))[0][0])
        raise BPNumericalError(f"zero belief mass for measurement {bad}")
    return belief / total if belief.shape[0] else belief


def compute_beta(
    w_star: np.ndarray,
    ratios: list[list[np.ndarray]],
    alpha: np.ndarray,
    p_d: float,
) -> np.ndarray:
    """Track association evidence mixed over the preserved partitions.

    ``w_star`` is the (n, L) predicted weight matrix (identical across
    partitions), ``ratios[g][i]`` the (L, m) likelihood-ratio matrix of track
    i's particles under partition g, and ``alpha`` the partition weights.
    Column 0 carries the missed-detection and nonexistence mass.
    """
    alpha = np.asarray(alpha, dtype=float)
    n, _ = w_star.shape
    m = ratios[0][0].shape[1] if n else 0
    beta = np.zeros((n, m + 1))
    sums = w_star.sum(axis=1)
    beta[:, 0] = (1.0 - p_d) * sums + (1.0 - sums)
    for i in range(n):
        acc = np.zeros(m)
        for g, a_g in enumerate(alpha):
            acc += a_g * (w_star[i] @ ratios[g][i])
        beta[i, 1:] = p_d * acc
    return beta
