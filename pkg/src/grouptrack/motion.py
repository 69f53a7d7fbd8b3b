"""Kinematic models: constant velocity, constant turn, and group (virtual-leader) steps.

State layout is the 4-vector ``[px, vx, py, vy]`` (position in m, velocity in
m/s).  All functions are vectorized over leading axes, so a single state
``(4,)``, a particle cloud ``(L, 4)`` or a stack of clouds ``(n, L, 4)`` can be
passed anywhere a state is expected.  Process noise enters through the 4x2
input matrix G, so noise draws are 2-vectors (per-axis accelerations) with
covariance ``sigma_v**2 * I`` and the induced state covariance is
``Q = sigma_v**2 * G @ G.T``.

Randomness is always injected by the caller (explicit noise draws), which keeps
every function pure and safe for parallel use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STATE_DIM = 4

CV = "cv"
CT = "ct"


def cv_matrix(dt: float) -> np.ndarray:
    """Constant-velocity transition matrix for step length ``dt``."""
    return np.array(
        [
            [1.0, dt, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, dt],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def ct_matrix(omega: float, dt: float) -> np.ndarray:
    """Constant-turn transition matrix for turn rate ``omega`` (rad/s).

    Rotates the velocity by ``omega * dt`` (counterclockwise for positive
    ``omega``) while moving the position along the circular arc.
    """
    if omega == 0.0:
        raise ValueError("constant-turn model requires a nonzero turn rate; use cv_matrix")
    wt = omega * dt
    s, c = np.sin(wt), np.cos(wt)
    return np.array(
        [
            [1.0, s / omega, 0.0, -(1.0 - c) / omega],
            [0.0, c, 0.0, -s],
            [0.0, (1.0 - c) / omega, 1.0, s / omega],
            [0.0, s, 0.0, c],
        ]
    )


def noise_matrix(dt: float) -> np.ndarray:
    """Noise input matrix G mapping 2-axis acceleration noise into the state."""
    h = 0.5 * dt * dt
    return np.array(
        [
            [h, 0.0],
            [dt, 0.0],
            [0.0, h],
            [0.0, dt],
        ]
    )


def process_noise_cov(dt: float, sigma_v: float) -> np.ndarray:
    """Process noise covariance ``Q = sigma_v**2 * G @ G.T``."""
    g = noise_matrix(dt)
    return sigma_v * sigma_v * (g @ g.T)


def _check_finite(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    if state.shape[-1] != STATE_DIM:
        raise ValueError(f"state must have {STATE_DIM} components, got shape {state.shape}")
    if not np.all(np.isfinite(state)):
        raise ValueError("non-finite state component")
    return state


def cv_step(state: np.ndarray, dt: float, noise: np.ndarray | None = None) -> np.ndarray:
    """Deterministic CV step, optionally perturbed by acceleration noise draws.

    ``noise`` must broadcast to ``state.shape[:-1] + (2,)``; the perturbation
    added is ``noise @ G.T``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    state = _check_finite(state)
    out = state @ cv_matrix(dt).T
    if noise is not None:
        out = out + np.asarray(noise, dtype=float) @ noise_matrix(dt).T
    return out


def ct_step(state: np.ndarray, omega: float, dt: float) -> np.ndarray:
    """Deterministic constant-turn step; preserves speed exactly."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    state = _check_finite(state)
    return state @ ct_matrix(omega, dt).T


def virtual_leader(members: np.ndarray) -> np.ndarray:
    """Arithmetic-mean state of the group members (axis 0 indexes members)."""
    members = np.asarray(members, dtype=float)
    if members.shape[0] == 0:
        raise ValueError("virtual_leader of an empty member list")
    return members.mean(axis=0)


def group_step(members: np.ndarray, dt: float, noise: np.ndarray | None = None) -> np.ndarray:
    """Coordinated step: leader moves by CV, members keep their offsets.

    Each member state is ``cv_step(leader) + (member - leader) + G @ noise_i``,
    i.e. the group translates rigidly with the virtual leader's CV motion and
    per-member noise on top.  With zero noise every pairwise offset between
    members is preserved exactly.  ``members`` has shape ``(n, ..., 4)`` and
    ``noise`` (if given) ``(n, ..., 2)``.
    """
    members = _check_finite(np.asarray(members, dtype=float))
    if members.shape[0] == 0:
        raise ValueError("group_step of an empty member list")
    leader = virtual_leader(members)
    offsets = members - leader
    out = cv_step(leader, dt) + offsets
    if noise is not None:
        out = out + np.asarray(noise, dtype=float) @ noise_matrix(dt).T
    return out


@dataclass(frozen=True)
class GroupContext:
    """A group snapshot: member states, their virtual leader, and offsets.

    The leader is the arithmetic mean of the members and the offsets sum to
    zero by construction; both are validated on creation.
    """

    members: np.ndarray
    leader: np.ndarray
    offsets: np.ndarray

    def __post_init__(self) -> None:
        members = np.asarray(self.members, dtype=float)
        leader = np.asarray(self.leader, dtype=float)
        offsets = np.asarray(self.offsets, dtype=float)
        if members.ndim != 2 or members.shape[1] != STATE_DIM:
            raise ValueError("members must be (n, 4)")
        scale = max(np.abs(members).max(initial=1.0), 1.0)
        if not np.allclose(leader, members.mean(axis=0), atol=1e-9 * scale):
            raise ValueError("leader must be the mean of the members")
        if not np.allclose(offsets.sum(axis=0), 0.0, atol=1e-9 * scale):
            raise ValueError("offsets must sum to zero")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "leader", leader)
        object.__setattr__(self, "offsets", offsets)

    @classmethod
    def from_members(cls, members: np.ndarray) -> "GroupContext":
        members = np.asarray(members, dtype=float)
        leader = virtual_leader(members)
        return cls(members=members, leader=leader, offsets=members - leader)

    def step(self, dt: float, noise: np.ndarray | None = None) -> "GroupContext":
        """Advance the whole group coherently; see :func:`group_step`."""
        return GroupContext.from_members(group_step(self.members, dt, noise))


@dataclass(frozen=True)
class MotionModel:
    """A motion segment: CV or CT, with step interval and process-noise level.

    ``omega`` (rad/s) is required for CT and must be nonzero; ``sigma_v`` is
    the acceleration-noise standard deviation in m/s^2.
    """

    kind: str
    dt: float
    sigma_v: float = 0.0
    omega: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in (CV, CT):
            raise ValueError(f"unknown motion model kind {self.kind!r}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.sigma_v < 0:
            raise ValueError("sigma_v must be nonnegative")
        if self.kind == CT and not self.omega:
            raise ValueError("constant-turn model requires a nonzero turn rate")

    def transition_matrix(self) -> np.ndarray:
        if self.kind == CV:
            return cv_matrix(self.dt)
        return ct_matrix(float(self.omega), self.dt)

    def step(self, state: np.ndarray) -> np.ndarray:
        """Deterministic step under this model."""
        if self.kind == CV:
            return cv_step(state, self.dt)
        return ct_step(state, float(self.omega), self.dt)
