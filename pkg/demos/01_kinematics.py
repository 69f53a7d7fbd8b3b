"""Kinematic building blocks: straight-line and turning motion, group steps.

Run:  python demos/01_kinematics.py
"""

import numpy as np

from grouptrack.motion import ct_step, cv_step, group_step, virtual_leader

TURN = np.radians(2.25)

print("= constant velocity =")
state = np.array([800.0, 10.0, 3255.0, -10.0])
print("start:", state)
for _ in range(3):
    state = cv_step(state, dt=2.0)
    print("  ->", state)

print("\n= constant turn: speed is preserved, heading rotates =")
state = np.array([0.0, 10.0, 0.0, -10.0])
for k in range(11):
    speed = np.hypot(state[1], state[3])
    heading = np.degrees(np.arctan2(state[3], state[1]))
    if k % 5 == 0:
        print(f"  step {k:2d}: speed {speed:.3f} m/s, heading {heading:7.2f} deg")
    state = ct_step(state, omega=TURN, dt=2.0)

print("\n= a 45 degree turn takes 10 steps at 2.25 deg/s with dt = 2 s =")
state = np.array([0.0, 10.0, 0.0, -10.0])
for _ in range(10):
    state = ct_step(state, TURN, dt=2.0)
print("  final velocity:", state[[1, 3]], "(flattened onto the x axis)")

print("\n= group step: members ride the leader, offsets never change =")
members = np.array(
    [
        [0.0, 10.0, 50.0, 0.0],
        [0.0, 10.0, 0.0, 0.0],
        [0.0, 10.0, -50.0, 0.0],
    ]
)
print("leader:", virtual_leader(members))
stepped = group_step(members, dt=2.0)
print("offsets before:", (members - virtual_leader(members))[:, 2])
print("offsets after :", (stepped - virtual_leader(stepped))[:, 2])

print("\n= with noise the offsets survive on average =")
rng = np.random.default_rng(0)
noisy = group_step(
    np.repeat(members[:, None, :], 2000, axis=1),
    dt=2.0,
    noise=5.0 * rng.standard_normal((3, 2000, 2)),
)
print("mean y offsets over 2000 draws:", np.round(noisy.mean(axis=1)[:, 2] - stepped[1, 2], 2))
