"""What the point-set and track-set metrics reward and punish.

Run:  python demos/05_metrics.py
"""

import numpy as np

from grouptrack.metrics import OspaParams, ospa, ospa2

print("= point-set metric (cutoff 50 m, order 1) =")
truth = np.array([[0.0, 0.0], [100.0, 0.0]])
cases = {
    "perfect": truth.copy(),
    "10 m off each": truth + [0.0, 10.0],
    "one target missed": truth[:1],
    "one extra false point": np.vstack([truth, [500.0, 500.0]]),
}
for name, est in cases.items():
    print(f"  {name:24s} -> {ospa(truth, est):6.2f}")

print("\n= track-set metric: the window remembers recent history =")
params = OspaParams()  # cutoff 50, orders (1, 2), window 10
steps = range(1, 41)
truth_tracks = {1: {k: np.array([10.0 * k, 0.0]) for k in steps}}

clean = {1: {k: np.array([10.0 * k, 5.0]) for k in steps}}
print("  constant 5 m error:       ", [round(ospa2(truth_tracks, clean, params, k), 2) for k in (10, 20, 30)])

# identity switch at step 20: same positions, new track id
switched = {
    1: {k: np.array([10.0 * k, 5.0]) for k in steps if k < 20},
    2: {k: np.array([10.0 * k, 5.0]) for k in steps if k >= 20},
}
vals = [round(ospa2(truth_tracks, switched, params, k), 2) for k in (15, 20, 25, 29, 35)]
print("  id switch at step 20:     ", vals)
print("    (the broken track keeps paying inside the window, then heals)")

dropout = {1: {k: np.array([10.0 * k, 5.0]) for k in steps if not 18 <= k <= 22}}
vals = [round(ospa2(truth_tracks, dropout, params, k), 2) for k in (15, 20, 25, 29, 35)]
print("  5-step dropout:           ", vals)
