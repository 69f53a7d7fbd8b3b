"""Independent reference implementations used to check the library.

Everything here is deliberately brute force: exhaustive enumeration for
association marginals, permutation search for the assignment metric, and a
textbook Kalman filter.  None of it shares code with the package.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def enumerate_association_marginals(beta, xi0):
    """Exact marginal association probabilities by exhaustive enumeration.

    Joint weight of a target-association vector ``a`` (entries in 0..m, the
    nonzero ones distinct): product of ``beta[i, a_i]`` times ``xi0[j-1]`` for
    every measurement j claimed by nobody.  Returns (p_a, p_b) with shapes
    (n, m+1) and (m, n+1).
    """
    beta = np.asarray(beta, dtype=float)
    xi0 = np.asarray(xi0, dtype=float)
    n, m1 = beta.shape
    m = m1 - 1
    p_a = np.zeros((n, m + 1))
    p_b = np.zeros((m, n + 1))
    total = 0.0
    for assignment in itertools.product(range(m + 1), repeat=n):
        claimed = [a for a in assignment if a > 0]
        if len(claimed) != len(set(claimed)):
            continue
        w = 1.0
        for i, a in enumerate(assignment):
            w *= beta[i, a]
        for j in range(1, m + 1):
            if j not in assignment:
                w *= xi0[j - 1]
        total += w
        for i, a in enumerate(assignment):
            p_a[i, a] += w
        for j in range(1, m + 1):
            b = assignment.index(j) + 1 if j in assignment else 0
            p_b[j - 1, b] += w
    return p_a / total, p_b / total


def ospa_by_permutations(a, b, cutoff, order):
    """OSPA via explicit minimization over all pairings (small sets only)."""
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    if len(a) == 0 and len(b) == 0:
        return 0.0
    if len(a) == 0 or len(b) == 0:
        return float(cutoff)
    if len(a) > len(b):
        a, b = b, a
    n, m = len(a), len(b)
    best = math.inf
    for perm in itertools.permutations(range(m), n):
        cost = sum(
            min(cutoff, float(np.linalg.norm(a[i] - b[j]))) ** order
            for i, j in enumerate(perm)
        )
        best = min(best, cost)
    total = best + cutoff**order * (m - n)
    return float((total / m) ** (1.0 / order))


class KalmanFilter:
    """Textbook linear-Gaussian filter for the planar CV model."""

    def __init__(self, f, q, h, r, x0, p0):
        self.f, self.q, self.h, self.r = f, q, h, r
        self.x, self.p = np.asarray(x0, dtype=float), np.asarray(p0, dtype=float)

    def step(self, z):
        x = self.f @ self.x
        p = self.f @ self.p @ self.f.T + self.q
        s = self.h @ p @ self.h.T + self.r
        k = p @ self.h.T @ np.linalg.inv(s)
        self.x = x + k @ (np.asarray(z) - self.h @ x)
        self.p = (np.eye(len(x)) - k @ self.h) @ p
        return self.x.copy()
