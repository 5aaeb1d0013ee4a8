"""Independent reference computations used by several test modules.

Nothing here imports the code under test.
"""

import numpy as np


def stratified_lens_area(c1, c2, n=1000, rng=None):
    """Intersection area of two disks ``(cx, cy, r)`` by jittered-grid sampling.

    One uniform sample per cell of an ``n x n`` grid over the smaller disk's
    bounding box (the intersection lies inside the smaller disk).
    """
    rng = rng or np.random.default_rng(0)
    small, big = sorted((c1, c2), key=lambda c: c[2])
    cx, cy, r = small
    i = np.arange(n)
    u = (i[None, :] + rng.random((n, n))) / n
    v = (i[:, None] + rng.random((n, n))) / n
    x = cx - r + 2 * r * u
    y = cy - r + 2 * r * v
    inside = ((x - cx) ** 2 + (y - cy) ** 2 <= r * r) & ((x - big[0]) ** 2 + (y - big[1]) ** 2 <= big[2] ** 2)
    return inside.mean() * 4 * r * r


def grid_gaussian_kl(mu_a, sigma_a, mu_b, sigma_b, half_width=10.0, n=1601):
    """KL(a || b) for isotropic 2-D Gaussians by brute-force quadrature of p log(p / q)."""
    L = half_width * sigma_a
    xs = np.linspace(mu_a[0] - L, mu_a[0] + L, n)
    ys = np.linspace(mu_a[1] - L, mu_a[1] + L, n)
    X, Y = np.meshgrid(xs, ys)
    dx = xs[1] - xs[0]
    lp = -((X - mu_a[0]) ** 2 + (Y - mu_a[1]) ** 2) / (2 * sigma_a**2) - np.log(2 * np.pi * sigma_a**2)
    lq = -((X - mu_b[0]) ** 2 + (Y - mu_b[1]) ** 2) / (2 * sigma_b**2) - np.log(2 * np.pi * sigma_b**2)
    return float((np.exp(lp) * (lp - lq)).sum() * dx * dx)


def brute_force_assignment(cost):
    """Minimum total cost one-to-one assignment of max cardinality (finite entries only).

    ``cost`` is (M, K). Returns (n_pairs, total_cost).
    """
    from itertools import permutations

    M, K = cost.shape
    best = (0, 0.0)
    for perm in permutations(range(M), min(M, K)) if K <= M else []:
        pairs = [(perm[k], k) for k in range(K)]
        best = _better(best, pairs, cost)
    if K > M:
        for perm in permutations(range(K), M):
            pairs = [(m, perm[m]) for m in range(M)]
            best = _better(best, pairs, cost)
    return best


def _better(best, pairs, cost):
    ok = [(m, k) for m, k in pairs if np.isfinite(cost[m, k])]
    total = sum(cost[m, k] for m, k in ok)
    if len(ok) > best[0] or (len(ok) == best[0] and total < best[1]):
        return (len(ok), total)
    return best
