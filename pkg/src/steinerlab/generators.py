"""Deterministic instance generators for experiments and tests."""

from __future__ import annotations

import numpy as np

from .solver import Instance


def random_ball_instance(d: int, n: int, seed: int) -> Instance:
    """n points uniform in the unit ball of R^d."""
    if d < 2 or n < 2:
        raise ValueError("need d >= 2 and n >= 2")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radii = rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / d)
    return Instance(g * radii)


def sphere_instance(d: int, n: int, seed: int) -> np.ndarray:
    """n points uniform on the unit sphere S^(d-1) (raw array: these feed
    the sphere connector, which does not need an Instance)."""
    if d < 2 or n < 1:
        raise ValueError("need d >= 2 and n >= 1")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def cocircular_instance(
    n: int, radius: float = 1.0, seed: int = 0, max_tries: int = 10_000
) -> Instance:
    """n points on a circle of the given radius such that at most one
    consecutive chord exceeds the radius (the no-branch-point hypothesis).

    A chord exceeds r exactly when its arc exceeds pi/3, so angles are
    rejection-sampled until at most one gap is that wide."""
    if n < 2:
        raise ValueError("need n >= 2")
    rng = np.random.default_rng(seed)
    wide_limit = np.pi / 3.0
    for _ in range(max_tries):
        angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, n))
        gaps = np.diff(np.concatenate([angles, [angles[0] + 2.0 * np.pi]]))
        if (gaps > wide_limit).sum() <= 1 and gaps.min() > 1e-6:
            pts = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
            return Instance(pts)
    raise RuntimeError(
        f"could not sample a cocircular instance with n={n} within {max_tries} tries"
    )


def hypercube_corners(d: int) -> np.ndarray:
    if d < 2:
        raise ValueError("need d >= 2")
    return np.array(
        [[1.0 if (k >> i) & 1 else -1.0 for i in range(d)] for k in range(2**d)]
    )
