"""Test-support generators for transfer pairs with known structure.

``synth_pair`` builds targets that satisfy the shading-times-homography
model exactly; ``statistic_transfer`` is a simple global transfer
(per-channel mean/std matching in RGB) standing in for third-party methods.
"""

import numpy as np

from .colorspace import brightness


def synth_pair(src, h_true, shading_fn, clamp=False):
    """Target b = shading_fn(brightness(rho @ h_true)) * (rho @ h_true) per pixel."""
    mapped = np.asarray(src, dtype=np.float64) @ np.asarray(h_true, dtype=np.float64)
    factor = np.asarray(shading_fn(brightness(mapped)), dtype=np.float64)
    out = np.broadcast_to(factor, mapped.shape[:-1])[..., None] * mapped
    return np.clip(out, 0.0, 1.0) if clamp else out


def statistic_transfer(src, ref, clamp=True):
    """Match each RGB channel of ``src`` to the mean and std of ``ref``."""
    src = np.asarray(src, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    out = np.empty_like(src)
    for c in range(3):
        s, r = src[..., c], ref[..., c]
        s_std = s.std()
        if s_std == 0:
            out[..., c] = s - s.mean() + r.mean()
        else:
            out[..., c] = (s - s.mean()) * (r.std() / s_std) + r.mean()
    return np.clip(out, 0.0, 1.0) if clamp else out


def random_homography(rng, low=0.5, high=1.5, max_cond=50.0):
    """Random 3x3 matrix with entries in [low, high], condition number below
    ``max_cond``, rescaled to |det| = 1."""
    while True:
        h = rng.uniform(low, high, size=(3, 3))
        if np.linalg.cond(h) < max_cond:
            return h / abs(np.linalg.det(h)) ** (1.0 / 3.0)
