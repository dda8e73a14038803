"""Image fidelity metrics."""

import numpy as np

from .errors import ShapeError


def psnr(a, b):
    """Peak signal-to-noise ratio in dB for images on the [0, 1] scale.

    MSE is pooled over all pixels and channels. Identical images give ``inf``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"cannot compare images of shape {a.shape} and {b.shape}")
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))


def format_psnr(value):
    return "inf" if np.isinf(value) else f"{value:.2f}"
