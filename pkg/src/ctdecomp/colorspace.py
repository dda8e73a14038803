"""RGB <-> RGI algebra, homogeneous rg chromaticity, brightness and pixel masks.

Pixels are row vectors: an RGB row rho maps to RGI as rho @ C.
"""

import numpy as np

from .errors import ChromaticityDomainError

_RGI = np.array([[1.0, 0.0, 1.0],
                 [0.0, 1.0, 1.0],
                 [0.0, 0.0, 1.0]])

_RGI_INV = np.array([[1.0, 0.0, -1.0],
                     [0.0, 1.0, -1.0],
                     [0.0, 0.0, 1.0]])


def rgi_matrix():
    """C such that (R, G, B) @ C == (R, G, R+G+B)."""
    return _RGI.copy()


def rgi_matrix_inv():
    return _RGI_INV.copy()


def valid_mask(img, threshold=0.0):
    """True where R+G+B > threshold; zero pixels carry no chromaticity."""
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    return np.asarray(img).sum(axis=-1) > threshold


def unclipped_mask(img, eps=0.5 / 255):
    """True where every channel lies strictly inside (eps, 1 - eps)."""
    img = np.asarray(img)
    return np.all((img > eps) & (img < 1.0 - eps), axis=-1)


def estimation_mask(src, tgt, threshold=0.0, min_fraction=0.05):
    """Pixels usable for chromaticity fitting in a corresponding pair.

    Starts from the pixels that are non-zero in both images and drops those
    with a clipped channel in either, since clipping distorts chromaticity.
    Falls back to the non-zero set when fewer than ``min_fraction`` of it
    would remain.
    """
    valid = valid_mask(src, threshold) & valid_mask(tgt, threshold)
    strict = valid & unclipped_mask(src) & unclipped_mask(tgt)
    if np.count_nonzero(strict) < max(3, min_fraction * np.count_nonzero(valid)):
        return valid
    return strict


def to_homogeneous_chromaticity(img, mask):
    """Rows (r, g, 1) for every pixel selected by ``mask``, in raster order."""
    rgi = np.asarray(img, dtype=np.float64)[mask] @ _RGI
    intensity = rgi[:, 2:3]
    if np.any(intensity == 0):
        raise ChromaticityDomainError(
            f"{int(np.count_nonzero(intensity == 0))} masked-in pixels have R+G+B = 0"
        )
    return rgi / intensity


def brightness(img):
    """Per-pixel channel mean (R+G+B)/3."""
    return np.asarray(img, dtype=np.float64).mean(axis=-1)
