"""Chromaticity homography estimation by alternating least squares.

The model is D A' H_rg ~= B', where A' and B' hold the homogeneous rg
chromaticities (r, g, 1) of corresponding source and target pixels, D is a
per-pixel diagonal scaling and H_rg a 3x3 matrix. H and D are found in turn,
each by an exact least-squares solve. The RGB-space homography is
H = C @ H_rg @ inv(C).
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .colorspace import rgi_matrix, rgi_matrix_inv, to_homogeneous_chromaticity, valid_mask
from .errors import DegenerateInputError, ShapeError
from .shading import SHADING_FLOOR, fit_shading_curve

log = logging.getLogger(__name__)

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class AlsSettings:
    """ALS stopping rule.

    ``epsilon`` bounds ||A^i - A^(i-1)||_F; when None it defaults to
    1e-6 times the number of valid pixels. ``init`` picks the starting
    homography: "dlt" seeds the iteration with the normalized direct linear
    transform estimate, "identity" starts from H = I, and "best" also adds
    the plain RGB least-squares map, runs ALS from all three and keeps the
    run whose profile model best explains the target in RGB (see
    ``estimate_homography_als``).
    """

    epsilon: float | None = None
    max_iterations: int = 50
    init: str = "best"

    def __post_init__(self):
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.init not in ("best", "dlt", "identity"):
            raise ValueError(f"init must be 'best', 'dlt' or 'identity', got {self.init!r}")

    def tolerance(self, n_rows):
        return self.epsilon if self.epsilon is not None else 1e-6 * n_rows


@dataclass
class AlsResult:
    h_rg: np.ndarray
    h: np.ndarray
    shading: np.ndarray
    iterations: int
    final_residual: float
    converged: bool
    residuals: list = field(default_factory=list)


def least_squares_solve(x, y):
    """argmin_M ||x @ M - y||_F by QR factorization of ``x``.

    Raises DegenerateInputError when ``x`` is numerically rank deficient.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < x.shape[1]:
        raise DegenerateInputError(
            f"need at least {x.shape[-1]} rows for a least-squares fit, got {x.shape[0]}"
        )
    q, r = np.linalg.qr(x)
    sv = np.linalg.svd(r, compute_uv=False)
    if sv[0] == 0 or sv[-1] < RANK_RTOL * sv[0]:
        raise DegenerateInputError(
            f"design matrix is rank deficient (singular values {sv.tolist()})"
        )
    return np.linalg.solve(r, q.T @ y)


def _row_scales(x, y, floor=None):
    """Per-row d minimizing ||d * x - y||, i.e. (x . y) / (x . x).

    With ``floor`` this is the exact minimizer over d >= floor.
    """
    xx = np.einsum("ij,ij->i", x, x)
    xy = np.einsum("ij,ij->i", x, y)
    d = np.divide(xy, xx, out=np.ones_like(xx), where=xx > 0)
    return d if floor is None else np.maximum(d, floor)


def _normalizing_transform(points):
    """Similarity (column convention) sending ``points`` to centroid 0, mean distance sqrt(2)."""
    xy = points[:, :2]
    centroid = xy.mean(axis=0)
    spread = np.sqrt(((xy - centroid) ** 2).sum(axis=1)).mean()
    scale = np.sqrt(2) / spread if spread > 0 else 1.0
    return np.array([[scale, 0.0, -scale * centroid[0]],
                     [0.0, scale, -scale * centroid[1]],
                     [0.0, 0.0, 1.0]])


def dlt_homography(a, b):
    """Algebraic estimate of H with b_i ~ a_i @ H for homogeneous rows (x, y, 1).

    Hartley-normalized direct linear transform; the scale and sign of the
    result are arbitrary.
    """
    t_a = _normalizing_transform(a)
    t_b = _normalizing_transform(b)
    an = a @ t_a.T
    bn = b @ t_b.T
    x, y, w = bn[:, 0:1], bn[:, 1:2], bn[:, 2:3]
    zeros = np.zeros_like(an)
    rows = np.vstack([
        np.hstack([zeros, -w * an, y * an]),
        np.hstack([w * an, zeros, -x * an]),
    ])
    _, sv, vt = np.linalg.svd(rows, full_matrices=False)
    if sv[-2] < RANK_RTOL * sv[0]:
        raise DegenerateInputError("chromaticities do not determine a unique homography")
    g = vt[-1].reshape(3, 3)
    # g maps normalized column vectors; undo the normalization and transpose to row form.
    return (np.linalg.inv(t_b) @ g @ t_a).T


def rg_to_rgb_homography(h_rg):
    return rgi_matrix() @ h_rg @ rgi_matrix_inv()


def _als(a, b, h_rg, eps, max_iterations):
    """Alternate H and D solves from starting homography ``h_rg``."""
    start = a @ h_rg
    d = _row_scales(start, b, SHADING_FLOOR)
    current = d[:, None] * start
    residuals = [float(np.linalg.norm(current - b))]
    converged = False
    iterations = 0
    while iterations < max_iterations:
        iterations += 1
        step_h = least_squares_solve(current, b)
        mapped = current @ step_h
        step_d = _row_scales(mapped, b, SHADING_FLOOR)
        updated = step_d[:, None] * mapped
        h_rg = h_rg @ step_h
        d = d * step_d
        residuals.append(float(np.linalg.norm(updated - b)))
        change = np.linalg.norm(updated - current)
        current = updated
        if change < eps:
            converged = True
            break
    return h_rg, d, residuals, iterations, converged


def _floored_fraction(d):
    return float(np.mean(d <= SHADING_FLOOR * (1 + 1e-9)))


def _mapped_model_residual(h_rg, src_rows, tgt_rows):
    """RGB residual of the profile model on the estimation pixels.

    The candidate homography is applied, a brightness-to-shading curve is fitted
    to its per-row least-squares shading, and the curve (rather than the exact
    per-row shading) scales the mapped rows. This is the quantity a profile
    reproduces, so candidates are compared on it.
    """
    if abs(h_rg[2, 2]) < 1e-12 * np.abs(h_rg).max():
        return np.inf
    mapped = src_rows @ rg_to_rgb_homography(h_rg / abs(h_rg[2, 2]))
    d = _row_scales(mapped, tgt_rows, SHADING_FLOOR)
    b = mapped.mean(axis=1)
    try:
        curve = fit_shading_curve(b, d, np.ones(len(b), bool),
                                  weights=np.einsum("ij,ij->i", mapped, mapped))
    except DegenerateInputError:
        return np.inf
    return float(np.linalg.norm(curve(b)[:, None] * mapped - tgt_rows))


def _dlt_start(a, b):
    h = dlt_homography(a, b)
    if np.median(_row_scales(a @ h, b)) < 0:
        h = -h
    return h


def estimate_homography_als(src, tgt, mask=None, settings=None):
    """Estimate the chromaticity homography mapping ``src`` onto ``tgt``.

    Pixels correspond by position. ``mask`` defaults to the pixels that are
    non-zero in both images. When several starting points are tried, each
    runs its own ALS in rg space; the winner is the run whose RGB-space
    homography, scaled by a brightness-to-shading curve fitted on the same
    pixels, reproduces the target rows most closely. The returned ``h_rg`` is scaled so that its
    (3, 3) entry has magnitude 1 (it is +1 unless the fit maps intensity
    through a negative (3, 3) entry); the ALS shading is rescaled to
    compensate, and is 1.0 outside the mask.
    """
    src = np.asarray(src, dtype=np.float64)
    tgt = np.asarray(tgt, dtype=np.float64)
    if src.shape != tgt.shape:
        raise ShapeError(f"source {src.shape} and target {tgt.shape} differ in shape")
    settings = settings or AlsSettings()
    if mask is None:
        mask = valid_mask(src) & valid_mask(tgt)
    n = int(np.count_nonzero(mask))
    if n < 3:
        raise DegenerateInputError(f"only {n} valid pixels; need at least 3")

    a = to_homogeneous_chromaticity(src, mask)
    b = to_homogeneous_chromaticity(tgt, mask)
    eps = settings.tolerance(n)

    src_rows = src[mask]
    tgt_rows = tgt[mask]
    starts = []
    if settings.init in ("best", "dlt"):
        try:
            starts.append(_dlt_start(a, b))
        except DegenerateInputError:
            if settings.init == "dlt":
                raise
    if settings.init in ("best", "identity"):
        starts.append(np.eye(3))
    if settings.init == "best":
        try:
            h_rgb = least_squares_solve(src_rows, tgt_rows)
            starts.append(rgi_matrix_inv() @ h_rgb @ rgi_matrix())
        except DegenerateInputError:
            pass
    runs = []
    failure = None
    for h0 in starts:
        try:
            runs.append(_als(a, b, h0, eps, settings.max_iterations))
        except (DegenerateInputError, np.linalg.LinAlgError) as e:
            failure = e
    if not runs:
        raise DegenerateInputError(f"ALS failed from every starting point: {failure}")
    # Runs that push >1% of pixels to non-positive intensity (shading pinned
    # at the floor) lose to any that don't; ties go to the profile-model fit.
    ranked = [((_floored_fraction(run[1]) > 0.01,
                _mapped_model_residual(run[0], src_rows, tgt_rows)), i)
              for i, run in enumerate(runs)]
    h_rg, d, residuals, iterations, converged = runs[min(ranked)[1]]
    if not converged:
        log.warning("ALS stopped at max_iterations=%d without converging", iterations)

    # |h33|, not h33: dividing by a negative entry would flip every intensity.
    scale = abs(h_rg[2, 2])
    if scale < 1e-12 * np.abs(h_rg).max():
        raise DegenerateInputError("estimated homography has a vanishing (3,3) entry")
    h_rg = h_rg / scale
    shading = np.ones(mask.shape)
    shading[mask] = d * scale
    return AlsResult(
        h_rg=h_rg,
        h=rg_to_rgb_homography(h_rg),
        shading=shading,
        iterations=iterations,
        final_residual=residuals[-1],
        converged=converged,
        residuals=residuals,
    )


def apply_homography(img, h):
    """Map every pixel row rho to rho @ h. No clamping."""
    return np.asarray(img, dtype=np.float64) @ np.asarray(h, dtype=np.float64)
