"""Per-pixel shading recovery, the brightness-to-shading curve and its smoothing.

A shading map is an (H, W) array of positive factors applied to whole RGB
triples. The curve compresses a shading map into a monotone-capable
piecewise cubic over brightness so it can be re-applied to other images.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .colorspace import brightness as mean_brightness
from .errors import DegenerateInputError, ShapeError

log = logging.getLogger(__name__)

SHADING_FLOOR = 1e-6
DEFAULT_SLOTS = 50
DEFAULT_LAMBDA = 0.1


def solve_shading_lsq(b_simple, b_target, mask, full_output=False):
    """Per-pixel factor d minimizing ||d * p - q|| for p in ``b_simple``, q in ``b_target``.

    d = (p . q) / (p . p), floored at 1e-6. Pixels outside ``mask`` get 1.0, and
    so do masked-in pixels with p = 0; with ``full_output`` the count of the
    latter is returned alongside the map.
    """
    p = np.asarray(b_simple, dtype=np.float64)
    q = np.asarray(b_target, dtype=np.float64)
    if p.shape != q.shape:
        raise ShapeError(f"simple result {p.shape} and target {q.shape} differ in shape")
    pp = np.einsum("...c,...c->...", p, p)
    pq = np.einsum("...c,...c->...", p, q)
    zero = mask & (pp == 0)
    usable = mask & ~zero
    d = np.ones(pp.shape)
    d[usable] = np.maximum(pq[usable] / pp[usable], SHADING_FLOOR)
    n_zero = int(np.count_nonzero(zero))
    if n_zero:
        log.debug("%d valid pixels had a zero simple-homography value", n_zero)
    if full_output:
        return d, n_zero
    return d


def pchip_slopes(x, y):
    """Fritsch-Carlson monotone tangents for knots ``x`` (strictly ascending)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    h = np.diff(x)
    delta = np.diff(y) / h
    m = np.empty_like(y)
    m[0] = delta[0]
    m[-1] = delta[-1]
    m[1:-1] = 0.5 * (delta[:-1] + delta[1:])
    m[1:-1][delta[:-1] * delta[1:] <= 0] = 0.0
    for k in range(len(delta)):
        if delta[k] == 0:
            m[k] = m[k + 1] = 0.0
            continue
        alpha = m[k] / delta[k]
        beta = m[k + 1] / delta[k]
        radius = alpha * alpha + beta * beta
        if radius > 9.0:
            tau = 3.0 / np.sqrt(radius)
            m[k] = tau * alpha * delta[k]
            m[k + 1] = tau * beta * delta[k]
    return m


@dataclass(eq=False)
class ShadingCurve:
    """Piecewise cubic Hermite f: brightness -> shading factor.

    Evaluation clamps to the endpoint values outside [knots[0], knots[-1]].
    """

    knots: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.derivatives = np.asarray(self.derivatives, dtype=np.float64)
        n = len(self.knots)
        if n < 2:
            raise ValueError(f"a shading curve needs at least 2 knots, got {n}")
        if self.values.shape != (n,) or self.derivatives.shape != (n,):
            raise ValueError("knots, values and derivatives must be 1-D of equal length")
        if not np.all(np.diff(self.knots) > 0):
            raise ValueError("knots must be strictly ascending")
        for name in ("knots", "values", "derivatives"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} must be finite")

    @classmethod
    def from_points(cls, knots, values):
        return cls(knots, values, pchip_slopes(knots, values))

    @classmethod
    def constant(cls, value, lo=0.0, hi=1.0):
        return cls([lo, hi], [value, value], [0.0, 0.0])

    @property
    def domain(self):
        return float(self.knots[0]), float(self.knots[-1])

    def __call__(self, b):
        return eval_curve(self, b)

    def __eq__(self, other):
        if not isinstance(other, ShadingCurve):
            return NotImplemented
        return (np.array_equal(self.knots, other.knots)
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.derivatives, other.derivatives))


def eval_curve(curve, b):
    """Evaluate ``curve`` at scalar or array ``b``."""
    x, y, m = curve.knots, curve.values, curve.derivatives
    b = np.clip(np.asarray(b, dtype=np.float64), x[0], x[-1])
    k = np.clip(np.searchsorted(x, b, side="right") - 1, 0, len(x) - 2)
    h = x[k + 1] - x[k]
    t = (b - x[k]) / h
    t2 = t * t
    t3 = t2 * t
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + t
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    out = h00 * y[k] + h10 * h * m[k] + h01 * y[k + 1] + h11 * h * m[k + 1]
    return out if out.ndim else float(out)


def fit_shading_curve(brightness, shading, mask, n_slots=DEFAULT_SLOTS, weights=None):
    """Fit a monotone PCHIP curve through per-slot (mean brightness, mean shading).

    The valid brightness range is split into ``n_slots`` equal-width slots;
    empty slots are skipped. ``weights`` (per pixel, non-negative) turns the
    shading mean into a weighted one; with the squared norm of the simple
    result as weights it is the least-squares constant factor of the slot,
    which keeps near-black pixels (whose ratio is ill-conditioned) from
    dominating. Knot brightness is always the plain mean.
    """
    if n_slots < 2:
        raise ValueError(f"n_slots must be >= 2, got {n_slots}")
    b = np.asarray(brightness, dtype=np.float64)[mask]
    s = np.asarray(shading, dtype=np.float64)[mask]
    w = np.ones_like(s) if weights is None else np.asarray(weights, dtype=np.float64)[mask]
    if b.size == 0:
        raise DegenerateInputError(
            "no valid pixels to fit a shading curve; use ShadingCurve.constant instead"
        )
    lo, hi = b.min(), b.max()
    if not hi > lo:
        raise DegenerateInputError(
            f"brightness is constant ({lo:g}); fewer than 2 non-empty slots, "
            "use ShadingCurve.constant instead"
        )
    slot = np.minimum(((b - lo) / (hi - lo) * n_slots).astype(np.int64), n_slots - 1)
    counts = np.bincount(slot, minlength=n_slots)
    filled = counts > 0
    w_sums = np.bincount(slot, weights=w, minlength=n_slots)
    filled &= w_sums > 0
    knots = np.bincount(slot, weights=b, minlength=n_slots)[filled] / counts[filled]
    values = np.bincount(slot, weights=w * s, minlength=n_slots)[filled] / w_sums[filled]
    keep = np.concatenate([[True], np.diff(knots) > 0])
    knots, values = knots[keep], values[keep]
    if len(knots) < 2:
        raise DegenerateInputError(
            "fewer than 2 non-empty brightness slots; use ShadingCurve.constant instead"
        )
    return ShadingCurve.from_points(knots, values)


def laplacian(d):
    """4-neighbour Laplacian with clamp-to-edge boundary. Self-adjoint."""
    p = np.pad(d, 1, mode="edge")
    return p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4.0 * d


def laplacian_energy(d):
    return float(np.sum(laplacian(d) ** 2))


def smoothing_operator(d, lam):
    """(I + lam L^T L) d."""
    return d + lam * laplacian(laplacian(d))


def smooth_shading(d_mapped, lam, rtol=1e-8, max_iterations=None):
    """argmin_D ||D - d_mapped||^2 + lam ||laplacian(D)||^2.

    Solves (I + lam L^T L) d = d_mapped by conjugate gradients, stopping at
    relative residual ``rtol``.
    """
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    rhs = np.asarray(d_mapped, dtype=np.float64)
    if lam == 0:
        return rhs.copy()
    target = rtol * np.linalg.norm(rhs)
    max_iterations = max_iterations or max(100, rhs.size)
    x = rhs.copy()
    r = rhs - smoothing_operator(x, lam)
    p = r.copy()
    rr = np.vdot(r, r)
    for _ in range(max_iterations):
        if np.sqrt(rr) <= target:
            break
        ap = smoothing_operator(p, lam)
        alpha = rr / np.vdot(p, ap)
        x += alpha * p
        r -= alpha * ap
        rr_next = np.vdot(r, r)
        p = r + (rr_next / rr) * p
        rr = rr_next
    else:
        log.warning("smoothing CG hit %d iterations before rtol=%g", max_iterations, rtol)
    return x


def mapped_shading(curve, b_simple, lam=DEFAULT_LAMBDA):
    """Shading map reproduced from ``curve`` at the brightness of ``b_simple``, then smoothed."""
    d_mapped = eval_curve(curve, mean_brightness(b_simple))
    return smooth_shading(np.atleast_2d(d_mapped), lam)
