"""Transfer profiles: extraction, application and the on-disk document.

A profile is the reusable part of a decomposed color transfer: the RGB-space
homography ``h`` and the brightness-to-shading curve, plus the smoothing
weight used when the curve is re-applied.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from . import imgio
from .colorspace import brightness, estimation_mask, valid_mask
from .errors import (
    DegenerateInputError,
    ProfileError,
    ShapeError,
    UnsupportedVersionError,
)
from .homography import AlsSettings, apply_homography, estimate_homography_als
from .shading import (
    DEFAULT_LAMBDA,
    DEFAULT_SLOTS,
    ShadingCurve,
    fit_shading_curve,
    mapped_shading,
    solve_shading_lsq,
)

PROFILE_VERSION = 1
BRIGHTNESS_DEFINITION = "mean_rgb"
MODES = ("simple", "shading")
VARIANTS = ("simple", "shading_exact", "shading_mapped")


def _check_full_rank(h):
    scaled = h / np.abs(h).max() if np.abs(h).max() > 0 else h
    return abs(np.linalg.det(scaled)) > 1e-12


@dataclass(eq=False)
class TransferProfile:
    h: np.ndarray
    curve: ShadingCurve
    lam: float = DEFAULT_LAMBDA
    provenance: str | None = None
    brightness_definition: str = BRIGHTNESS_DEFINITION
    version: int = PROFILE_VERSION

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=np.float64).reshape(3, 3)
        self.lam = float(self.lam)
        if not np.all(np.isfinite(self.h)) or not _check_full_rank(self.h):
            raise ValueError("profile homography must be finite and full rank")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam}")
        if self.brightness_definition != BRIGHTNESS_DEFINITION:
            raise ValueError(f"unsupported brightness definition {self.brightness_definition!r}")

    @classmethod
    def identity(cls, lam=DEFAULT_LAMBDA):
        return cls(np.eye(3), ShadingCurve.constant(1.0), lam)

    def __eq__(self, other):
        if not isinstance(other, TransferProfile):
            return NotImplemented
        return (np.array_equal(self.h, other.h)
                and self.curve == other.curve
                and self.lam == other.lam
                and self.provenance == other.provenance
                and self.brightness_definition == other.brightness_definition
                and self.version == other.version)


def _estimate(src, tgt, k_downsample, settings):
    if src.shape != tgt.shape:
        raise ShapeError(f"source {src.shape} and target {tgt.shape} differ in shape")
    if k_downsample is None:
        k_downsample = imgio.auto_downsample_factor(src.shape)
    small_src = imgio.downsample(src, k_downsample)
    small_tgt = imgio.downsample(tgt, k_downsample)
    try:
        return estimate_homography_als(small_src, small_tgt,
                                       estimation_mask(small_src, small_tgt),
                                       settings or AlsSettings())
    except DegenerateInputError as e:
        raise DegenerateInputError(str(e), stage="homography estimation") from e


def extract_profile(src, tgt, k_downsample=None, lam=DEFAULT_LAMBDA, n_slots=DEFAULT_SLOTS,
                    settings=None, provenance=None, full_output=False):
    """Learn a transfer profile from a source image and its color-transferred version.

    The homography is estimated on the pair box-downsampled by 2**k_downsample
    (auto-chosen so the longer side is at most 256 when None); the shading
    map and curve are always fitted at full resolution. With ``full_output``
    the ALS result is returned as well.
    """
    src = np.asarray(src, dtype=np.float64)
    tgt = np.asarray(tgt, dtype=np.float64)
    als = _estimate(src, tgt, k_downsample, settings)
    b_simple = apply_homography(src, als.h)
    mask = valid_mask(src)
    shading = solve_shading_lsq(b_simple, tgt, mask)
    try:
        curve = fit_shading_curve(brightness(b_simple), shading, mask, n_slots,
                                  weights=np.einsum("...c,...c->...", b_simple, b_simple))
    except DegenerateInputError as e:
        raise DegenerateInputError(str(e), stage="shading curve fit") from e
    profile = TransferProfile(als.h, curve, lam, provenance)
    if full_output:
        return profile, als
    return profile


def apply_profile(img, prof, mode="shading"):
    """Re-apply ``prof`` to an image of any size; the result is clamped to [0, 1]."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    simple = apply_homography(img, prof.h)
    if mode == "shading":
        simple = mapped_shading(prof.curve, simple, prof.lam)[..., None] * simple
    return np.clip(simple, 0.0, 1.0)


def approximate_transfer(src, tgt, variant="shading_mapped", k_downsample=None,
                         lam=DEFAULT_LAMBDA, n_slots=DEFAULT_SLOTS, settings=None):
    """Reproduce ``tgt`` from ``src`` with one of the decomposition variants.

    simple: src @ H. shading_exact: per-pixel least-squares shading times
    src @ H. shading_mapped: the extracted profile applied back to ``src``.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    src = np.asarray(src, dtype=np.float64)
    tgt = np.asarray(tgt, dtype=np.float64)
    if variant == "shading_mapped":
        prof = extract_profile(src, tgt, k_downsample, lam, n_slots, settings)
        return apply_profile(src, prof, "shading")

    simple = apply_homography(src, _estimate(src, tgt, k_downsample, settings).h)
    if variant == "shading_exact":
        simple = solve_shading_lsq(simple, tgt, valid_mask(src))[..., None] * simple
    return np.clip(simple, 0.0, 1.0)


# -- document format ---------------------------------------------------------

_FIELDS = ("version", "h", "curve", "lambda", "brightness_definition", "provenance")
_REQUIRED = ("version", "h", "curve", "lambda", "brightness_definition")
_CURVE_FIELDS = ("knots", "values", "derivatives")


def _floats(values):
    return [float(v) for v in np.ravel(values)]


def serialize_profile(prof):
    """UTF-8 JSON document; floats use the shortest round-trip representation."""
    doc = {
        "version": prof.version,
        "h": _floats(prof.h),
        "curve": {
            "knots": _floats(prof.curve.knots),
            "values": _floats(prof.curve.values),
            "derivatives": _floats(prof.curve.derivatives),
        },
        "lambda": float(prof.lam),
        "brightness_definition": prof.brightness_definition,
    }
    if prof.provenance is not None:
        doc["provenance"] = prof.provenance
    return (json.dumps(doc, indent=2, ensure_ascii=False, allow_nan=False) + "\n").encode("utf-8")


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProfileError(f"expected a number, got {value!r}", path)
    value = float(value)
    if not math.isfinite(value):
        raise ProfileError("number must be finite", path)
    return value


def _number_list(value, path, length=None):
    if not isinstance(value, list):
        raise ProfileError(f"expected an array, got {type(value).__name__}", path)
    if length is not None and len(value) != length:
        raise ProfileError(f"expected {length} numbers, got {len(value)}", path)
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _reject_constant(token):
    raise ValueError(f"non-finite number {token}")


def deserialize_profile(data):
    """Parse a profile document, validating every field.

    Raises:
        UnsupportedVersionError: version other than the current one.
        ProfileError: malformed JSON, missing/unknown field, bad number; the
            message names the offending field path.
    """
    try:
        text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
        doc = json.loads(text, parse_constant=_reject_constant)
    except (UnicodeDecodeError, ValueError) as e:
        raise ProfileError(f"not a valid profile document ({e})") from e
    if not isinstance(doc, dict):
        raise ProfileError("document root must be an object")
    unknown = sorted(set(doc) - set(_FIELDS))
    if unknown:
        raise ProfileError(f"unknown field(s) {unknown}")
    for name in _REQUIRED:
        if name not in doc:
            raise ProfileError("missing field", name)

    version = doc["version"]
    if isinstance(version, bool) or not isinstance(version, int):
        raise ProfileError(f"expected an integer, got {version!r}", "version")
    if version != PROFILE_VERSION:
        raise UnsupportedVersionError(
            f"unsupported profile version {version} (supported: {PROFILE_VERSION})", "version"
        )

    h = np.array(_number_list(doc["h"], "h", 9)).reshape(3, 3)
    if not _check_full_rank(h):
        raise ProfileError("homography is singular", "h")

    curve_doc = doc["curve"]
    if not isinstance(curve_doc, dict):
        raise ProfileError("expected an object", "curve")
    unknown = sorted(set(curve_doc) - set(_CURVE_FIELDS))
    if unknown:
        raise ProfileError(f"unknown field(s) {unknown}", "curve")
    arrays = {}
    for name in _CURVE_FIELDS:
        if name not in curve_doc:
            raise ProfileError("missing field", f"curve.{name}")
        arrays[name] = _number_list(curve_doc[name], f"curve.{name}")
    try:
        curve = ShadingCurve(arrays["knots"], arrays["values"], arrays["derivatives"])
    except ValueError as e:
        raise ProfileError(str(e), "curve") from e

    lam = _number(doc["lambda"], "lambda")
    if lam < 0:
        raise ProfileError("must be >= 0", "lambda")
    if doc["brightness_definition"] != BRIGHTNESS_DEFINITION:
        raise ProfileError(
            f"expected {BRIGHTNESS_DEFINITION!r}, got {doc['brightness_definition']!r}",
            "brightness_definition",
        )
    provenance = doc.get("provenance")
    if provenance is not None and not isinstance(provenance, str):
        raise ProfileError("expected a string", "provenance")
    return TransferProfile(h, curve, lam, provenance)


def save_profile(prof, path):
    with open(path, "wb") as f:
        f.write(serialize_profile(prof))


def load_profile(path):
    with open(path, "rb") as f:
        return deserialize_profile(f.read())
