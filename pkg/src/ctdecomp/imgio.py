"""Image loading, saving and box downsampling.

Images are float64 arrays of shape (height, width, 3). Binary PPM (P6, maxval
255) is handled here directly and is the bit-exact reference format; 8-bit PNG
goes through Pillow.
"""

import os
import re
import tempfile

import numpy as np
from PIL import Image

from .errors import ImageFormatError

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
IMAGE_SUFFIXES = (".ppm", ".png")

_PPM_HEADER = re.compile(rb"P6(?:\s+|#[^\n]*\n)+(\d+)(?:\s+|#[^\n]*\n)+(\d+)(?:\s+|#[^\n]*\n)+(\d+)\s")


def _parse_ppm(raw, path):
    m = _PPM_HEADER.match(raw)
    if m is None:
        raise ImageFormatError(f"{path}: malformed PPM header {raw[:32]!r}")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise ImageFormatError(
            f"{path}: unsupported PPM maxval {maxval} in header {raw[:m.end()]!r}"
        )
    if width < 1 or height < 1:
        raise ImageFormatError(f"{path}: empty image in header {raw[:m.end()]!r}")
    size = width * height * 3
    payload = raw[m.end():m.end() + size]
    if len(payload) < size:
        raise OSError(f"{path}: truncated PPM payload ({len(payload)} of {size} bytes)")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)


def _read_png(path):
    with Image.open(path) as im:
        if im.mode not in ("RGB", "RGBA"):
            raise ImageFormatError(
                f"{path}: unsupported PNG mode {im.mode!r} (need 8-bit RGB or RGBA)"
            )
        im.load()
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def load_image(path):
    """Read a P6 PPM or 8-bit PNG file into a float image in [0, 1].

    Each 8-bit code c becomes exactly c / 255.

    Raises:
        OSError: file missing, unreadable or truncated.
        ImageFormatError: anything other than P6/maxval 255 or 8-bit RGB(A) PNG.
    """
    with open(path, "rb") as f:
        raw = f.read()
    if raw.startswith(b"P6"):
        codes = _parse_ppm(raw, path)
    elif raw.startswith(PNG_SIGNATURE):
        codes = _read_png(path)
    else:
        raise ImageFormatError(f"{path}: unrecognized image header {raw[:16]!r}")
    return codes.astype(np.float64) / 255.0


def quantize(img):
    """Clamp to [0, 1] and round half-up to 8-bit codes."""
    img = np.asarray(img, dtype=np.float64)
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def encode_ppm(img):
    codes = quantize(img)
    height, width = codes.shape[:2]
    return b"P6\n%d %d\n255\n" % (width, height) + codes.tobytes()


def save_image(img, path):
    """Write ``img`` as PNG (by ``.png`` suffix) or P6 PPM otherwise.

    The file is written to a temporary sibling and renamed into place, so a
    reader never observes a partially written image.
    """
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as f:
            if path.lower().endswith(".png"):
                Image.fromarray(quantize(img), mode="RGB").save(f, format="PNG")
            else:
                f.write(encode_ppm(img))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _block_starts(size, factor):
    n_out = max(1, size // factor)
    return np.arange(n_out) * factor


def downsample(img, k):
    """Box-filter ``img`` by a factor of 2**k along each axis.

    Output dimensions are max(1, floor(dim / 2**k)). Each output pixel is the
    mean of its source block; leftover rows/columns that do not fill a whole
    block are folded into the last block.
    """
    if k < 0:
        raise ValueError(f"downsample factor exponent must be >= 0, got {k}")
    img = np.asarray(img, dtype=np.float64)
    if k == 0:
        return img.copy()
    factor = 2 ** k
    rows = _block_starts(img.shape[0], factor)
    cols = _block_starts(img.shape[1], factor)
    sums = np.add.reduceat(np.add.reduceat(img, rows, axis=0), cols, axis=1)
    row_counts = np.diff(np.append(rows, img.shape[0]))
    col_counts = np.diff(np.append(cols, img.shape[1]))
    counts = np.outer(row_counts, col_counts)[..., None]
    return sums / counts


def auto_downsample_factor(shape, max_dim=256):
    """Smallest k such that downsample(img, k) has no side longer than ``max_dim``."""
    k = 0
    while max(max(1, d // 2 ** k) for d in shape[:2]) > max_dim:
        k += 1
    return k


def list_images(directory):
    """Image files directly inside ``directory``, in lexicographic order."""
    names = sorted(
        name for name in os.listdir(directory)
        if name.lower().endswith(IMAGE_SUFFIXES)
        and os.path.isfile(os.path.join(directory, name))
    )
    return names
