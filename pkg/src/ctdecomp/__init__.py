"""Color transfer decomposition into a chromaticity homography and a shading curve."""

from .colorspace import (
    brightness,
    estimation_mask,
    rgi_matrix,
    rgi_matrix_inv,
    to_homogeneous_chromaticity,
    valid_mask,
)
from .errors import (
    ChromaticityDomainError,
    DegenerateInputError,
    ImageFormatError,
    ProfileError,
    ShapeError,
    UnsupportedVersionError,
)
from .homography import AlsResult, AlsSettings, apply_homography, estimate_homography_als
from .imgio import downsample, load_image, save_image
from .metrics import psnr
from .oracle import statistic_transfer, synth_pair
from .profile import (
    TransferProfile,
    apply_profile,
    approximate_transfer,
    deserialize_profile,
    extract_profile,
    load_profile,
    save_profile,
    serialize_profile,
)
from .shading import (
    ShadingCurve,
    eval_curve,
    fit_shading_curve,
    mapped_shading,
    smooth_shading,
    solve_shading_lsq,
)

__version__ = "0.1.0"
