"""Exception types shared across the package."""


class DegenerateInputError(ValueError):
    """Input data cannot support the requested estimate (too few pixels, rank loss...)."""

    def __init__(self, message, stage=None):
        self.stage = stage
        if stage:
            message = f"{stage}: {message}"
        super().__init__(message)


class ShapeError(ValueError):
    """Two images that must correspond pixel-for-pixel have different shapes."""


class ImageFormatError(ValueError):
    """File is not a supported image format or bit depth."""


class ProfileError(ValueError):
    """Malformed transfer profile document."""

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class UnsupportedVersionError(ProfileError):
    pass


class ChromaticityDomainError(ArithmeticError):
    """A zero-intensity pixel reached chromaticity normalization."""
