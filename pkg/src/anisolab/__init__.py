"""Numerical lab for anisotropic degenerate parabolic equations."""
from .anisotropy import AnisotropyParams, ExponentError, validate_exponents

__version__ = "0.1.0"
__all__ = ["AnisotropyParams", "ExponentError", "validate_exponents", "__version__"]
