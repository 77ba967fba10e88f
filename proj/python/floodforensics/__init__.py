"""Detection and localization of GAN-generated flood imagery.

Thin Python bindings over the C++ core. Images are HxWx3 float arrays in
[0, 1]; masks are HxW uint8 arrays (nonzero = manipulated).
"""

from ._core import *  # noqa: F401,F403
from ._core import Detector, Error

__all__ = [name for name in dir() if not name.startswith("_")]
