"""Affine lattices, billiards with a barrier, lens arrays and gap statistics."""

from ._core import *  # noqa: F401,F403
from ._core import DomainError, NumericError, __doc__  # noqa: F401

__version__ = "0.1.0"
