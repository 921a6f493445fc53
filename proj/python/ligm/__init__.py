"""Locally inertial Godunov scheme with dynamical time dilation."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
