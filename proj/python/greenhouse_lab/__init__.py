"""Lettuce greenhouse climate-control laboratory: physics model, recurrent
surrogates and a receding-horizon controller."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
