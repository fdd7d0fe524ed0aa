"""Conformal risk control for semantic segmentation (Python bindings)."""

from ._crcseg import *  # noqa: F401,F403
from ._crcseg import __version__, CrcsegError  # noqa: F401
