"""Python interface to the aac C++ library."""

from ._aac import *  # noqa: F401,F403
