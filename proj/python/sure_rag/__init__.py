"""Python bindings for the SURE robustness toolkit."""

from ._sure import *  # noqa: F401,F403
from ._sure import SureError, __version__  # noqa: F401
