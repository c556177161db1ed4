"""Student-teacher SGD learning dynamics: microscopic simulator,
order-parameter ODE system, and plateau quantification."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
