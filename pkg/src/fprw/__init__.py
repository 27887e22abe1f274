"""Random walks on free products of finite graphs.

Simulation of the lifted walk, exit-time analysis of its range, truncated
solvers for hitting and Green-function values, and estimators of the
asymptotic range and rate of escape.
"""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("fprw")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .estimators import *  # noqa: E402,F401,F403
from .exits import *  # noqa: E402,F401,F403
from .model import *  # noqa: E402,F401,F403
from .scenarios import *  # noqa: E402,F401,F403
from .simulator import *  # noqa: E402,F401,F403
from .solvers import *  # noqa: E402,F401,F403
from .words import *  # noqa: E402,F401,F403
from . import estimators, exits, model, scenarios, simulator, solvers, words  # noqa: E402

__all__ = (
    ["__version__"]
    + words.__all__
    + model.__all__
    + scenarios.__all__
    + simulator.__all__
    + exits.__all__
    + solvers.__all__
    + estimators.__all__
)
