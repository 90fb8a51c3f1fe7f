"""State-vector simulation of distributed quantum addition and classification."""

from . import adder, classifier, netsim, simcore
from .errors import DistQMLError

__all__ = ["adder", "classifier", "netsim", "simcore", "DistQMLError"]
__version__ = "0.1.0"
