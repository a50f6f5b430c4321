"""Energy attribution and offloading-constraint analysis for traced mobile apps."""

from offloadkit.kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
