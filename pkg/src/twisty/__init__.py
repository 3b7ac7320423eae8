"""Sliding-window embeddings of scalar observations of flows on closed surfaces."""
from ._accel import backend_name

__version__ = "0.1.0"
__all__ = ["backend_name", "__version__"]
