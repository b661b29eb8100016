"""bubblesim: agent-based limit-order-book market simulator with bubble
generation, bubble detection, and learning trading agents."""

from bubblesim.core import COMPILED

__version__ = "0.1.0"
__all__ = ["COMPILED", "__version__"]
