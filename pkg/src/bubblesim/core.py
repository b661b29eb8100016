"""Hot-kernel selection: compiled extension if present, pure Python otherwise.

Set BUBBLESIM_PURE_PYTHON=1 to force the fallback (used by the benchmark and
the twin-equivalence tests).
"""

import os

if os.environ.get("BUBBLESIM_PURE_PYTHON") == "1":
    from bubblesim._core_py import MidSeries, OrderBook

    COMPILED = False
else:
    try:
        from bubblesim._core import MidSeries, OrderBook  # type: ignore[attr-defined]

        COMPILED = True
    except ImportError:
        from bubblesim._core_py import MidSeries, OrderBook

        COMPILED = False

__all__ = ["OrderBook", "MidSeries", "COMPILED"]
