"""Build script.

The order-book matching core and the sampled mid-price series are the hot
kernels of the simulator.  When Cython and a C compiler are available they
are compiled to an extension module (bubblesim._core); otherwise the package
installs with the pure-Python twins in bubblesim._core_py and everything
still works, just slower.  Set BUBBLESIM_NO_EXT=1 to skip compilation.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("BUBBLESIM_NO_EXT") != "1":
    pyx = os.path.join("src", "bubblesim", "_core.pyx")
    if os.path.exists(pyx):
        try:
            import numpy
            from Cython.Build import cythonize

            # No -ffast-math: the compiled twin must be bit-identical to the
            # pure-Python fallback, including float division results.
            ext_modules = cythonize(
                [pyx],
                compiler_directives={
                    "language_level": "3",
                    "boundscheck": False,
                    "wraparound": False,
                    "cdivision": True,
                },
            )
            for ext in ext_modules:
                ext.extra_compile_args = ["-O3"]
                ext.include_dirs = [numpy.get_include()]
        except ImportError:
            pass

setup(ext_modules=ext_modules)
