"""Build script for the optional compiled rocket kernel.

The package works without the extension; ``madsnmpc._backend`` falls back to
the pure-Python evaluation path when the module cannot be imported.
"""
import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("MADSNMPC_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "madsnmpc._rocket_kernel",
                ["src/madsnmpc/_rocket_kernel.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )

setup(ext_modules=ext_modules)
