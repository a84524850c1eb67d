"""Build hook for the optional compiled kernel extension.

The package is fully functional without the extension: the NumPy/SciPy
fallback kernels are selected at import time when the compiled module is
absent.  Set REIDFLOW_NO_EXT=1 to skip compilation entirely.
"""

import os
import sys

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("REIDFLOW_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        # -ffp-contract=off keeps the sequential sums bit-identical to the
        # fallback path even if a compiler would otherwise fuse them
        flags = [] if sys.platform == "win32" else ["-O3", "-ffp-contract=off"]
        ext_modules = cythonize(
            [
                Extension(
                    "reidflow._kernels._core",
                    ["src/reidflow/_kernels/_core.pyx"],
                    extra_compile_args=flags,
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
