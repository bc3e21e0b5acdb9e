"""Build script: compiles the optional Cython kernel extension.

Set TEARFILM_NO_EXT=1 to skip the extension entirely; the package then
runs on the pure-numpy kernel fallback selected at import time.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("TEARFILM_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "tearfilm.kernels._speedups",
                    ["src/tearfilm/kernels/_speedups.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
