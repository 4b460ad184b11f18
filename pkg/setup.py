"""Build script for the optional compiled kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time); compiling it speeds up MFDFA detrending and tree training.
"""

from setuptools import setup
from setuptools.extension import Extension

try:
    import numpy as np
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "breathauth._core",
                ["src/breathauth/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
