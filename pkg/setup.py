"""Build script for the compiled simulation kernel.

The package works without the extension (a pure-Python kernel is selected at
import time), but the compiled kernel is what makes the large Monte Carlo
workloads practical, so the build is attempted unconditionally.
"""

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "hailsim._kernel._simcore",
        sources=["src/hailsim/_kernel/_simcore.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
