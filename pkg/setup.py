"""Build script: compiles the hot-kernel extension when Cython + a C toolchain
are available, and falls back to a pure-Python install otherwise (the package
selects the NumPy kernel implementation at import time in that case)."""

import os

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# the C distribution functions (ziggurat normal/exponential, uniform) live in
# numpy's static helper library
_npyrandom_dir = os.path.join(os.path.dirname(numpy.random.__file__), "lib")

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "brbm._kernels",
                ["src/brbm/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                library_dirs=[_npyrandom_dir],
                libraries=["npyrandom"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
