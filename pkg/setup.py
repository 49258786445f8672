"""Build script for the compiled kernel extension.

The package works without the extension (a pure-Python fallback is selected
at import time), so a failed compile should not block installation: build
with ``python setup.py build_ext --inplace`` or let pip invoke it.
"""

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "navvlm._kernels",
        ["src/navvlm/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # forbid FMA contraction so boundary arithmetic matches the
        # pure-Python fallback bit for bit
        extra_compile_args=["-ffp-contract=off"],
    )
]

setup(ext_modules=cythonize(extensions, language_level="3"))
