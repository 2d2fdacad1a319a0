"""Build script: compiles the optional simulation kernel.

The package works without the extension (a NumPy fallback is selected at
import time); set SPIKECL_PURE_PYTHON=1 to skip compilation entirely.
"""

import os
import sys

from setuptools import setup


def make_ext_modules():
    if os.environ.get("SPIKECL_PURE_PYTHON"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        sys.stderr.write(f"skipping compiled kernel ({exc}); using the pure-Python backend\n")
        return []
    ext = Extension(
        "spikecl._kernel",
        ["src/spikecl/_kernel.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize(ext, language_level=3)


setup(ext_modules=make_ext_modules())
