"""Builds the optional compiled scoring kernel.

All other packaging metadata lives in pyproject.toml. The extension is a
performance add-on: if Cython is unavailable (or IMSEARCH_SKIP_NATIVE is
set) the package installs without it and falls back to the numpy kernels
at import time.
"""

import os

from setuptools import setup

ext_modules = []
cmdclass = {}

if not os.environ.get("IMSEARCH_SKIP_NATIVE"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext = Extension(
            "imsearch.kernels._native",
            ["src/imsearch/kernels/_native.pyx"],
            include_dirs=[numpy.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3"],
        )
        ext_modules = cythonize([ext], language_level=3)
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules, cmdclass=cmdclass)
