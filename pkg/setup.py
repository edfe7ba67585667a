"""Builds the optional Cython kernels; the package still installs without them."""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("TWGVT_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "twgvt._speedups",
                    ["src/twgvt/_speedups.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
