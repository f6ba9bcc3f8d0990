"""Build script: compiles the optional Cython kernel extension.

Set PHOTOSTYLE_SKIP_EXT=1 to build a pure-Python wheel; the package
falls back to the numpy kernels at import time when the extension is
missing.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("PHOTOSTYLE_SKIP_EXT", "0") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "photostyle.kernels._ext",
                    sources=["src/photostyle/kernels/_ext.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
