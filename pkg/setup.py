"""Build hooks for the optional compiled kernels.

The package is fully functional without the extension: _core falls back
to pure-Python kernels at import time.  Any failure here (missing
Cython, missing compiler, cross-compile quirks) therefore degrades to a
warning rather than aborting the install.
"""

import os
import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

PYX = os.path.join("src", "cohrx", "_core", "ckernels.pyx")


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any build failure is non-fatal
            warnings.warn(f"compiled kernels skipped ({exc}); using pure-Python fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            warnings.warn(f"compiled kernels skipped ({exc}); using pure-Python fallback")


def extensions():
    if not os.path.exists(PYX):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        warnings.warn(f"compiled kernels skipped ({exc}); using pure-Python fallback")
        return []
    ext = Extension(
        "cohrx._core.ckernels",
        [PYX],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
