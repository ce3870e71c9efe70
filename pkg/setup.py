"""Build script: compiles the optional Cython kernel extension.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so a failed compile degrades to a pure install
instead of aborting.  Set IMBTREES_REQUIRE_EXT=1 to turn build failures into
hard errors, or IMBTREES_SKIP_EXT=1 to skip the extension entirely.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler or toolchain missing
            self._degrade(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._degrade(exc)

    def _degrade(self, exc):
        if os.environ.get("IMBTREES_REQUIRE_EXT"):
            raise
        sys.stderr.write(
            "warning: building the imbtrees C kernels failed (%s); "
            "installing with the pure numpy backend only\n" % exc
        )


def extensions():
    if os.environ.get("IMBTREES_SKIP_EXT"):
        return []
    import numpy
    from Cython.Build import cythonize

    ext = Extension(
        "imbtrees.kernels._ckernels",
        ["src/imbtrees/kernels/_ckernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
