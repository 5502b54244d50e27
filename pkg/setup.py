"""Build hook for the optional compiled kernels.

The package works without them; a failed compile only prints a warning and
leaves the numpy fallback in charge.
"""
import os
import sys

import numpy as np
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

DEFAULT_FLAGS = "-O3 -march=native -mprefer-vector-width=512 -funroll-loops -fopenmp"


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: compiled kernels not built ({exc}); using numpy fallback",
                  file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: {ext.name} failed to build ({exc})", file=sys.stderr)


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    flags = os.environ.get("ANISOLAB_CFLAGS", DEFAULT_FLAGS).split()
    ext = Extension(
        "anisolab.solver._core",
        ["src/anisolab/solver/_core.pyx"],
        include_dirs=[np.get_include(), "src/anisolab/solver"],
        extra_compile_args=flags,
        extra_link_args=[f for f in flags if f == "-fopenmp"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
