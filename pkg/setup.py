"""Build script: compiles the optional Cython propagation kernel.

The package is fully functional without the extension (a NumPy fallback is
selected at import time), so a failed compile only costs speed.  Long
time-dependent runs are tens of times faster with the compiled kernel
(benchmarks/bench_kernels.py measures ~70x here).
"""
import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if we can; warn and continue if we cannot."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler, broken toolchain, ...
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"WARNING: building the trapsim._kernel extension failed ({exc}); "
            "falling back to the pure-NumPy propagation kernel.",
            file=sys.stderr,
        )


def extensions():
    if os.environ.get("TRAPSIM_NO_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"WARNING: {exc}; skipping compiled kernel.", file=sys.stderr)
        return []
    ext = Extension(
        "trapsim._kernel",
        ["src/trapsim/_kernel.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
