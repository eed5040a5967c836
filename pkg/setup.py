"""Build hook for the optional compiled kernels.

If Cython or a C compiler is missing the package still installs and the
pure-Python kernels are used at import time.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("MAGROTOR_NO_EXT", "") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "magrotor._ckernels",
                    ["src/magrotor/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
        )
    except Exception as exc:  # pragma: no cover - build environment dependent
        print(f"magrotor: compiled kernels disabled ({exc})")
        ext_modules = []

setup(ext_modules=ext_modules)
