"""Build script for the optional compiled kernel core.

The extension is marked optional: if no C toolchain is available the
install still succeeds and the package falls back to the pure-numpy
kernels at import time.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "primecircle.kernels._ckernels",
                ["src/primecircle/kernels/_ckernels.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
