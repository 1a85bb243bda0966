from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "platestab._core",
                ["src/platestab/_core.pyx"],
                # keep sin/cos as separate libm calls: gcc otherwise fuses
                # paired calls into glibc's sincos, which differs in the
                # last ulp for some arguments and would break bit-identity
                # with the pure-Python backend
                extra_compile_args=[
                    "-O3",
                    "-fno-builtin-sin",
                    "-fno-builtin-cos",
                    "-fno-builtin-sincos",
                ],
            )
        ],
        language_level=3,
    )
except ImportError:
    # Cython unavailable: install pure-Python only, the package falls back
    # to platestab._pure at import time.
    extensions = []

setup(ext_modules=extensions)
