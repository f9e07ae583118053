"""Build hook for the optional compiled kernel extension.

The package is fully functional without the extension (pure-Python kernels
are selected at import time when ``twinadapt.kernels._native`` is missing),
so a failed compile only costs speed, never correctness.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "twinadapt.kernels._native",
                ["src/twinadapt/kernels/_native.pyx"],
                # IEEE semantics must match CPython float math exactly:
                # no -ffast-math, no reassociation.
                extra_compile_args=["-O2"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
