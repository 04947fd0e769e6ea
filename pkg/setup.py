"""Build script: compiles the hot-loop kernels as a C extension when possible.

The package works without the extension (a pure-numpy fallback is selected at
import time), so a failed compile only costs speed, not functionality.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "untranspile._kernels",
                ["src/untranspile/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": 3},
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    sys.stderr.write(f"untranspile: building without compiled kernels ({exc})\n")

setup(ext_modules=ext_modules)
