"""Build script: compiles the optional speedup extension.

The extension is best-effort. If Cython or a C compiler is unavailable the
package installs anyway and sciex._kernels falls back to the pure-Python
implementations at import time.
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
                "sciex._kernels._speedups",
                sources=["src/sciex/_kernels/_speedups.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    sys.stderr.write(f"sciex: building without compiled kernels ({exc})\n")

setup(ext_modules=ext_modules)
