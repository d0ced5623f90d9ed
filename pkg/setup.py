"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure NumPy fallback is selected
at import time), so a failing compile only costs speed.
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
                "hyperstab._kernels._cy",
                ["src/hyperstab/_kernels/_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    sys.stderr.write(f"hyperstab: skipping Cython kernels ({exc!r}); "
                     "pure-Python fallback will be used\n")

setup(ext_modules=ext_modules)
