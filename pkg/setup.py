"""Build script for the compiled simulation kernel.

The extension is optional: if Cython or a C compiler is unavailable the
package falls back to the pure-NumPy engine at import time.
"""
from pathlib import Path

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None and Path("src/formlearn/engine/_core.pyx").exists():
    ext_modules = cythonize(
        [
            Extension(
                "formlearn.engine._core",
                ["src/formlearn/engine/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-march=native"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
