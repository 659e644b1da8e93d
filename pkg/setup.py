"""Build the optional compiled kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed compilation should not abort installation.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "obstaclefem._kernels._ckernels",
                ["src/obstaclefem/_kernels/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": True,
        },
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"obstaclefem: skipping compiled kernels ({exc!r}); "
          "the pure NumPy backend will be used")

setup(ext_modules=ext_modules)
