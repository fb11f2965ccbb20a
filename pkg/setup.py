"""Build script.

The compiled kernel module is optional: when Cython and a C compiler are
available the hot per-frame kernels are built as an extension, otherwise the
package installs pure and selects the NumPy fallback at import time.
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
                "taucoh._kernels",
                sources=["src/taucoh/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": 3,
        },
    )
except ImportError:
    print("taucoh: Cython or NumPy not available at build time, "
          "installing without the compiled kernel module")

setup(ext_modules=ext_modules)
