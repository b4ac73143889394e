import os

import numpy as np
from setuptools import Extension, setup

# The compiled kernels are optional: without Cython the package falls back to
# the numpy implementation in macrowitness/_kernels_py.py.
ext_modules = []
if not os.environ.get("MACROWITNESS_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "macrowitness._kernels",
                    ["src/macrowitness/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    # kernels never see inf or nan, so skip the C99 complex-multiply slow path
                    extra_compile_args=["-O3", "-fcx-limited-range"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
