import os

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; the numpy kernels are used instead
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("TDBOOST_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "tdboost._ckernels",
                ["src/tdboost/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level="3",
    )

setup(ext_modules=ext_modules)
