from setuptools import Extension, setup
from Cython.Build import cythonize
import numpy as np

ext = Extension(
    "tempkd._kernels._core",
    ["src/tempkd/_kernels/_core.pyx"],
    include_dirs=[np.get_include()],
)

setup(ext_modules=cythonize(ext, language_level=3))
