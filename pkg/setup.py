import ctypes.util
import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

compile_args = ["-O3", "-ffast-math"]
if not os.environ.get("NFMMSE_PORTABLE"):
    compile_args.append("-march=native")

# glibc's SIMD sin/cos live in libmvec; without it gcc falls back to scalar calls.
libraries = ["m"]
if ctypes.util.find_library("mvec"):
    libraries.append("mvec")
else:
    compile_args.append("-fno-tree-loop-vectorize")

extensions = [
    Extension(
        "nfmmse._kernels",
        ["src/nfmmse/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=compile_args,
        libraries=libraries,
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))
