import sys

import numpy as np
from setuptools import Extension, setup

# glibc's libmvec supplies the vector exp/tanh that -ffast-math -fopenmp-simd emit
if sys.platform.startswith("linux"):
    gru_args = ["-O3", "-ffast-math", "-fopenmp-simd"]
    gru_libs = ["mvec", "m"]
else:
    gru_args, gru_libs = ["-O3"], []

try:
    from Cython.Build import cythonize
except ImportError:  # fallback kernels are used at runtime
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "cne._kernels",
                ["src/cne/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            ),
            # fast-math on compile only; linking with it would set FTZ process-wide
            Extension(
                "cne._gru_kernels",
                ["src/cne/_gru_kernels.pyx", "src/cne/_gru_simd.c"],
                include_dirs=["src/cne"],
                extra_compile_args=gru_args,
                libraries=gru_libs,
            ),
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
