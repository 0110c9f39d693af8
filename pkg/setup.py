import numpy
from setuptools import Extension, setup
from Cython.Build import cythonize

# -ffp-contract=off: the pure-numpy fallback must stay bit-identical to the
# compiled kernels, so FMA contraction is disabled.
ext_modules = cythonize(
    [
        Extension(
            "spectranet.kernels._native",
            ["src/spectranet/kernels/_native.pyx"],
            include_dirs=[numpy.get_include()],
            extra_compile_args=["-O3", "-ffp-contract=off"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
    ],
    compiler_directives={
        "language_level": "3",
        "boundscheck": False,
        "wraparound": False,
        "cdivision": True,
        "initializedcheck": False,
    },
)

setup(ext_modules=ext_modules)
