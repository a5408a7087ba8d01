import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# No -ffast-math / -march=native: the kernels must round exactly like the
# pure-Python fallback (IEEE double, no FMA contraction) so that both
# backends produce bitwise-identical trajectories.
extensions = [
    Extension(
        "scaledvr._kernels",
        ["src/scaledvr/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O2", "-ffp-contract=off"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
    if cythonize is not None
    else [],
)
