import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# The pure-Python twin is used when the extension cannot be built.
extensions = [
    Extension(
        "repfwd._ckernels",
        ["src/repfwd/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # bit-identical results with the Python twin need strict IEEE evaluation
        extra_compile_args=["-O3", "-ffp-contract=off", "-fno-fast-math"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
        quiet=True,
    )
    if os.environ.get("REPFWD_NO_EXT") != "1"
    else [],
)
