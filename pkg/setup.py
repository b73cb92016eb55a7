import os

import numpy as np
from setuptools import Extension, setup

# VDERM_NO_EXTENSION=1 installs the pure-Python package only.
ext_modules = []
if not os.environ.get("VDERM_NO_EXTENSION"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "vderm._ckernels",
                ["src/vderm/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3", "-fopenmp"],
                extra_link_args=["-fopenmp"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
