import os

import numpy as np
from setuptools import Extension, setup

# ALIGNKIT_NO_EXT=1 skips compilation; the package then runs on its pure-Python kernels.
ext_modules = []
if not os.environ.get("ALIGNKIT_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "alignkit._kernels",
                ["src/alignkit/_kernels.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
