"""Build script: compiles the optional Cython assembly kernel.

The package works without the compiled extension (a pure-Python fallback is
selected at import time), so the extension is marked optional and a failed
compile does not abort installation.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "bogobench._kernels._assembly",
                ["src/bogobench/_kernels/_assembly.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

for ext in extensions:
    ext.optional = True

setup(ext_modules=extensions)
