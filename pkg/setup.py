import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    # The package works without the compiled core; a pure-numpy fallback is
    # selected at import time.
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "krausfit._kernels._core",
                ["src/krausfit/_kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
