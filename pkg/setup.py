import os

from setuptools import setup

ext_modules = []
if os.environ.get("MOYAL_DIRAC_NO_EXT", "") in ("", "0"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "moyal_dirac._kernels",
                    ["src/moyal_dirac/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        # no Cython/numpy at build time: the NumPy fallback is used
        ext_modules = []

setup(ext_modules=ext_modules)
