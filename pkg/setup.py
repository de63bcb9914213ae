"""Build the optional Cython core.

The package works without it: ``sparsecc.kernels`` falls back to the
pure-Python implementation when ``sparsecc._core`` cannot be imported.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("SPARSECC_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "sparsecc._core",
                    ["src/sparsecc/_core.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
