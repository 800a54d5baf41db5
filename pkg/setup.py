import os

from setuptools import setup

ext_modules = []
if not os.environ.get("MARKINSPECT_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass  # pure-python install; kernels fall back to numpy
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "markinspect.kernels._ckernels",
                    ["src/markinspect/kernels/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
