"""Build hook for the optional compiled kernels.

If Cython or a C compiler is unavailable the package still installs and
falls back to the numpy kernels at import time.
"""
from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("tomokin._ckernels", ["src/tomokin/_ckernels.pyx"],
                   include_dirs=[np.get_include()],
                   extra_compile_args=["-O3"],
                   define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                   optional=True)],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
