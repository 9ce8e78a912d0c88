"""Build script: compiles the optional fused-kernel extension.

The package works without the extension (a pure-numpy backend is selected
at import time), so any failure here degrades to a source-only install
instead of aborting.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext = Extension(
        "ttpo._kernels._core",
        ["src/ttpo/_kernels/_core.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize([ext], language_level=3)
except Exception as exc:  # noqa: BLE001 - fall back to pure python
    print(f"skipping compiled kernels ({exc}); pure-python backend will be used")

setup(ext_modules=ext_modules)
