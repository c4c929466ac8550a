"""Build script for the optional compiled kernel extension.

The package is pure python except for rfmfs._kernels, a Cython module with
the batched disk-grid reductions that dominate replica experiments.  If
Cython or a C compiler is unavailable the build degrades silently and the
package falls back to the numpy implementation at import time.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from setuptools import Extension
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "rfmfs._kernels",
                sources=["src/rfmfs/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"rfmfs: skipping compiled kernels ({exc}); numpy fallback will be used")

setup(ext_modules=ext_modules)
