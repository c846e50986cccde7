"""Build the optional Cython filtering kernels.

If Cython or a C compiler is missing the package still installs and uses the
pure Python kernels.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("REGIMESWITCH_NO_BINARY", "0") not in ("1", "true", "True"):
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
                    "regimeswitch._kernels",
                    [os.path.join("src", "regimeswitch", "_kernels.pyx")],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )

setup(ext_modules=ext_modules)
