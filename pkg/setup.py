"""Build script: compiles the Cython core when a toolchain is available.

The package works without the extension (a numpy fallback is selected at
import time), so any build failure here is demoted to a warning.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/bieinv/_core.pyx",
        language_level=3,
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
    for ext in ext_modules:
        ext.include_dirs.append(numpy.get_include())
        ext.extra_compile_args = ["-O3"]
        ext.define_macros = [("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")]
except Exception as exc:  # pragma: no cover - depends on toolchain
    sys.stderr.write(f"warning: building without compiled core ({exc})\n")
    ext_modules = []

setup(ext_modules=ext_modules)
