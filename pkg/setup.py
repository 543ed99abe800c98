"""Build script for the optional compiled kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so a missing Cython or C compiler degrades the build instead
of failing it.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [Extension("centerkit._native", ["src/centerkit/_native.pyx"])],
        language_level="3",
    )

setup(ext_modules=extensions)
