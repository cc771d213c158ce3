"""Build script: compiles the optional Cython kernel core.

The package works without the extension (a NumPy fallback is selected at
import time), so the build never hard-fails on a missing compiler or
missing Cython.
"""

from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.extension import Extension


class OptionalBuildExt(build_ext):
    """Build the Cython core if possible, otherwise install pure-Python."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: kernel extension build skipped ({exc}); "
                  "falling back to NumPy kernels")

    def build_extensions(self):
        try:
            super().build_extensions()
        except Exception as exc:
            print(f"warning: kernel extension build skipped ({exc}); "
                  "falling back to NumPy kernels")


def extension_modules():
    try:
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"warning: {exc}; building without the compiled kernel core")
        return []
    return cythonize(
        [Extension("dfkdlab.kernels._core", ["src/dfkdlab/kernels/_core.pyx"])],
        compiler_directives={"language_level": 3},
    )


setup(
    ext_modules=extension_modules(),
    cmdclass={"build_ext": OptionalBuildExt},
)
