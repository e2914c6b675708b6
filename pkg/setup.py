"""Build script for the optional compiled kernel.

If Cython or a C compiler is unavailable the package installs without the
extension and uses the pure-Python kernel.
"""
from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("qubitdist._substitute", ["src/qubitdist/_substitute.pyx"], extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    print(f"qubitdist: building without compiled kernel ({exc})")

setup(ext_modules=ext_modules)
