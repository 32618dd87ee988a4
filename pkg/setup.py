"""Build hook: optionally compiles the exact-simplex kernel with Cython.

The solver works without the extension (the same source runs as plain
Python); set REAXPLAIN_NO_EXT=1 to skip compilation explicitly.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("REAXPLAIN_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "reaxplain.verifier._simplex_core_c",
                    ["src/reaxplain/verifier/_simplex_core.py"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
