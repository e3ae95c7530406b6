import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("TTSKIT_SKIP_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "ttskit._kernels._core",
                    ["src/ttskit/_kernels/_core.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "initializedcheck": False,
                "cdivision": True,
            },
        )
    except ImportError:
        # No Cython at build time: install the pure-Python fallback only.
        ext_modules = []

setup(ext_modules=ext_modules)
