from setuptools import setup

try:
    from Cython.Build import cythonize
    ext_modules = cythonize(
        ["src/finslerlab/_jetcore.pyx"],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # pure-Python fallback is selected at import time when the extension
    # is missing, so a Cython-less build still produces a working package
    ext_modules = []

setup(ext_modules=ext_modules)
