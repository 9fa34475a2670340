from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    ext_modules = cythonize(
        [Extension("bpfcontain._core", ["src/bpfcontain/_core.pyx"])],
        language_level=3,
    )
else:
    # no Cython: install runs on the pure-Python kernel
    ext_modules = []

setup(ext_modules=ext_modules)
