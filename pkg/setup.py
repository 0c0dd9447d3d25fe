from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# The compiled kernels are optional: emogan falls back to the numpy
# implementation at import time if the extension is missing.
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "emogan._speedups",
                ["src/emogan/_speedups.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
