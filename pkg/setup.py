from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:  # no compiler toolchain: the numpy fallback is used
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("strongrhi._sweep", ["src/strongrhi/_sweep.pyx"], include_dirs=[np.get_include()])],
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=ext_modules)
