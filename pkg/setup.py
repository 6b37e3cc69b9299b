import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("IDUSEL_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("idusel._ckernels", ["src/idusel/_ckernels.pyx"], include_dirs=[np.get_include()])],
            language_level=3,
        )

setup(ext_modules=ext_modules)
