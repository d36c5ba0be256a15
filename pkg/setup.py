"""Build script: compiles the worm-engine hot kernel with Cython when possible.

The kernel source `src/latmix/qmc/_kernel.py` is valid pure Python (Cython
pure-Python mode).  When Cython + a C compiler are available the compiled
extension shadows the .py at import time; otherwise the interpreted file is
used as-is.  Both backends run the identical source, so results are
bit-for-bit identical (see benchmarks/bench_worm.py).
"""

from setuptools import setup

ext_modules = []
try:
    from setuptools import Extension
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("latmix.qmc._kernel", ["src/latmix/qmc/_kernel.py"])],
        language_level=3,
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": False,  # keep Python division semantics for bit parity
        },
    )
except ImportError:
    pass

setup(
    package_dir={"": "src"},
    ext_modules=ext_modules,
)
