import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# -ffp-contract=off: the compiled kernels must be bit-identical to the
# numpy fallback, so FMA contraction has to stay disabled.
ext_kwargs = dict(
    include_dirs=[numpy.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    extra_compile_args=["-O3", "-ffp-contract=off"],
)

extensions = [
    Extension("netassim.kernels._sis_core", ["src/netassim/kernels/_sis_core.pyx"], **ext_kwargs),
    Extension("netassim.kernels._snn_core", ["src/netassim/kernels/_snn_core.pyx"], **ext_kwargs),
]

setup(
    ext_modules=cythonize(extensions, language_level=3) if cythonize else [],
)
