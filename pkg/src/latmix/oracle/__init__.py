from .ed import EDResult, DimensionError, ed_thermal, hilbert_dimension, DIMENSION_CAP
from .atomic import AtomicResult, atomic_limit
from .freefermion import FreeFermion1DResult, hardcore_1d_free_fermion

__all__ = [
    "EDResult", "DimensionError", "ed_thermal", "hilbert_dimension", "DIMENSION_CAP",
    "AtomicResult", "atomic_limit",
    "FreeFermion1DResult", "hardcore_1d_free_fermion",
]
