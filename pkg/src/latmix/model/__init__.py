from .lattice import (
    LatticeGeometry,
    SpeciesParams,
    MixtureParams,
    site_potentials,
    trap_offsets,
    SOFT_CORE,
    HARD_CORE,
    FERMION,
)
from .bands import (
    BandStructure,
    ConvergenceError,
    band_structure,
    tunneling_from_depth,
    deep_lattice_tunneling,
)
from .wannier import WannierFunction, WannierError, wannier, harmonic_ground_width, harmonic_state

__all__ = [
    "LatticeGeometry", "SpeciesParams", "MixtureParams", "site_potentials",
    "trap_offsets", "SOFT_CORE", "HARD_CORE", "FERMION",
    "BandStructure", "ConvergenceError", "band_structure",
    "tunneling_from_depth", "deep_lattice_tunneling",
    "WannierFunction", "WannierError", "wannier", "harmonic_ground_width",
    "harmonic_state",
]
