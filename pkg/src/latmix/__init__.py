"""latmix: adiabatic lattice loading of Bose-Fermi mixtures.

Worm-algorithm QMC for (two-species) Bose-Hubbard systems, exact small-system
and fermion references, entropy matching for adiabatic loading, a synthetic
imaging pipeline, and STIRAP band-transfer estimates.
"""

from .qmc.engine import BACKEND as qmc_backend

__version__ = "0.1.0"
__all__ = ["qmc_backend", "__version__"]
