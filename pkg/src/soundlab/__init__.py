"""Sound waves in a weakly interacting Bose gas: mean-field, Bogolyubov and few-body numerics."""

from .grid import TorusGrid, dft_forward, dft_inverse, l2_norm, make_grid
from .potential import PairPotential, bump_potential, convolve, potential_from_spec, zero_potential

__version__ = "0.1.0"

__all__ = [
    "TorusGrid",
    "PairPotential",
    "make_grid",
    "dft_forward",
    "dft_inverse",
    "l2_norm",
    "bump_potential",
    "zero_potential",
    "convolve",
    "potential_from_spec",
    "__version__",
]
