"""Exact few-boson dynamics and the good/bad particle formalism."""

from .counting import (
    BadParticleDecomposition,
    CountingWeight,
    density_comparisons,
    m_weight,
    n_weight,
    pk_projector,
    projectors,
    tilde_psi,
    weighted_counting,
)
from .firstquant import TensorSpace, lemma1_suite
from .fock import (
    FockBasis,
    build_hamiltonian,
    diagonalize,
    evolve,
    one_particle_rdm,
    product_state,
    site_vector,
)

__all__ = [
    "BadParticleDecomposition",
    "CountingWeight",
    "FockBasis",
    "TensorSpace",
    "build_hamiltonian",
    "density_comparisons",
    "diagonalize",
    "evolve",
    "lemma1_suite",
    "m_weight",
    "n_weight",
    "one_particle_rdm",
    "pk_projector",
    "product_state",
    "projectors",
    "site_vector",
    "tilde_psi",
    "weighted_counting",
]
