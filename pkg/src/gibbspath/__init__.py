"""Ground-state Gibbs path measures, proximal drifts, and lattice dynamics.

The package is organised around one-dimensional Schroedinger ground states:
`potentials` defines the interaction families and their convex splits,
`convex` the proximal/envelope machinery for the non-smooth drift, `schrodinger`
the finite-difference eigensolver, `gibbs` the exact transfer-kernel path
sampler with its consistency checks, `spde` the lattice Langevin integrators
and coupling/invariance checks, `functional` the entropy and gradient
inequalities, and `harness` the configuration, manifest, and verification
suite exposed by the command line interface.
"""

from .potentials import (
    PotentialSpec,
    GrowthSpec,
    absnorm,
    cosh_potential,
    eval_U,
    eval_V,
    exponential,
    free_field,
    min_section_grad,
    polynomial,
    superposition,
    trigonometric,
)
from .convex import ProxProblem, drift, moreau_env, prox, yosida_grad
from .schrodinger import ZGrid, GroundState, SpectralData, ground_state, spectrum

__version__ = "0.1.0"
