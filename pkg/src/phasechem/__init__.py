"""Structure-preserving solver for a coupled Cahn-Hilliard / chemotaxis system.

The package simulates a phase fraction phi driven by Cahn-Hilliard dynamics
with a logarithmic potential, coupled to a nutrient concentration sigma that
obeys a Keller-Segel type drift-diffusion law with reaction alpha(phi, sigma).
Time stepping is a Lie splitting of a convex-splitting Newton step for
(phi, mu) and a Scharfetter-Gummel implicit step for sigma; the point of the
artifact is that the discrete scheme reproduces the analytical structure:
mass laws, strict positivity of sigma, energy/entropy dissipation, and a
relative-energy contraction estimate between paired coarse/fine runs.
"""

__version__ = "0.1.0"

from .errors import (
    DomainViolation,
    IncompatibleGrids,
    NegativeSigma,
    NewtonDiverged,
    NonpositiveSigma,
    NonZeroMean,
    OutOfDomain,
    PositivityLost,
    SolverDiverged,
)
from .grid import Field, FaceField, GridSpec
from .potentials import AlphaSpec, ModelParams

__all__ = [
    "AlphaSpec",
    "DomainViolation",
    "Field",
    "FaceField",
    "GridSpec",
    "IncompatibleGrids",
    "ModelParams",
    "NegativeSigma",
    "NewtonDiverged",
    "NonpositiveSigma",
    "NonZeroMean",
    "OutOfDomain",
    "PositivityLost",
    "SolverDiverged",
]
