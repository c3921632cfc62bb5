"""Direct and inverse scattering for the matrix Schrodinger equation on the half line."""

from .errors import (
    BoundaryRecoveryError,
    GridTooCoarseError,
    HLSError,
    MarchenkoSingularError,
    SolverError,
    ValidationError,
)
from .model import (
    BoundaryPair,
    BoundState,
    BoundStateData,
    ExpPolyTerm,
    Grid,
    Potential,
    ScatteringData,
)

__version__ = "0.1.0"
