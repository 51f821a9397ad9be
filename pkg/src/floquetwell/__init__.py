"""floquetwell: oscillating complex potential wells that scatter like static
ones — synthesis by Darboux transformation, split-step propagation, and
coupled-channel Floquet scattering analysis."""

from .errors import (
    ParameterError, DomainError, SingularSeedError, ObservableError,
    BlowupError, EdgeLeakError, TruncationError, ConditioningError,
    AnalysisWindowError, ConfigError,
)
from .fields import (
    Grid1D, PacketParams, WaveField, make_gaussian, norm2, centroid,
    momentum_spectrum, windowed_norm, edge_fraction,
    write_snapshot, read_snapshot, field_to_csv,
)
from .darboux import (
    SeedFunction, Family1Seed, Family2Seed, PlaneWaveSeed,
    PotentialSpec, Family1Potential, Family2Potential, HermitianProjection,
    StaticSech2, FreePotential, TabulatedPotential, DarbouxPotential,
    AnalyticState, FreeState, intertwined_state,
    seed_family1, seed_family2, darboux_potential, darboux_state,
    transmission_family1, group_delay_family1, check_nonsingular,
    hermitian_projection, parse_potential, equation_residual,
)

__version__ = "0.1.0"
