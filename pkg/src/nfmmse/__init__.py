"""Parametric near-field MMSE channel estimation for large planar arrays."""

from ._backend import BACKEND
from .config import ExperimentConfig, desk_scale, load_config, parse_config
from .correlation import (
    CorrelationModel, QuadratureSpec, SpreadTriplet, build_correlation, isotropic_correlation,
    spread_from_elevation,
)
from .errors import (
    ConfigError, DegeneratePoint, EigFailure, FullRankModel, InvalidRegion, NFMMSEError,
    NonOrthonormalInput, QuadratureUnderresolved, SingularCovariance, ZeroTruthPower,
)
from .estimators import (
    estimate_iso, estimate_ls, estimate_mmse, estimate_nuisances, estimate_parametric,
    estimate_sample,
)
from .geometry import ArrayGeometry, aperture, element_positions, fraunhofer_distance
from .harness import run_sweep
from .manifold import SphericalPoint, steering_batch, steering_vector
from .metrics import TrialRecord, chordal_distance, nmse
from .music import SearchGrid, locate, locate_many, music_spectrum, split_snapshots
from .simulation import PowerModel, SnapshotSet, generate_snapshots

__version__ = "0.1.0"
