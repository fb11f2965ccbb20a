"""Streaming coherency identification for power-system frequency streams.

Buses whose frequency deviations move together after a disturbance are
grouped without any pre-set cluster count or distance threshold, using
per-bus typicality statistics that update recursively as samples arrive.
The engine also reports the shortest measurement window over which the
grouping is stable, so a downstream controller knows how much data the
answer actually needed.
"""

__version__ = "0.1.0"

from ._backend import available_backends, load as load_backend
from .clustering import Cluster, ClusterSet, cluster_snapshot
from .engine import (
    STATUS_ABORTED,
    STATUS_CONVERGED,
    STATUS_RUNNING,
    STATUS_WARMING_UP,
    ConvergenceConfig,
    CoherencyEngine,
    CoherencyResult,
    run,
)
from .errors import (
    ConfigError,
    DataFormatError,
    InputQualityError,
    InsufficientDataError,
    StreamShapeError,
    TaucohError,
)
from .preprocess import PreprocessConfig, StreamingPreprocessor
from .siggen import PRESETS, GroundTruth, ModeSpec, ScenarioConfig, generate
from .tda import (
    MeasurementFrame,
    StreamingTda,
    TdaProperties,
    cumulative_proximity_batch,
    cumulative_proximity_recursive,
    density,
    eccentricity,
    tda_properties,
    typicality,
)

__all__ = [
    "__version__",
    "available_backends",
    "load_backend",
    "Cluster",
    "ClusterSet",
    "cluster_snapshot",
    "ConvergenceConfig",
    "CoherencyEngine",
    "CoherencyResult",
    "run",
    "STATUS_WARMING_UP",
    "STATUS_RUNNING",
    "STATUS_CONVERGED",
    "STATUS_ABORTED",
    "TaucohError",
    "ConfigError",
    "DataFormatError",
    "InputQualityError",
    "InsufficientDataError",
    "StreamShapeError",
    "PreprocessConfig",
    "StreamingPreprocessor",
    "PRESETS",
    "GroundTruth",
    "ModeSpec",
    "ScenarioConfig",
    "generate",
    "MeasurementFrame",
    "StreamingTda",
    "TdaProperties",
    "cumulative_proximity_batch",
    "cumulative_proximity_recursive",
    "density",
    "eccentricity",
    "tda_properties",
    "typicality",
]
