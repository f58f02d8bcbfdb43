"""Local wavelet estimation of a time-varying long-memory parameter."""
__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AdvisoryError,
    BoundaryError,
    ConfigurationError,
    DataError,
    DomainError,
    LocmemError,
    PrecisionError,
    ScaleDepthError,
    TruncationWarning,
)
from .wavelets import WaveletBank, get_bank  # noqa: E402
from .simulate import (  # noqa: E402
    MemoryCurve,
    TvArfimaModel,
    TvFbmModel,
    TvFgnModel,
    simulate,
    simulate_tangent,
)
from .weights import RectangleKernel, TabulatedKernel, WeightScheme  # noqa: E402
from .scalogram import (  # noqa: E402
    StreamingScalogram,
    default_grid,
    dwt,
    local_scalogram,
    streaming_scalogram,
)
from .asymptotics import K_of_d, sigma_matrix, variance_report  # noqa: E402
from .estimator import (  # noqa: E402
    EstimationPlan,
    MemoryEstimate,
    advise_tuning,
    estimate,
    estimate_d,
    ols_regression_weights,
)

__all__ = [
    "AdvisoryError", "BoundaryError", "ConfigurationError", "DataError", "DomainError",
    "LocmemError", "PrecisionError", "ScaleDepthError", "TruncationWarning",
    "WaveletBank", "get_bank",
    "MemoryCurve", "TvArfimaModel", "TvFbmModel", "TvFgnModel", "simulate", "simulate_tangent",
    "RectangleKernel", "TabulatedKernel", "WeightScheme",
    "StreamingScalogram", "default_grid", "dwt", "local_scalogram", "streaming_scalogram",
    "K_of_d", "sigma_matrix", "variance_report",
    "EstimationPlan", "MemoryEstimate", "advise_tuning", "estimate", "estimate_d",
    "ols_regression_weights",
]
