"""Two-stage MMSE precoding for massive MIMO downlinks with 1-bit DACs and ADCs."""

__version__ = "0.1.0"

from .errors import (
    DegenerateCovarianceError,
    DegeneratePrecoderError,
    DivergedError,
    InvalidCovarianceError,
    UnknownSchemeError,
)
from .quantization import (
    QUANT_DISTORTION,
    arcsine_cov_quantized,
    cross_cov_quantized_unquantized,
    linearized_cov_quantized,
    quantize,
)
from .precoding import (
    MseEvaluation,
    SystemDimensions,
    analog_from_digital,
    effective_rx_cov_diag,
    equal_power_analog,
    k2_of,
    mse_fixed_analog,
    mse_fixed_analog_gradient,
    mse_gradient,
    mse_objective,
    project_power,
    wf_precoder,
)
from .optimizer import GpConfig, GpResult, gradient_projection, qp_gp_equal_power

__all__ = [
    "__version__",
    "DegenerateCovarianceError",
    "DegeneratePrecoderError",
    "DivergedError",
    "InvalidCovarianceError",
    "UnknownSchemeError",
    "QUANT_DISTORTION",
    "quantize",
    "cross_cov_quantized_unquantized",
    "arcsine_cov_quantized",
    "linearized_cov_quantized",
    "SystemDimensions",
    "MseEvaluation",
    "k2_of",
    "analog_from_digital",
    "equal_power_analog",
    "effective_rx_cov_diag",
    "mse_objective",
    "mse_gradient",
    "mse_fixed_analog",
    "mse_fixed_analog_gradient",
    "project_power",
    "wf_precoder",
    "GpConfig",
    "GpResult",
    "gradient_projection",
    "qp_gp_equal_power",
]
