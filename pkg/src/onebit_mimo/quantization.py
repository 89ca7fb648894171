"""
Complex 1-bit quantizer and second-order statistics of hard-limited
circular complex Gaussian vectors.

All covariance helpers take a Hermitian matrix ``C_x`` and normalize it with
``K = diag(C_x)^(-1/2)``. The exact covariance follows the arcsine law applied
separately to the real and imaginary parts; the linearized form replaces
``arcsin(x)`` by ``x`` off the diagonal and adds the constant distortion term
``(pi/2 - 1) I`` so that the diagonal stays at 2.
"""

import numpy as np

from .errors import DegenerateCovarianceError, InvalidCovarianceError

__all__ = [
    "QUANT_DISTORTION",
    "CLAMP_TOLERANCE",
    "quantize",
    "normalizer",
    "cross_cov_quantized_unquantized",
    "arcsine_cov_quantized",
    "linearized_cov_quantized",
]

#: Weight ``c = pi/2 - 1`` of the uncorrelated quantization distortion.
QUANT_DISTORTION = np.pi / 2 - 1

#: Normalized correlations within this distance of +-1 are clamped.
CLAMP_TOLERANCE = 1e-9


def quantize(x):
    """
    Complex 1-bit quantizer ``sign(Re x) + 1j * sign(Im x)``.

    Zero (including negative zero) maps to +1 so the function is total.

    Parameters
    ----------
    x : array_like
        Complex input of any shape.

    Returns
    -------
    numpy.ndarray
        Complex array of the same shape with entries in {+-1 +- 1j}.
    """
    x = np.asarray(x)
    re = np.where(np.real(x) >= 0, 1.0, -1.0)
    im = np.where(np.imag(x) >= 0, 1.0, -1.0)
    return re + 1j * im


def normalizer(C_x):
    """Return the diagonal of ``K = diag(C_x)^(-1/2)`` as a real vector."""
    C_x = np.asarray(C_x)
    if C_x.ndim != 2 or C_x.shape[0] != C_x.shape[1]:
        raise ValueError(f"covariance must be square, got shape {C_x.shape}")
    diag = np.real(np.diagonal(C_x))
    if np.any(~(diag > 0)):
        raise DegenerateCovarianceError(
            f"covariance diagonal must be strictly positive, got {diag}"
        )
    return 1.0 / np.sqrt(diag)


def cross_cov_quantized_unquantized(C_x):
    """
    Cross-covariance ``E[Q(x) x^H] = sqrt(4/pi) K C_x``.

    Parameters
    ----------
    C_x : (n, n) array_like
        Covariance of the circular complex Gaussian input.

    Returns
    -------
    (n, n) complex numpy.ndarray
    """
    C_x = np.asarray(C_x, dtype=complex)
    k = normalizer(C_x)
    return np.sqrt(4 / np.pi) * k[:, None] * C_x


def _normalized(C_x):
    C_x = np.asarray(C_x, dtype=complex)
    k = normalizer(C_x)
    return k[:, None] * C_x * k[None, :]


def _clamp(R, part):
    excess = np.max(np.abs(R)) - 1.0
    if excess > CLAMP_TOLERANCE:
        raise InvalidCovarianceError(
            f"{part} part of a normalized correlation exceeds 1 by {excess:.3e}"
        )
    return np.clip(R, -1.0, 1.0)


def arcsine_cov_quantized(C_x):
    """
    Exact covariance ``E[Q(x) Q(x)^H]`` of a quantized circular Gaussian vector.

    The arcsine is applied element-wise to the real and imaginary parts of
    ``K C_x K``. The diagonal is exactly 2 since every quantized entry has
    squared magnitude 2.

    Raises
    ------
    DegenerateCovarianceError
        If a diagonal entry of `C_x` is not strictly positive.
    InvalidCovarianceError
        If a normalized correlation exceeds 1 in magnitude by more than
        `CLAMP_TOLERANCE`.
    """
    R = _normalized(C_x)
    re = _clamp(R.real, "real")
    im = _clamp(R.imag, "imaginary")
    out = (4 / np.pi) * (np.arcsin(re) + 1j * np.arcsin(im))
    np.fill_diagonal(out, 2.0)
    return out


def linearized_cov_quantized(C_x):
    """
    First-order approximation ``(4/pi) (K C_x K + c I)`` of the quantized covariance.

    Uses ``arcsin(x) ~ x`` off the diagonal; the distortion term
    ``c = pi/2 - 1`` keeps the diagonal at exactly 2.
    """
    R = _normalized(C_x)
    _clamp(R.real, "real")
    _clamp(R.imag, "imaginary")
    out = (4 / np.pi) * (R + QUANT_DISTORTION * np.eye(R.shape[0]))
    np.fill_diagonal(out, 2.0)
    return out
