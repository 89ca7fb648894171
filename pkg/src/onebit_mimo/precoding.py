"""
Precoder-side quantities for the quantized downlink
``s -> P -> Q_t -> D -> H -> + noise -> Q_r``.

Choosing the analog stage as ``D = diag(P P^H)^(1/2)`` cancels the row
normalization ``K2`` introduced by the transmit quantizer, so the linearized
received covariance only depends on ``P``::

    C_x = (4/pi) H (P P^H + c diag(P P^H)) H^H + C_eta

and the MSE becomes ``sigma_s^2 M + 2M - (8 sigma_s/pi) Re tr(K1 H P)`` with
``K1 = diag(C_x)^(-1/2)``.

Gradient convention
-------------------
`mse_gradient` returns the Wirtinger derivative ``dMSE/dP`` (``P*`` held
fixed). For the real parameterization ``P = X + jY`` this means
``dMSE/dX = 2 Re G`` and ``dMSE/dY = -2 Im G``; the descent direction used by
the optimizer is ``conj(G)``, i.e. half the real gradient ``dX + j dY``.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegeneratePrecoderError
from .quantization import QUANT_DISTORTION

__all__ = [
    "ROW_NORM_FLOOR",
    "SystemDimensions",
    "MseEvaluation",
    "db_to_linear",
    "k2_of",
    "analog_from_digital",
    "equal_power_analog",
    "effective_rx_cov_diag",
    "mse_objective",
    "mse_gradient",
    "mse_fixed_analog",
    "mse_fixed_analog_gradient",
    "project_power",
    "transmit_power",
    "wf_precoder",
]

#: Row-norm floor used inside the optimizer so K2 stays finite.
ROW_NORM_FLOOR = 1e-12


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass(frozen=True)
class SystemDimensions:
    """
    Size and power parameters of the downlink.

    Parameters
    ----------
    n_antennas : int
        Base-station antennas ``N``.
    n_users : int
        Single-antenna users ``M``.
    sigma_s2 : float
        Symbol variance; 2 for the unscaled {+-1 +- 1j} QPSK alphabet.
    etx : float
        Transmit power budget (linear).
    noise_var : float
        Per-user noise variance; the noise covariance is ``noise_var * I``.
    """

    n_antennas: int
    n_users: int
    sigma_s2: float = 2.0
    etx: float = 10.0
    noise_var: float = 1.0

    def __post_init__(self):
        if self.n_users < 1:
            raise ValueError(f"need at least one user, got M={self.n_users}")
        if self.n_users > self.n_antennas:
            raise ValueError(f"M > N ({self.n_users} > {self.n_antennas})")
        if not self.sigma_s2 > 0:
            raise ValueError(f"sigma_s2 must be positive, got {self.sigma_s2}")
        if not self.etx > 0:
            raise ValueError(f"etx must be positive, got {self.etx}")
        if not self.noise_var > 0:
            raise ValueError(f"noise_var must be positive, got {self.noise_var}")

    @property
    def sigma_s(self):
        return float(np.sqrt(self.sigma_s2))

    def with_etx_db(self, etx_db):
        return replace(self, etx=float(db_to_linear(etx_db)))


@dataclass(frozen=True)
class MseEvaluation:
    """Objective value for one digital precoder plus the normalizers it used."""

    mse: float
    k1: np.ndarray
    k2: np.ndarray
    rx_cov_diag: np.ndarray
    hp: np.ndarray = field(repr=False)
    c: float = QUANT_DISTORTION


def _row_norms(P):
    return np.sqrt(np.sum(P.real**2 + P.imag**2, axis=1))


def k2_of(P):
    """
    Diagonal of ``K2 = diag(P P^H)^(-1/2)``.

    Raises
    ------
    DegeneratePrecoderError
        If a row of `P` is zero.
    """
    norms = _row_norms(np.asarray(P))
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise DegeneratePrecoderError(f"precoder rows {zero.tolist()} are zero")
    return 1.0 / norms


def analog_from_digital(P):
    """Analog precoder ``d_i = ||row i of P||`` undoing the quantizer's row normalization."""
    return _row_norms(np.asarray(P))


def equal_power_analog(dims):
    """Equal-power analog stage ``alpha * 1`` with ``2 N alpha^2 = Etx``."""
    alpha = np.sqrt(dims.etx / (2 * dims.n_antennas))
    return np.full(dims.n_antennas, alpha)


def _rx_cov_diag(H, HP, P, dims, distortion):
    signal = np.sum(HP.real**2 + HP.imag**2, axis=1)
    row_power = np.sum(P.real**2 + P.imag**2, axis=1)
    H2 = H.real**2 + H.imag**2
    return dims.noise_var + (4 / np.pi) * (signal + distortion * (H2 @ row_power))


def effective_rx_cov_diag(H, P, dims, *, distortion=QUANT_DISTORTION):
    """
    Diagonal of the received covariance ``C_x`` with ``D = diag(P P^H)^(1/2)``.

    Parameters
    ----------
    H : (M, N) complex array
    P : (N, M) complex array
    dims : SystemDimensions
    distortion : float, optional
        Weight of the quantizer-distortion term; ``pi/2 - 1`` for the 1-bit
        model. Exposed for analysis only.

    Returns
    -------
    (M,) real numpy.ndarray
    """
    H = np.asarray(H, dtype=complex)
    P = np.asarray(P, dtype=complex)
    return _rx_cov_diag(H, H @ P, P, dims, distortion)


def mse_objective(H, P, dims, *, distortion=QUANT_DISTORTION, row_floor=None):
    """
    Closed-form MSE of the two-stage precoder with ``D = diag(P P^H)^(1/2)``.

    Parameters
    ----------
    H : (M, N) complex array
    P : (N, M) complex array
    dims : SystemDimensions
    distortion : float, optional
        Quantizer-distortion weight (``pi/2 - 1``).
    row_floor : float, optional
        If given, row norms below it are floored when forming ``K2`` instead of
        raising. The objective value itself does not depend on ``K2``.

    Returns
    -------
    MseEvaluation

    Raises
    ------
    DegeneratePrecoderError
        If `P` has a zero row and `row_floor` is None.
    """
    H = np.asarray(H, dtype=complex)
    P = np.asarray(P, dtype=complex)
    if row_floor is None:
        k2 = k2_of(P)
    else:
        k2 = 1.0 / np.maximum(_row_norms(P), row_floor)
    HP = H @ P
    rx = _rx_cov_diag(H, HP, P, dims, distortion)
    k1 = 1.0 / np.sqrt(rx)
    M = dims.n_users
    gain = np.sum(k1 * np.diagonal(HP).real)
    mse = dims.sigma_s2 * M + 2 * M - (8 * dims.sigma_s / np.pi) * gain
    return MseEvaluation(float(mse), k1, k2, rx, HP, distortion)


def mse_gradient(H, P, dims, *, evaluation=None, distortion=QUANT_DISTORTION):
    """
    Wirtinger derivative ``dMSE/dP`` of `mse_objective`.

    Term-by-term transcription of the closed-form derivative::

        -(4 sigma_s/pi) [ H^T K1
                          - (2/pi) H^T K1^3 diag(H* P*) H* P*
                          - (2c/pi) diag(H^T diag(H* P* K1^3) H*) P*
                          - (2/pi) H^T K1^3 diag(P^T H^T) H* P*
                          - (2c/pi) diag(H^T diag(K1^3 P^T H^T) H*) P* ]

    Parameters
    ----------
    evaluation : MseEvaluation, optional
        Cached evaluation at the same ``(H, P)``; recomputed when omitted.

    Returns
    -------
    (N, M) complex numpy.ndarray
    """
    H = np.asarray(H, dtype=complex)
    P = np.asarray(P, dtype=complex)
    if evaluation is None:
        evaluation = mse_objective(H, P, dims, distortion=distortion)
    c = evaluation.c
    k1 = evaluation.k1
    k1_3 = k1**3
    HP = evaluation.hp
    HP_conj = HP.conj()
    P_conj = P.conj()
    HT = H.T
    H2T = HT.real**2 + HT.imag**2  # diag(H^T diag(v) H*) = |H|^T v
    dg = np.diagonal(HP)

    term1 = HT * k1
    term2 = (HT * (k1_3 * dg.conj())) @ HP_conj
    term3 = (H2T @ (dg.conj() * k1_3))[:, None] * P_conj
    term4 = (HT * (k1_3 * dg)) @ HP_conj
    term5 = (H2T @ (k1_3 * dg))[:, None] * P_conj
    bracket = term1 - (2 / np.pi) * term2 - (2 * c / np.pi) * term3 \
        - (2 / np.pi) * term4 - (2 * c / np.pi) * term5
    return -(4 / np.pi) * dims.sigma_s * bracket


def mse_fixed_analog(H, P, d, dims, *, row_floor=None):
    """
    MSE for an arbitrary fixed analog stage ``D = diag(d)``.

    With ``P' = K2 P`` (rows of unit norm) the quantized transmit covariance is
    ``(4/pi)(P' P'^H + c I)``, so the objective equals `mse_objective`
    evaluated at the effective channel ``H diag(d)`` and precoder ``P'``.
    Passing ``d = analog_from_digital(P)`` reproduces `mse_objective`.

    Returns
    -------
    MseEvaluation
        ``k2`` refers to `P`, ``hp`` to ``H diag(d) P'``.
    """
    H = np.asarray(H, dtype=complex)
    P = np.asarray(P, dtype=complex)
    d = np.asarray(d, dtype=float)
    if row_floor is None:
        k2 = k2_of(P)
    else:
        k2 = 1.0 / np.maximum(_row_norms(P), row_floor)
    ev = mse_objective(H * d[None, :], k2[:, None] * P, dims, row_floor=row_floor)
    return replace(ev, k2=k2)


def mse_fixed_analog_gradient(H, P, d, dims, *, evaluation=None, row_floor=None):
    """
    Wirtinger derivative ``dMSE/dP`` of `mse_fixed_analog`.

    Chain rule through the row normalization ``P' = K2 P``: per row the
    conjugate gradient with respect to ``P'`` is projected onto the tangent
    of the unit sphere and divided by the row norm.
    """
    H = np.asarray(H, dtype=complex)
    P = np.asarray(P, dtype=complex)
    d = np.asarray(d, dtype=float)
    if evaluation is None:
        evaluation = mse_fixed_analog(H, P, d, dims, row_floor=row_floor)
    k2 = evaluation.k2
    Pn = k2[:, None] * P
    Hd = H * d[None, :]
    g_conj = mse_gradient(Hd, Pn, dims, evaluation=evaluation).conj()
    radial = np.sum((Pn.conj() * g_conj).real, axis=1)
    g_conj_p = (g_conj - radial[:, None] * Pn) * k2[:, None]
    return g_conj_p.conj()


def transmit_power(P):
    """Return ``tr(P P^H)``."""
    P = np.asarray(P)
    return float(np.sum(P.real**2 + P.imag**2))


def project_power(P, dims):
    """
    Scale `P` onto the ball ``tr(P P^H) <= Etx/2`` if it lies outside.

    Feasible inputs are returned unchanged (same object).
    """
    P = np.asarray(P, dtype=complex)
    power = transmit_power(P)
    budget = 0.5 * dims.etx
    if power > budget:
        return P * np.sqrt(budget / power)
    return P


def wf_precoder(H, dims, *, regularization=None):
    """
    Transmit Wiener filter ``beta (H^H H + xi I)^(-1) H^H``.

    Parameters
    ----------
    H : (M, N) complex array
    dims : SystemDimensions
    regularization : float, optional
        ``xi``; defaults to ``tr(C_eta) / Etx = M noise_var / Etx``.

    Returns
    -------
    (N, M) complex numpy.ndarray
        Scaled so that the unquantized transmit power
        ``sigma_s^2 tr(P P^H)`` equals ``Etx``.
    """
    H = np.asarray(H, dtype=complex)
    M = H.shape[0]
    xi = M * dims.noise_var / dims.etx if regularization is None else regularization
    # (H^H H + xi I)^-1 H^H == H^H (H H^H + xi I)^-1, cheaper for M < N
    gram = H @ H.conj().T + xi * np.eye(M)
    P = np.linalg.solve(gram.T, H.conj()).T
    beta = np.sqrt(dims.etx / (dims.sigma_s2 * transmit_power(P)))
    return beta * P
