"""Gradient projection for the quantized MMSE precoder (QP-GP)."""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DivergedError
from .precoding import (
    ROW_NORM_FLOOR,
    SystemDimensions,
    analog_from_digital,
    equal_power_analog,
    mse_fixed_analog,
    mse_fixed_analog_gradient,
    mse_gradient,
    mse_objective,
    project_power,
)

__all__ = ["GpConfig", "GpResult", "gradient_projection", "qp_gp_equal_power"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GpConfig:
    """
    Parameters of the gradient projection.

    Attributes
    ----------
    step : float
        Absolute step size ``mu``.
    tolerance : float
        Stop once ``|MSE_(n+1) - MSE_n| <= tolerance``.
    max_iterations : int
        Hard cap on the number of updates.
    record_trajectory : bool
        Keep the MSE of every iterate, starting with the initial one.
    reoptimize_equal_power : bool
        For `qp_gp_equal_power` only: optimize ``P`` against the objective
        with ``D = alpha I`` instead of reusing the QP-GP digital precoder.
    """

    step: float = 0.05
    tolerance: float = 1e-6
    max_iterations: int = 10_000
    record_trajectory: bool = False
    reoptimize_equal_power: bool = False

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")


@dataclass
class GpResult:
    precoder: np.ndarray
    analog: np.ndarray
    final_mse: float
    initial_mse: float
    iterations: int
    converged: bool
    trajectory: Optional[list] = None


Callback = Callable[[int, np.ndarray, float], None]


def _descend(H, dims, cfg, P0, evaluate, gradient, callback):
    P = project_power(P0, dims)
    ev = evaluate(P)
    if not np.isfinite(ev.mse):
        raise DivergedError(0)
    initial = ev.mse
    trajectory = [ev.mse] if cfg.record_trajectory else None
    if callback is not None:
        callback(0, P, ev.mse)

    converged = False
    n = 0
    while n < cfg.max_iterations:
        grad = gradient(P, ev)
        if not np.all(np.isfinite(grad)):
            raise DivergedError(n)
        P = project_power(P - cfg.step * grad.conj(), dims)
        n += 1
        new = evaluate(P)
        if not np.isfinite(new.mse):
            raise DivergedError(n)
        if trajectory is not None:
            trajectory.append(new.mse)
        if callback is not None:
            callback(n, P, new.mse)
        change = abs(new.mse - ev.mse)
        ev = new
        if change <= cfg.tolerance:
            converged = True
            break

    if not converged:
        log.warning("gradient projection hit max_iterations=%d", cfg.max_iterations)
    return P, ev, initial, n, converged, trajectory


def _initial_precoder(H, initial):
    if initial is None:
        return H.conj().T.copy()
    P0 = np.asarray(initial, dtype=complex)
    if P0.shape != (H.shape[1], H.shape[0]):
        raise ValueError(f"initial precoder must have shape {(H.shape[1], H.shape[0])}")
    return P0


def gradient_projection(H, dims: SystemDimensions, cfg: GpConfig = GpConfig(),
                        initial=None, callback: Optional[Callback] = None) -> GpResult:
    """
    Minimize the quantized MSE over ``P`` subject to ``tr(P P^H) <= Etx/2``.

    Starts from ``P_0 = H^H`` (or `initial`), scaled onto the power ball if
    needed, then iterates ``P <- project(P - mu conj(dMSE/dP))`` until the MSE
    changes by at most ``cfg.tolerance``. The analog stage of the result is
    ``D = diag(P P^H)^(1/2)``.

    Parameters
    ----------
    H : (M, N) complex array
        Channel matrix; must not be all zeros.
    dims : SystemDimensions
    cfg : GpConfig
    initial : (N, M) complex array, optional
        Alternative starting point.
    callback : callable, optional
        Called as ``callback(n, P_n, mse_n)`` for every iterate including
        ``n = 0``.

    Raises
    ------
    DivergedError
        If the objective or its gradient becomes non-finite.
    """
    H = np.asarray(H, dtype=complex)
    if not np.any(H):
        raise ValueError("channel matrix is all zeros")

    def evaluate(P):
        return mse_objective(H, P, dims, row_floor=ROW_NORM_FLOOR)

    def gradient(P, ev):
        return mse_gradient(H, P, dims, evaluation=ev)

    P, ev, initial_mse, n, converged, trajectory = _descend(
        H, dims, cfg, _initial_precoder(H, initial), evaluate, gradient, callback)
    return GpResult(P, analog_from_digital(P), ev.mse, initial_mse, n, converged, trajectory)


def qp_gp_equal_power(H, dims: SystemDimensions, cfg: GpConfig = GpConfig(),
                      initial=None, callback: Optional[Callback] = None) -> GpResult:
    """
    QP-GP with equal power allocation ``D = alpha I``, ``2 N alpha^2 = Etx``.

    By default the QP-GP digital precoder is reused unchanged and only the
    analog stage is replaced. With ``cfg.reoptimize_equal_power`` the
    digital precoder is instead optimized against the MSE with ``D = alpha I``
    held fixed; ``final_mse`` then refers to that objective.
    """
    alpha_d = equal_power_analog(dims)
    if not cfg.reoptimize_equal_power:
        res = gradient_projection(H, dims, cfg, initial, callback)
        res.analog = alpha_d
        return res

    H = np.asarray(H, dtype=complex)
    if not np.any(H):
        raise ValueError("channel matrix is all zeros")

    def evaluate(P):
        return mse_fixed_analog(H, P, alpha_d, dims, row_floor=ROW_NORM_FLOOR)

    def gradient(P, ev):
        return mse_fixed_analog_gradient(H, P, alpha_d, dims, evaluation=ev)

    P, ev, initial_mse, n, converged, trajectory = _descend(
        H, dims, cfg, _initial_precoder(H, initial), evaluate, gradient, callback)
    return GpResult(P, alpha_d, ev.mse, initial_mse, n, converged, trajectory)
