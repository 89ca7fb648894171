"""
Monte Carlo simulation of the quantized downlink and the BER experiments.

Every channel realization ``r`` draws from its own random streams, derived
from ``SeedSequence(seed, spawn_key=(r, stream))``, so results do not depend
on how realizations are distributed over worker processes. Symbols and noise
of a realization are shared by all schemes and transmit powers (common random
numbers), which keeps scheme comparisons tight.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import UnknownSchemeError
from .optimizer import GpConfig, gradient_projection, qp_gp_equal_power
from .precoding import SystemDimensions, equal_power_analog, project_power, wf_precoder
from .quantization import quantize

__all__ = [
    "SCHEMES",
    "RESERVED_SCHEMES",
    "SymbolBlock",
    "BerCurve",
    "PerturbationSpec",
    "DDistribution",
    "draw_channel",
    "draw_symbols",
    "draw_noise",
    "qpsk_modulate",
    "qpsk_demodulate",
    "transmit_chain",
    "unquantized_chain",
    "count_bit_errors",
    "perturb_analog",
    "histogram_db",
    "ber_experiment",
    "sensitivity_experiment",
    "d_distribution_experiment",
    "gp_trace",
]

log = logging.getLogger(__name__)

#: Implemented schemes and their legend labels.
SCHEMES = {
    "wf-unquantized": "WF, no Quant.",
    "wf-equal-power": "WF, D=I",
    "qpgp-equal-power": "QP-GP, D=I",
    "qpgp": "QP-GP",
}

#: Names accepted by the configuration layer but not implemented.
RESERVED_SCHEMES = {"qwp": "QWP"}

PERTURBED = "qpgp-perturbed"
_LABELS = {**SCHEMES, **RESERVED_SCHEMES, PERTURBED: "QP-GP, perturbed D"}

_CHANNEL, _SYMBOLS, _NOISE, _PERTURB = range(4)


def _stream(seed, index, kind):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index, kind)))


def _crandn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def draw_channel(dims, seed):
    """I.i.d. CN(0, 1) channel of shape ``(M, N)``; `seed` is anything `default_rng` accepts."""
    rng = np.random.default_rng(seed)
    return _crandn(rng, (dims.n_users, dims.n_antennas))


@dataclass(frozen=True)
class SymbolBlock:
    bits: np.ndarray  # (M, n_symbols, 2), Gray-mapped
    symbols: np.ndarray  # (M, n_symbols)


def qpsk_modulate(bits, sigma_s2=2.0):
    """Gray QPSK: bit pair ``(b0, b1) -> a((1 - 2 b0) + j(1 - 2 b1))`` with ``2a^2 = sigma_s2``."""
    bits = np.asarray(bits)
    scale = np.sqrt(sigma_s2 / 2)
    return scale * ((1.0 - 2.0 * bits[..., 0]) + 1j * (1.0 - 2.0 * bits[..., 1]))


def qpsk_demodulate(y):
    """Minimum-distance QPSK decision; for this alphabet it is a sign test per component."""
    y = np.asarray(y)
    return np.stack([np.real(y) < 0, np.imag(y) < 0], axis=-1).astype(np.uint8)


def draw_symbols(dims, n_symbols, seed):
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(dims.n_users, n_symbols, 2), dtype=np.uint8)
    return SymbolBlock(bits, qpsk_modulate(bits, dims.sigma_s2))


def draw_noise(dims, n_symbols, seed):
    rng = np.random.default_rng(seed)
    return np.sqrt(dims.noise_var) * _crandn(rng, (dims.n_users, n_symbols))


def transmit_chain(s, P, d, H, noise):
    """
    Received decisions ``Q_r(H D Q_t(P s) + noise)``.

    Parameters
    ----------
    s : (M, n) complex array
        Symbol columns.
    P : (N, M) complex array
    d : (N,) real array
        Diagonal of the analog precoder.
    H : (M, N) complex array
    noise : (M, n) complex array
    """
    y_q = quantize(np.asarray(P) @ s)
    return quantize(np.asarray(H) @ (np.asarray(d)[:, None] * y_q) + noise)


def unquantized_chain(s, P, H, noise):
    """Linear chain without converters; returns ``H P s + noise`` before detection."""
    return np.asarray(H) @ (np.asarray(P) @ s) + noise


def count_bit_errors(bits, y):
    return int(np.count_nonzero(qpsk_demodulate(y) != bits))


def perturb_analog(d, level, u):
    """Hardware gain error ``d_i (1 + level u_i)``; no power re-projection."""
    return np.asarray(d) * (1.0 + level * np.asarray(u))


@dataclass(frozen=True)
class PerturbationSpec:
    """
    Multiplicative error on the analog stage.

    ``model='uniform'`` draws ``u ~ U[-1, 1]``, ``model='gaussian'`` draws
    ``u ~ N(0, 1)``; each coefficient becomes ``d_i (1 + level u_i)``.
    """

    level: float = 0.1
    model: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        if not self.level >= 0:
            raise ValueError(f"perturbation level must be >= 0, got {self.level}")
        if self.model not in ("uniform", "gaussian"):
            raise ValueError(f"unknown perturbation model {self.model!r}")

    def draw(self, n, index):
        rng = _stream(self.seed, index, _PERTURB)
        if self.model == "uniform":
            return rng.uniform(-1.0, 1.0, size=n)
        return rng.standard_normal(n)


@dataclass
class BerCurve:
    scheme: str
    etx_db: np.ndarray
    errors: np.ndarray
    bits: np.ndarray
    seed: int

    @property
    def label(self):
        return _LABELS.get(self.scheme, self.scheme)

    @property
    def ber(self):
        return self.errors / self.bits

    @property
    def stderr(self):
        p = self.ber
        return np.sqrt(p * (1 - p) / self.bits)


def check_schemes(schemes):
    schemes = tuple(schemes)
    if not schemes:
        raise UnknownSchemeError("no schemes requested")
    for name in schemes:
        if name in RESERVED_SCHEMES:
            raise UnknownSchemeError(f"scheme {name!r} is reserved but not implemented")
        if name not in SCHEMES:
            raise UnknownSchemeError(
                f"unknown scheme {name!r}; choose from {', '.join(SCHEMES)}")
    return schemes


@dataclass(frozen=True)
class _Task:
    index: int
    dims: SystemDimensions
    etx_db: tuple
    schemes: tuple
    n_symbols: int
    seed: int
    noise_seed: int
    gp: GpConfig
    perturbation: Optional[PerturbationSpec] = None


def _ber_realization(task):
    """Bit-error counts ``(n_schemes, n_etx)`` for one channel realization."""
    H = draw_channel(task.dims, _stream(task.seed, task.index, _CHANNEL))
    block = draw_symbols(task.dims, task.n_symbols, _stream(task.noise_seed, task.index, _SYMBOLS))
    noise = draw_noise(task.dims, task.n_symbols, _stream(task.noise_seed, task.index, _NOISE))
    u = None
    if task.perturbation is not None:
        u = task.perturbation.draw(task.dims.n_antennas, task.index)

    s, bits = block.symbols, block.bits
    errors = np.zeros((len(task.schemes), len(task.etx_db)), dtype=np.int64)
    for j, etx_db in enumerate(task.etx_db):
        dims = task.dims.with_etx_db(etx_db)
        gp = None
        wf = None
        for i, scheme in enumerate(task.schemes):
            if scheme in ("wf-unquantized", "wf-equal-power") and wf is None:
                wf = wf_precoder(H, dims)
            if scheme in ("qpgp", PERTURBED) or (
                    scheme == "qpgp-equal-power" and not task.gp.reoptimize_equal_power):
                if gp is None:
                    gp = gradient_projection(H, dims, task.gp)

            if scheme == "wf-unquantized":
                y = unquantized_chain(s, wf, H, noise)
            elif scheme == "wf-equal-power":
                y = transmit_chain(s, project_power(wf, dims), equal_power_analog(dims), H, noise)
            elif scheme == "qpgp-equal-power":
                res = qp_gp_equal_power(H, dims, task.gp) if task.gp.reoptimize_equal_power else gp
                y = transmit_chain(s, res.precoder, equal_power_analog(dims), H, noise)
            elif scheme == "qpgp":
                y = transmit_chain(s, gp.precoder, gp.analog, H, noise)
            elif scheme == PERTURBED:
                d = perturb_analog(gp.analog, task.perturbation.level, u)
                y = transmit_chain(s, gp.precoder, d, H, noise)
            else:
                raise UnknownSchemeError(scheme)
            errors[i, j] = count_bit_errors(bits, y)
    return errors


def _run(fn, tasks, workers):
    if workers is None or workers <= 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


def _check_grid(etx_db):
    grid = tuple(float(x) for x in np.atleast_1d(etx_db))
    if not grid:
        raise ValueError("empty Etx grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"Etx grid must be strictly increasing, got {grid}")
    return grid


def _ber_counts(dims, schemes, etx_db, n_channels, n_symbols, seed, noise_seed,
                gp, perturbation, workers):
    if n_channels < 1 or n_symbols < 1:
        raise ValueError("n_channels and n_symbols must be >= 1")
    grid = _check_grid(etx_db)
    noise_seed = seed if noise_seed is None else noise_seed
    tasks = [_Task(r, dims, grid, schemes, n_symbols, seed, noise_seed, gp, perturbation)
             for r in range(n_channels)]
    log.info("simulating %d realizations x %d Etx points", n_channels, len(grid))
    total = np.zeros((len(schemes), len(grid)), dtype=np.int64)
    for counts in _run(_ber_realization, tasks, workers):
        total += counts
    bits = np.full(len(grid), 2 * dims.n_users * n_symbols * n_channels, dtype=np.int64)
    return [BerCurve(name, np.array(grid), total[i], bits.copy(), seed)
            for i, name in enumerate(schemes)]


def ber_experiment(dims: SystemDimensions, schemes: Sequence[str], etx_db, n_channels=200,
                   n_symbols=1000, seed=0, *, noise_seed=None, gp: GpConfig = GpConfig(),
                   workers=1):
    """
    Uncoded BER versus transmit power for each scheme.

    Parameters
    ----------
    dims : SystemDimensions
        ``etx`` is ignored; the grid `etx_db` sets the power.
    schemes : sequence of str
        Keys of `SCHEMES`.
    etx_db : sequence of float
        Strictly increasing transmit powers in dB.
    n_channels, n_symbols : int
        Channel realizations and symbol vectors per realization.
    seed : int
        Master seed for channels (and symbols/noise unless `noise_seed`).
    noise_seed : int, optional
        Separate master seed for symbols and noise.
    gp : GpConfig
    workers : int
        Worker processes; results are identical for any value.

    Returns
    -------
    list of BerCurve
        One per scheme, in the requested order.
    """
    schemes = check_schemes(schemes)
    return _ber_counts(dims, schemes, etx_db, n_channels, n_symbols, seed, noise_seed,
                       gp, None, workers)


def sensitivity_experiment(dims: SystemDimensions, perturbation: PerturbationSpec, etx_db,
                           n_channels=200, n_symbols=1000, seed=0, *,
                           gp: GpConfig = GpConfig(), workers=1):
    """
    QP-GP BER with the ideal analog stage and with a perturbed one.

    Both curves use the same channels, symbols and noise.

    Returns
    -------
    (BerCurve, BerCurve)
        Ideal and perturbed curves.
    """
    ideal, perturbed = _ber_counts(dims, ("qpgp", PERTURBED), etx_db, n_channels, n_symbols,
                                   seed, None, gp, perturbation, workers)
    return ideal, perturbed


@dataclass
class DDistribution:
    """Analog coefficients of QP-GP normalized by their mean, in dB (``20 log10``)."""

    coefficients_db: np.ndarray
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def max_deviation_db(self):
        return float(np.max(np.abs(self.coefficients_db)))

    def fraction_within(self, bound_db):
        return float(np.mean(np.abs(self.coefficients_db) <= bound_db))


def histogram_db(values_db, bin_width=1.0):
    """
    Histogram with bins of `bin_width` centred on multiples of it (0 dB is a centre).

    Returns
    -------
    edges, counts : numpy.ndarray
    """
    v = np.asarray(values_db, dtype=float)
    lo = np.floor(v.min() / bin_width + 0.5) - 0.5
    hi = np.ceil(v.max() / bin_width - 0.5) + 0.5
    n_bins = max(1, int(round(hi - lo)))
    edges = (lo + np.arange(n_bins + 1)) * bin_width
    counts, _ = np.histogram(v, bins=edges)
    return edges, counts


def _analog_realization(task):
    H = draw_channel(task.dims, _stream(task.seed, task.index, _CHANNEL))
    return gradient_projection(H, task.dims, task.gp).analog


def d_distribution_experiment(dims: SystemDimensions, n_channels=200, seed=0, *,
                              gp: GpConfig = GpConfig(), bin_width=1.0, workers=1):
    """
    Spread of the QP-GP analog coefficients over antennas and channels at ``dims.etx``.

    Channels match those of `ber_experiment` with the same seed.
    """
    if n_channels < 1:
        raise ValueError("n_channels must be >= 1")
    tasks = [_Task(r, dims, (), (), 0, seed, seed, gp) for r in range(n_channels)]
    d = np.concatenate(_run(_analog_realization, tasks, workers))
    normalized_db = 20 * np.log10(d / d.mean())
    edges, counts = histogram_db(normalized_db, bin_width)
    return DDistribution(normalized_db, edges, counts)


def gp_trace(dims: SystemDimensions, seed=0, *, gp: GpConfig = GpConfig()):
    """Run QP-GP on realization 0 of `seed` and keep the MSE trajectory."""
    H = draw_channel(dims, _stream(seed, 0, _CHANNEL))
    return gradient_projection(H, dims, replace(gp, record_trajectory=True))
