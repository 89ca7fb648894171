"""
Command-line front end.

Examples
--------
Full BER study with the default parameters (N=20, M=4, 200 channels,
1000 symbol vectors per channel)::

    onebit-mimo --experiment ber --etx 0:2:20 --out ber.csv

Analog-stage sensitivity at 10 dB with 10% gain error::

    onebit-mimo --experiment sensitivity --etx 10 --perturb-level 0.1

Settings can also come from a flat JSON file whose keys are the long flag
names (``{"antennas": 32, "etx": "0:5:20"}``); flags override the file.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .errors import UnknownSchemeError
from .optimizer import GpConfig
from .precoding import SystemDimensions
from .simulation import (
    RESERVED_SCHEMES,
    SCHEMES,
    PerturbationSpec,
    ber_experiment,
    d_distribution_experiment,
    gp_trace,
    sensitivity_experiment,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_etx",
    "parse_config",
    "run_experiment",
    "run_and_emit",
    "read_result",
    "main",
]

log = logging.getLogger(__name__)

EXPERIMENTS = ("ber", "sensitivity", "d-distribution", "gp-trace")
FORMATS = ("csv", "json")
DEFAULT_ETX_SWEEP = tuple(float(x) for x in range(0, 21, 2))
DEFAULT_ETX_SINGLE = (10.0,)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

COLUMNS = {
    "ber": ("scheme", "etx_db", "ber", "bits", "errors", "stderr"),
    "sensitivity": ("scheme", "etx_db", "ber", "bits", "errors", "stderr"),
    "d-distribution": ("bin_left_db", "bin_right_db", "count"),
    "gp-trace": ("iteration", "mse"),
}


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "ber"
    antennas: int = 20
    users: int = 4
    sigma_s2: float = 2.0
    etx: tuple = None
    schemes: tuple = tuple(SCHEMES)
    channels: int = 200
    symbols: int = 1000
    mu: float = 0.05
    epsilon: float = 1e-6
    max_iters: int = 10_000
    reoptimize_equal_power: bool = False
    seed: int = 0
    perturb_level: float = 0.1
    perturb_model: str = "uniform"
    perturb_seed: int = None
    bin_width: float = 1.0
    out: str = None
    format: str = "csv"
    workers: int = field(default=1, compare=False)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; "
                              f"choose from {', '.join(EXPERIMENTS)}")
        if self.format not in FORMATS:
            raise ConfigError(f"unknown format {self.format!r}; choose csv or json")
        for name in ("antennas", "users", "channels", "symbols", "max_iters", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name.replace('_', '-')} must be >= 1, "
                                  f"got {getattr(self, name)}")
        if self.users > self.antennas:
            raise ConfigError(f"M > N: {self.users} users exceed {self.antennas} antennas")
        for name in ("sigma_s2", "mu", "epsilon", "bin_width"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name.replace('_', '-')} must be positive")
        if self.perturb_level < 0:
            raise ConfigError("perturb-level must be >= 0")
        if self.perturb_model not in ("uniform", "gaussian"):
            raise ConfigError(f"unknown perturbation model {self.perturb_model!r}")
        for name in self.schemes:
            if name in RESERVED_SCHEMES:
                raise ConfigError(f"scheme {name!r} is reserved but not implemented")
            if name not in SCHEMES:
                raise ConfigError(f"unknown scheme {name!r}; "
                                  f"choose from {', '.join(SCHEMES)}")
        if not self.schemes:
            raise ConfigError("no schemes requested")
        if self.etx is not None:
            if not self.etx:
                raise ConfigError("empty Etx grid")
            if any(b <= a for a, b in zip(self.etx, self.etx[1:])):
                raise ConfigError(f"Etx grid must be strictly increasing, got {self.etx}")
            if self.experiment in ("d-distribution", "gp-trace") and len(self.etx) != 1:
                raise ConfigError(f"{self.experiment} takes a single Etx value")

    @property
    def etx_grid(self):
        if self.etx is not None:
            return self.etx
        if self.experiment in ("ber", "sensitivity"):
            return DEFAULT_ETX_SWEEP
        return DEFAULT_ETX_SINGLE

    @property
    def dims(self):
        return SystemDimensions(self.antennas, self.users, self.sigma_s2,
                                etx=float(10 ** (self.etx_grid[0] / 10)))

    @property
    def gp(self):
        return GpConfig(step=self.mu, tolerance=self.epsilon, max_iterations=self.max_iters,
                        reoptimize_equal_power=self.reoptimize_equal_power)

    @property
    def output_path(self):
        return self.out if self.out is not None else f"{self.experiment}.{self.format}"

    def to_mapping(self):
        """Flat key-value form with flag-style keys; omits output and parallelism settings."""
        data = asdict(self)
        for key in ("out", "workers"):
            data.pop(key)
        data["etx"] = list(self.etx_grid)
        data["schemes"] = list(self.schemes)
        return {k.replace("_", "-"): v for k, v in data.items()}

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, value in mapping.items():
            name = key.replace("-", "_")
            if name not in known:
                raise ConfigError(f"unknown configuration key {key!r}")
            kwargs[name] = _coerce(name, value)
        return cls(**kwargs)


def parse_etx(text):
    """
    Parse an Etx grid in dB.

    Accepts ``start:step:stop`` (inclusive), a comma-separated list, or a
    single number.
    """
    text = str(text).strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                raise ValueError
            start, step, stop = parts
            if step <= 0 or stop < start:
                raise ConfigError(f"bad Etx range {text!r}: need step > 0 and stop >= start")
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return tuple(round(start + k * step, 10) for k in range(n))
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed Etx grid {text!r}; "
                          "use start:step:stop, a list like 6,10,14, or a number") from None


def _parse_schemes(value):
    if isinstance(value, str):
        value = [v.strip() for v in value.split(",") if v.strip()]
    return tuple(value)


_INT_KEYS = {"antennas", "users", "channels", "symbols", "max_iters", "seed", "workers"}
_FLOAT_KEYS = {"sigma_s2", "mu", "epsilon", "perturb_level", "bin_width"}


def _coerce(name, value):
    if value is None:
        return None
    try:
        if name == "etx":
            if isinstance(value, (list, tuple)):
                return tuple(float(v) for v in value)
            return parse_etx(value)
        if name == "schemes":
            return _parse_schemes(value)
        if name in _INT_KEYS or name == "perturb_seed":
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise ValueError
            return int(float(value))
        if name in _FLOAT_KEYS:
            return float(value)
        if name == "reoptimize_equal_power":
            if not isinstance(value, bool):
                raise ValueError
            return value
    except (TypeError, ValueError):
        raise ConfigError(f"malformed value for {name.replace('_', '-')}: {value!r}") from None
    return value


def _int_arg(text):
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed integer {text!r}") from None


def _float_arg(text):
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed number {text!r}") from None


def _etx_arg(text):
    try:
        return parse_etx(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser():
    p = argparse.ArgumentParser(
        prog="onebit-mimo",
        description="Monte Carlo experiments for 1-bit quantized massive MIMO precoding.",
        argument_default=argparse.SUPPRESS,
    )
    p.add_argument("--config", help="flat JSON file with default settings")
    p.add_argument("--experiment", choices=EXPERIMENTS)
    p.add_argument("--antennas", type=_int_arg, help="base-station antennas N (20)")
    p.add_argument("--users", type=_int_arg, help="single-antenna users M (4)")
    p.add_argument("--sigma-s2", type=_float_arg, help="symbol variance (2)")
    p.add_argument("--etx", type=_etx_arg,
                   help="transmit power grid in dB: start:step:stop or a list "
                        "(ber/sensitivity: 0:2:20, otherwise 10); write --etx=-10:2:0 "
                        "for negative starts")
    p.add_argument("--schemes", type=_parse_schemes,
                   help=f"comma-separated subset of {','.join(SCHEMES)}")
    p.add_argument("--channels", type=_int_arg, help="channel realizations (200)")
    p.add_argument("--symbols", type=_int_arg, help="symbol vectors per realization (1000)")
    p.add_argument("--mu", type=_float_arg, help="gradient projection step (0.05)")
    p.add_argument("--epsilon", type=_float_arg, help="MSE change tolerance (1e-6)")
    p.add_argument("--max-iters", type=_int_arg, help="iteration cap (10000)")
    p.add_argument("--reoptimize-equal-power", action="store_true",
                   help="optimize P under D = alpha*I for the qpgp-equal-power scheme")
    p.add_argument("--seed", type=_int_arg, help="master seed (0)")
    p.add_argument("--perturb-level", type=_float_arg, help="relative analog gain error (0.1)")
    p.add_argument("--perturb-model", choices=("uniform", "gaussian"))
    p.add_argument("--perturb-seed", type=_int_arg, help="seed of the gain errors (master seed)")
    p.add_argument("--bin-width", type=_float_arg, help="histogram bin width in dB (1)")
    p.add_argument("--out", help="output file, '-' for stdout (<experiment>.<format>)")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--workers", type=_int_arg, help="worker processes (1)")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def parse_config(argv=None):
    """
    Build an `ExperimentConfig` from defaults, an optional JSON file and flags.

    Argument errors exit through argparse (status 2); invalid combinations
    raise `ConfigError`.
    """
    args = vars(build_parser().parse_args(argv))
    args.pop("verbose", None)
    merged = {}
    path = args.pop("config", None)
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a flat JSON object")
        merged.update({k.replace("-", "_"): v for k, v in data.items()})
    merged.update(args)
    return ExperimentConfig.from_mapping(merged)


def run_experiment(cfg):
    """Run the configured experiment; returns ``(rows, summary)``."""
    dims = cfg.dims
    gp = cfg.gp
    if cfg.experiment == "ber":
        curves = ber_experiment(dims, cfg.schemes, cfg.etx_grid, cfg.channels, cfg.symbols,
                                cfg.seed, gp=gp, workers=cfg.workers)
        return _curve_rows(curves), {}
    if cfg.experiment == "sensitivity":
        seed = cfg.seed if cfg.perturb_seed is None else cfg.perturb_seed
        spec = PerturbationSpec(cfg.perturb_level, cfg.perturb_model, seed)
        curves = sensitivity_experiment(dims, spec, cfg.etx_grid, cfg.channels, cfg.symbols,
                                        cfg.seed, gp=gp, workers=cfg.workers)
        return _curve_rows(curves), {}
    if cfg.experiment == "d-distribution":
        dist = d_distribution_experiment(dims, cfg.channels, cfg.seed, gp=gp,
                                         bin_width=cfg.bin_width, workers=cfg.workers)
        rows = [(float(a), float(b), int(n))
                for a, b, n in zip(dist.bin_edges[:-1], dist.bin_edges[1:], dist.counts)]
        summary = {
            "coefficients": int(dist.coefficients_db.size),
            "max_deviation_db": dist.max_deviation_db,
            "fraction_within_6db": dist.fraction_within(6.0),
        }
        return rows, summary
    res = gp_trace(dims, cfg.seed, gp=gp)
    rows = [(i, float(m)) for i, m in enumerate(res.trajectory)]
    return rows, {"converged": res.converged, "iterations": res.iterations}


def _curve_rows(curves):
    rows = []
    for c in curves:
        for k in range(len(c.etx_db)):
            rows.append((c.scheme, float(c.etx_db[k]), float(c.ber[k]), int(c.bits[k]),
                         int(c.errors[k]), float(c.stderr[k])))
    return rows


def _metadata(cfg, summary):
    meta = {"program": "onebit-mimo", "version": __version__, "experiment": cfg.experiment,
            "seed": cfg.seed, "config": cfg.to_mapping()}
    if summary:
        meta["summary"] = summary
    return meta


def format_result(cfg, rows, summary):
    columns = COLUMNS[cfg.experiment]
    meta = _metadata(cfg, summary)
    if cfg.format == "json":
        doc = {"metadata": meta, "columns": list(columns),
               "rows": [dict(zip(columns, r)) for r in rows]}
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    buf.write("# metadata: " + json.dumps(meta) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def read_result(path):
    """
    Load a result file written by `run_and_emit`.

    Returns
    -------
    metadata : dict
    rows : list of dict
        Numeric fields are converted back to int/float.
    """
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return doc["metadata"], doc["rows"]
    lines = text.splitlines()
    meta = json.loads(lines[0].split(":", 1)[1])
    reader = csv.DictReader(lines[1:])
    return meta, [{k: _number(v) for k, v in row.items()} for row in reader]


def _number(text):
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def _check_writable(path):
    if path == "-":
        return
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise OSError(f"output directory {parent} does not exist")
    if os.path.isdir(path):
        raise OSError(f"output path {path} is a directory")
    target = path if os.path.exists(path) else parent
    if not os.access(target, os.W_OK):
        raise OSError(f"output path {path} is not writable")


def run_and_emit(cfg):
    """Run `cfg` and write its result file; returns the process exit status."""
    path = cfg.output_path
    try:
        _check_writable(path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        rows, summary = run_experiment(cfg)
    except (UnknownSchemeError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    text = format_result(cfg, rows, summary)
    if path == "-":
        sys.stdout.write(text)
        return EXIT_OK
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"error: cannot write {path}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    log.info("wrote %d rows to %s", len(rows), path)
    return EXIT_OK


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    verbose = "-v" in argv or "--verbose" in argv
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"onebit-mimo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run_and_emit(cfg)


if __name__ == "__main__":
    sys.exit(main())
