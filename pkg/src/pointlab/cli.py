"""Experiment runner: deterministic batch computations over model files.

Every experiment is a pure function of (model, numeric parameters, seed), so
two runs with the same config produce byte-identical artifacts.  Output files
carry a header with the tool version, a hash of the canonical config, and the
seed; files are written atomically (temp file in the target directory, then
rename), so an interrupted run never leaves a partial artifact behind.

Exit codes: 0 success, 2 config error (message names the offending field),
3 numerical-consistency failure (a diagnostic JSON is written next to the
requested output).
"""

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, dichotomy, lyapunov, model, sl2, spectra
from .errors import (ConfigError, ConsistencyError, DomainError,
                     EmptyProjectionError, NearEigenvalueError,
                     PrecisionError, UnsupportedModelError)

EXPERIMENTS = ("lyapunov", "dichotomy", "spectrum", "decay", "dynamics",
               "bands")

# fixed time ladder for the dynamics experiment (powers of ten)
DYNAMICS_TIMES = (0.0, 1.0, 10.0, 100.0, 1000.0, 10000.0)


@dataclass
class ExperimentConfig:
    experiment: str
    model: object               # path string or DisorderMeasure
    output: str
    emin: float = 0.5
    emax: float = 25.0
    points: int = 40
    box_cells: int = 60
    steps: int = 100000
    replicas: int = 8
    seed: int = 1234
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    fmt: str = "csv"


def _validate(config):
    if config.experiment not in EXPERIMENTS:
        raise ConfigError("experiment",
                          "must be one of %s" % ", ".join(EXPERIMENTS))
    if config.fmt not in ("csv", "json"):
        raise ConfigError("format", "must be csv or json")
    if not (math.isfinite(config.emin) and math.isfinite(config.emax)):
        raise ConfigError("emin/emax", "grid endpoints must be finite")
    if config.experiment in ("lyapunov", "bands"):
        if config.points < 2:
            raise ConfigError("points", "grid needs at least 2 points")
        if config.emin >= config.emax:
            raise ConfigError("emin", "must be below emax")
    if config.experiment in ("spectrum", "decay", "dynamics"):
        if config.box_cells < 2:
            raise ConfigError("cells", "spectral experiments need >= 2 cells")
        if config.emin >= config.emax:
            raise ConfigError("emin", "must be below emax")
    if config.experiment == "lyapunov":
        if config.steps < 1000:
            raise ConfigError("steps", "need at least 1000 steps")
        if config.replicas < 1:
            raise ConfigError("replicas", "need at least 1 replica")
    if config.threads < 1:
        raise ConfigError("threads", "need at least 1 worker")
    if not config.output:
        raise ConfigError("out", "output path is required")


def _load_measure(config):
    if isinstance(config.model, model.DisorderMeasure):
        return config.model
    if not isinstance(config.model, str) or not config.model:
        raise ConfigError("model", "give a model file path")
    try:
        return model.load_model(config.model)
    except FileNotFoundError:
        raise ConfigError("model", "file not found: %s" % config.model)
    except (DomainError, ValueError) as exc:
        raise ConfigError("model", "invalid model file: %s" % exc)


def _config_digest(config, measure):
    """Content hash of the canonical config (model by value, not by path)."""
    payload = {
        "experiment": config.experiment,
        "model": model.model_to_dict(measure),
        "emin": config.emin,
        "emax": config.emax,
        "points": config.points,
        "box_cells": config.box_cells,
        "steps": config.steps,
        "replicas": config.replicas,
        "seed": config.seed,
        "format": config.fmt,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _fmt(v):
    return "%.12g" % v


def _write_atomic(path, text):
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".lab-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header_meta, columns, rows):
    lines = [header_meta, ",".join(columns)]
    for row in rows:
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _meta_line(config, digest):
    return "# pointlab %s experiment=%s config=%s seed=%d" % (
        __version__, config.experiment, digest, config.seed)


def _meta_dict(config, digest):
    return {"tool": "pointlab", "version": __version__,
            "experiment": config.experiment, "config": digest,
            "seed": config.seed}


def _spectral_box(measure, config):
    cells = config.box_cells
    m = -(cells // 2)
    n = m + cells
    jmin = min(m + 1, 1)
    jmax = max(n, 0)
    r = model.sample_realization(measure, seed=config.seed, jmin=jmin,
                                 jmax=jmax)
    return spectra.FiniteBox(r, m, n, spectra.NEUMANN, spectra.NEUMANN)


def _run_lyapunov(measure, config, digest):
    grid = np.linspace(config.emin, config.emax, config.points)
    curve = lyapunov.lyapunov_curve(measure, grid, n=config.steps,
                                    replicas=config.replicas,
                                    seed=config.seed, workers=config.threads)
    rows = []
    for est, lbar in zip(curve.estimates, curve.continuum_values()):
        rows.append([_fmt(est.energy), _fmt(est.value), _fmt(est.stderr),
                     _fmt(lbar), "%d" % est.steps, "%d" % est.replicas])
    if config.fmt == "json":
        data = {"meta": _meta_dict(config, digest),
                "rows": [{"E": est.energy, "L": est.value,
                          "stderr": est.stderr, "Lbar": lbar,
                          "n": est.steps, "replicas": est.replicas}
                         for est, lbar in zip(curve.estimates,
                                              curve.continuum_values())]}
        return json.dumps(data, indent=1) + "\n"
    return _csv(_meta_line(config, digest),
                ["E", "L", "stderr", "Lbar", "n", "replicas"], rows)


def _run_dichotomy(measure, config, digest):
    verdict = dichotomy.classify(measure)
    data = {"meta": _meta_dict(config, digest)}
    data.update(verdict.to_dict())
    return json.dumps(data, indent=1) + "\n"


def _run_spectrum(measure, config, digest):
    box = _spectral_box(measure, config)
    if not box.connected:
        spec = spectra.separated_spectrum(box, config.emin, config.emax)
        roots = spec.union
    else:
        roots = spectra.eigenvalues(box, config.emin, config.emax)
    if config.fmt == "json":
        pairs = []
        if box.connected:
            for E in roots:
                pair = spectra.eigenfunction(box, E)
                pairs.append({"E": pair.energy,
                              "traces": pair.traces.tolist(),
                              "norm": pair.norm})
        data = {"meta": _meta_dict(config, digest), "eigenpairs": pairs,
                "energies": roots.tolist()}
        return json.dumps(data, indent=1) + "\n"
    rows = [["%d" % i, _fmt(E)] for i, E in enumerate(roots)]
    return _csv(_meta_line(config, digest), ["index", "E"], rows)


def _run_decay(measure, config, digest):
    box = _spectral_box(measure, config)
    pairs = spectra.eigenpairs(box, config.emin, config.emax, tol=1e-12)
    rows = []
    for pair in pairs:
        fit = spectra.decay_fit(pair)
        rows.append([_fmt(pair.energy), _fmt(fit.center), _fmt(fit.rate),
                     _fmt(fit.r_squared)])
    return _csv(_meta_line(config, digest), ["E", "zeta", "rate", "r2"], rows)


def _run_dynamics(measure, config, digest):
    box = _spectral_box(measure, config)
    moments = spectra.dynamical_moments(box, (config.emin, config.emax),
                                        p=2.0, K=(-1.0, 1.0),
                                        times=DYNAMICS_TIMES)
    rows = [[_fmt(t), _fmt(mval)]
            for t, mval in zip(DYNAMICS_TIMES, moments)]
    return _csv(_meta_line(config, digest), ["t", "moment"], rows)


def _run_bands(measure, config, digest):
    if len(measure.atoms) != 1:
        raise ConfigError("model", "bands needs a single-atom model")
    atom = measure.atoms[0]
    if isinstance(atom.condition, model.Separating):
        raise ConfigError("model", "bands needs a connecting atom")
    B = model.coupling_matrix(atom.condition)
    grid = np.linspace(config.emin, config.emax, config.points)
    rows = []
    for E in grid:
        tr = float(np.trace(B @ sl2.monodromy(E, atom.ell)))
        rows.append([_fmt(E), _fmt(tr),
                     "true" if abs(tr) <= 2.0 else "false"])
    return _csv(_meta_line(config, digest), ["E", "trace", "inBand"], rows)


_RUNNERS = {
    "lyapunov": _run_lyapunov,
    "dichotomy": _run_dichotomy,
    "spectrum": _run_spectrum,
    "decay": _run_decay,
    "dynamics": _run_dynamics,
    "bands": _run_bands,
}


def run(config):
    """Execute one experiment; returns the process exit code."""
    t0 = time.monotonic()
    try:
        _validate(config)
        measure = _load_measure(config)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    digest = _config_digest(config, measure)
    if config.experiment == "dichotomy" and config.fmt == "csv":
        config.fmt = "json"   # verdicts are structured, not tabular
    try:
        text = _RUNNERS[config.experiment](measure, config, digest)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except (ConsistencyError, PrecisionError, NearEigenvalueError,
            EmptyProjectionError, UnsupportedModelError, DomainError) as exc:
        diag = {"error": type(exc).__name__, "message": str(exc),
                "config": digest, "experiment": config.experiment,
                "seed": config.seed}
        diag_path = config.output + ".diag.json"
        _write_atomic(diag_path, json.dumps(diag, indent=1) + "\n")
        print("numerical error (%s): %s [diagnostic: %s]"
              % (type(exc).__name__, exc, diag_path), file=sys.stderr)
        return 3
    _write_atomic(config.output, text)
    wall = time.monotonic() - t0
    name = measure.name or "unnamed"
    print("%s model=%s wall=%.2fs out=%s"
          % (config.experiment, name, wall, config.output))
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="lab",
        description="deterministic experiments on random point-interaction "
                    "models")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--model", required=True, help="model JSON file")
        p.add_argument("--out", required=True, help="output artifact path")
        p.add_argument("--emin", type=float, default=0.5)
        p.add_argument("--emax", type=float, default=25.0)
        p.add_argument("--points", type=int, default=40)
        p.add_argument("--cells", type=int, default=60)
        p.add_argument("--steps", type=int, default=100000)
        p.add_argument("--replicas", type=int, default=8)
        p.add_argument("--seed", type=int, default=1234)
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        p.add_argument("--format", choices=("csv", "json"), default=None)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    seed = args.seed
    env_seed = os.environ.get("LAB_SEED")
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError:
            print("config error: seed: LAB_SEED must be an integer",
                  file=sys.stderr)
            return 2
    fmt = args.format
    if fmt is None:
        fmt = "json" if args.experiment == "dichotomy" else "csv"
    config = ExperimentConfig(
        experiment=args.experiment, model=args.model, output=args.out,
        emin=args.emin, emax=args.emax, points=args.points,
        box_cells=args.cells, steps=args.steps, replicas=args.replicas,
        seed=seed, threads=args.threads, fmt=fmt)
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
