"""Command-line front end: ``simulate``, ``validate`` and ``spectra``.

Exit codes: 0 success, 1 validation failure, 2 configuration or model error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path

import numpy as np

from .density import atoms_reduced
from .dynamics import (
    DEFAULT_ODE_TOLERANCE,
    DEFAULT_TAIL_EPSILON,
    SimulationConfig,
    WaveFunction,
    closed_form_grid,
    default_grid,
    evolve,
    initial_amplitudes,
    truncation_cutoff,
)
from .errors import ModelError
from .nonlinearity import DEFAULT_LAMB_DICKE, NonlinearitySpec, coupling_strengths
from .observables import CSV_HEADER, observable_series
from .spectral import spectral_coefficients, x3_printed
from . import validation

log = logging.getLogger("xicavity")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_IO = 3

OUTPUT_DIR_ENV = "XICAVITY_OUTPUT_DIR"


class ConfigError(Exception):
    pass


def fmt(x: float) -> str:
    """Fixed 12-significant-digit positional decimal."""
    return format(Decimal(f"{float(x):.11e}"), "f")


def output_path(path: str | os.PathLike) -> Path:
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


@dataclass
class RunManifest:
    config: SimulationConfig
    solver: str = "eigen"
    outputs: dict[str, Path] = field(default_factory=dict)
    errata_mode: str = "off"
    dump_rho: float | None = None

    def __post_init__(self):
        if self.solver not in ("eigen", "ode"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.solver == "eigen" and not self.config.resonant:
            raise ConfigError("solver=eigen requires delta1 = delta2 = 0; use --solver ode for detuned runs")
        if self.errata_mode not in ("off", "report"):
            raise ConfigError(f"unknown errata mode {self.errata_mode!r}")
        if self.errata_mode == "report" and not self.config.resonant:
            raise ConfigError("the errata report compares resonant closed forms; it needs delta1 = delta2 = 0")


# --- writers -----------------------------------------------------------------


def write_observables(path: Path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow([fmt(x) for x in r.as_row()])


def write_amplitudes(path: Path, wfs: list[WaveFunction]) -> None:
    header = ["t", "n"] + [f"{part}_c{i}" for i in range(1, 7) for part in ("re", "im")]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for wf in wfs:
            for n in range(wf.c.shape[1]):
                row = [fmt(wf.t), str(n)]
                for amp in wf.c[:, n]:
                    row += [fmt(amp.real), fmt(amp.imag)]
                w.writerow(row)


def write_matrix(path: Path, m: np.ndarray) -> None:
    """One matrix row per CSV line, real and imaginary parts interleaved."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in m:
            w.writerow([fmt(v) for z in row for v in (z.real, z.imag)])


def errata_rows(wf0: WaveFunction, spec: NonlinearitySpec, reference: list[WaveFunction], times):
    """Per time: max |printed - reference| and max |corrected - reference| for each C_i."""
    printed = closed_form_grid(wf0, spec, times, "printed")
    corrected = closed_form_grid(wf0, spec, times, "corrected")
    for ref, p, c in zip(reference, printed, corrected):
        yield (ref.t, *np.max(np.abs(p.c - ref.c), axis=1), *np.max(np.abs(c.c - ref.c), axis=1))


def write_errata(path: Path, rows) -> None:
    header = ["t"] + [f"printed_dC{i}" for i in range(1, 7)] + [f"corrected_dC{i}" for i in range(1, 7)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def spectra_rows(spec: NonlinearitySpec, n_range):
    for n in n_range:
        block = coupling_strengths(spec, n)
        sc = spectral_coefficients(block)
        yield (n, *block.v, sc.x1, sc.x2, sc.x3, sc.x4, sc.x5, sc.eta, sc.beta1, sc.beta2, x3_printed(block))


SPECTRA_HEADER = ("n", "V1", "V2", "V3", "V4", "x1", "x2", "x3", "x4", "x5", "eta", "beta1", "beta2", "x3_printed")


def write_spectra(fh, rows) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SPECTRA_HEADER)
    for row in rows:
        w.writerow([str(row[0])] + [fmt(x) for x in row[1:]])


# --- commands ----------------------------------------------------------------


def run_simulation(manifest: RunManifest) -> int:
    cfg = manifest.config
    wfs = evolve(cfg, manifest.solver)
    records = observable_series(wfs)
    write_observables(manifest.outputs["observables"], records)
    log.info("wrote %d observable rows to %s", len(records), manifest.outputs["observables"])
    if "amplitudes" in manifest.outputs:
        write_amplitudes(manifest.outputs["amplitudes"], wfs)
    if manifest.dump_rho is not None:
        k = int(np.argmin(np.abs(cfg.t_grid - manifest.dump_rho)))
        write_matrix(manifest.outputs["rho"], atoms_reduced(wfs[k]))
        log.info("density matrix at gt=%g written to %s", cfg.t_grid[k], manifest.outputs["rho"])
    if manifest.errata_mode == "report":
        wf0 = initial_amplitudes(cfg.alpha, truncation_cutoff(cfg.alpha, cfg.tail_epsilon))
        write_errata(manifest.outputs["errata"], errata_rows(wf0, cfg.spec, wfs, cfg.t_grid))
    return EXIT_OK


def validate(suite: validation.Suite, stream=None) -> int:
    stream = stream or sys.stdout
    results = validation.run_all(suite)
    for r in results:
        print(r.line(), file=stream)
    failed = [r for r in results if r.hard and not r.passed]
    soft = [r for r in results if not r.hard and not r.passed]
    print(f"{len(results) - len(failed) - len(soft)} passed, {len(failed)} failed, {len(soft)} soft deviations",
          file=stream)
    return EXIT_VALIDATION if failed else EXIT_OK


# --- argument handling -------------------------------------------------------


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--f", dest="f", choices=["constant", "harmonious", "trapped-ion"], help="coupling nonlinearity")
    p.add_argument("--eta", type=float, help=f"Lamb-Dicke parameter for trapped-ion (default {DEFAULT_LAMB_DICKE})")
    p.add_argument("--alpha-sq", type=float, help="initial mean photon number |alpha|^2 (default 10)")
    p.add_argument("--t-max", type=float, help="final scaled time gt (default 25)")
    p.add_argument("--steps", type=int, help="number of time steps (default 1000)")
    p.add_argument("--tail-eps", type=float, help=f"Poisson tail tolerance (default {DEFAULT_TAIL_EPSILON:g})")
    p.add_argument("--ode-tol", type=float, help=f"ODE relative tolerance (default {DEFAULT_ODE_TOLERANCE:g})")
    p.add_argument("--config", help="JSON file with option values; command-line flags take precedence")


DEFAULTS = {
    "f": "constant",
    "eta": DEFAULT_LAMB_DICKE,
    "alpha_sq": 10.0,
    "t_max": 25.0,
    "steps": 1000,
    "tail_eps": DEFAULT_TAIL_EPSILON,
    "ode_tol": DEFAULT_ODE_TOLERANCE,
    "delta1": 0.0,
    "delta2": 0.0,
    "solver": "eigen",
    "out": "observables.csv",
    "amplitudes": None,
    "dump_rho": None,
    "rho_out": None,
    "errata": "off",
    "errata_out": None,
    "n_min": 0,
    "n_max": 50,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xicavity", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="evolve the state and write observable time series")
    _model_args(sim)
    sim.add_argument("--delta1", type=float, help="detuning Delta1 in units of g")
    sim.add_argument("--delta2", type=float, help="detuning Delta2 in units of g")
    sim.add_argument("--solver", choices=["eigen", "ode"])
    sim.add_argument("--out", help="observables CSV path")
    sim.add_argument("--amplitudes", help="also dump amplitudes C1..C6 to this CSV")
    sim.add_argument("--dump-rho", type=float, metavar="T", help="write the two-atom density matrix at gt=T")
    sim.add_argument("--rho-out", help="path for --dump-rho (default <out>_rho.csv)")
    sim.add_argument("--errata", choices=["off", "report"], help="write printed-vs-corrected closed-form deviations")
    sim.add_argument("--errata-out", help="path for the errata report (default <out>_errata.csv)")

    val = sub.add_parser("validate", help="run the invariant and oracle suite")
    _model_args(val)

    spe = sub.add_parser("spectra", help="dump per-block spectral coefficients as CSV")
    spe.add_argument("--f", dest="f", choices=["constant", "harmonious", "trapped-ion"])
    spe.add_argument("--eta", type=float)
    spe.add_argument("--n-min", type=int)
    spe.add_argument("--n-max", type=int)
    spe.add_argument("--out", help="CSV path (default: stdout)")
    spe.add_argument("--config")
    return parser


def resolve_options(args: argparse.Namespace) -> dict:
    """Merge built-in defaults < JSON config file < explicit flags."""
    opts = dict(DEFAULTS)
    if args.command == "spectra":
        opts["out"] = None
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                file_opts = json.load(fh)
        except OSError as exc:
            raise OSError(f"cannot read config file {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(file_opts, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in file_opts.items():
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            opts[key] = value
    for key, value in vars(args).items():
        if key in DEFAULTS and value is not None:
            opts[key] = value
    return opts


def _spec(opts: dict) -> NonlinearitySpec:
    try:
        return NonlinearitySpec.from_name(str(opts["f"]), float(opts["eta"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _config(opts: dict) -> SimulationConfig:
    if opts["alpha_sq"] <= 0:
        raise ConfigError("--alpha-sq must be positive")
    if opts["steps"] < 1 or opts["t_max"] <= 0:
        raise ConfigError("--steps must be >= 1 and --t-max > 0")
    try:
        return SimulationConfig(
            alpha=math.sqrt(opts["alpha_sq"]),
            spec=_spec(opts),
            delta1=float(opts["delta1"]),
            delta2=float(opts["delta2"]),
            t_grid=default_grid(float(opts["t_max"]), int(opts["steps"])),
            tail_epsilon=float(opts["tail_eps"]),
            ode_tolerance=float(opts["ode_tol"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(f"{path.stem}_{suffix}{path.suffix or '.csv'}")


def manifest_from_options(opts: dict) -> RunManifest:
    cfg = _config(opts)
    out = output_path(opts["out"])
    outputs = {"observables": out}
    if opts["amplitudes"]:
        outputs["amplitudes"] = output_path(opts["amplitudes"])
    if opts["dump_rho"] is not None:
        outputs["rho"] = output_path(opts["rho_out"]) if opts["rho_out"] else _sibling(out, "rho")
    if opts["errata"] == "report":
        outputs["errata"] = output_path(opts["errata_out"]) if opts["errata_out"] else _sibling(out, "errata")
    return RunManifest(cfg, opts["solver"], outputs, opts["errata"], opts["dump_rho"])


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        opts = resolve_options(args)
        if args.command == "simulate":
            manifest = manifest_from_options(opts)
            for p in manifest.outputs.values():
                p.parent.mkdir(parents=True, exist_ok=True)
            return run_simulation(manifest)
        if args.command == "validate":
            cfg = _config(opts)
            eta = float(opts["eta"])
            suite = validation.Suite(
                specs=validation.default_specs(eta),
                alpha=cfg.alpha,
                t_grid=cfg.t_grid,
                tail_epsilon=cfg.tail_epsilon,
                ode_tolerance=cfg.ode_tolerance,
            )
            return validate(suite)
        if args.command == "spectra":
            if opts["n_min"] < 0 or opts["n_max"] < opts["n_min"]:
                raise ConfigError("need 0 <= --n-min <= --n-max")
            spec = _spec(opts)
            rows = list(spectra_rows(spec, range(int(opts["n_min"]), int(opts["n_max"]) + 1)))
            if opts["out"]:
                path = output_path(opts["out"])
                path.parent.mkdir(parents=True, exist_ok=True)
                with open(path, "w", newline="") as fh:
                    write_spectra(fh, rows)
            else:
                write_spectra(sys.stdout, rows)
            return EXIT_OK
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
