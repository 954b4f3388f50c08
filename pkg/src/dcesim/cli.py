"""Command-line entry point: ``dcesim eval|run|schema|version``.

Exit codes
----------
0  success
2  configuration/schema error or bad command-line usage
3  unsupported config or file format version
4  runtime failure inside a computation
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import __version__
from .config import parse_config, render, schema_description
from .constants import TWO_PI
from .errors import DCEError, SchemaError, VersionError
from .experiments import run_plan, summarize, write_result
from .physics import (
    SpectralEnvironment,
    analytic_sigma2,
    dce_flux_density,
    electrical_length,
    integrated_dce_flux,
    josephson_inductance,
    output_flux_density,
    reflection_coefficient,
    reflection_from_length,
    scattering_amplitude,
)

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_VERSION = 3
EXIT_RUNTIME = 4

log = logging.getLogger("dcesim")

QUANTITIES = ("LJ", "ell_e", "R", "S", "n_out", "dce_flux", "gamma_dce", "sigma2_analytic")
UNITS = {
    "LJ": "H", "ell_e": "m", "R": "", "S": "", "n_out": "photons/s/Hz",
    "dce_flux": "photons/s/Hz", "gamma_dce": "photons/s", "sigma2_analytic": "",
}


def _load_config(args):
    text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
    return parse_config(text, args.set or ())


def _analysis_omega(args, cfg):
    if args.freq is not None:
        return TWO_PI * args.freq
    return cfg.drive.omega_d / 2 + TWO_PI * cfg.sweep.sideband_offset


def evaluate(quantity, cfg, freq=None, flux=None, epsilon=None, length=None):
    """Value of one closed-form quantity at the configured (or given) point."""
    dev, drive = cfg.device, cfg.drive
    flux = cfg.flux_bias if flux is None else flux
    omega = cfg.drive.omega_d / 2 + TWO_PI * cfg.sweep.sideband_offset if freq is None else TWO_PI * freq
    if quantity == "LJ":
        return josephson_inductance(flux, dev)
    if quantity == "ell_e":
        return electrical_length(flux, dev)
    if quantity == "R":
        if length is not None:
            return reflection_from_length(omega, length, dev.c_0)
        return reflection_coefficient(omega, flux, dev)
    if quantity == "S":
        return scattering_amplitude(omega, drive, cfg.environment, dev)
    if quantity == "n_out":
        return output_flux_density(omega, drive, cfg.environment, dev, cfg.thermal.temperature)
    if quantity == "dce_flux":
        return dce_flux_density(omega, drive, dev)
    if quantity == "gamma_dce":
        if cfg.environment.kind != "flat":
            log.warning("gamma_dce assumes a flat environment; resonances are ignored")
        return integrated_dce_flux(drive, dev)
    if quantity == "sigma2_analytic":
        eps = TWO_PI * cfg.sweep.sideband_offset if epsilon is None else TWO_PI * epsilon
        return analytic_sigma2(eps, drive, dev)
    raise ValueError(f"unknown quantity {quantity!r}")


def _format_value(value, unit):
    if isinstance(value, complex):
        text = f"{value.real:.10g}{value.imag:+.10g}j (|.| = {abs(value):.10g}, arg = {math.atan2(value.imag, value.real):.10g} rad)"
    else:
        text = f"{value:.10g}"
    return f"{text} {unit}".rstrip()


def cmd_eval(args):
    cfg = _load_config(args)
    value = evaluate(args.quantity, cfg, args.freq, args.flux, args.epsilon, args.length)
    unit = UNITS[args.quantity]
    print(f"{args.quantity} = {_format_value(value, unit)}")
    if args.json:
        payload = {"quantity": args.quantity, "unit": unit, "version": 1}
        if isinstance(value, complex):
            payload.update(real=value.real, imag=value.imag)
        else:
            payload["value"] = value
        print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def cmd_run(args):
    cfg = _load_config(args)
    workers = cfg.run.workers if args.workers is None else args.workers
    if workers == 0:
        workers = os.cpu_count() or 1
    plan = cfg.plan(output=args.output)
    result = run_plan(plan, workers=workers, record_dir=args.records,
                      record_format=args.record_format)
    outdir = Path(plan.output)
    write_result(result, outdir)
    (outdir / "config.toml").write_text(render(cfg, include_output_dir=False), encoding="utf-8")
    print(summarize(result))
    return EXIT_OK


def cmd_schema(args):
    print(json.dumps(schema_description(), indent=2))
    return EXIT_OK


def cmd_version(args):
    print(f"dcesim {__version__} (config schema 1, record format 1, result format 1)")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="dcesim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def config_args(p):
        p.add_argument("-c", "--config", help="TOML config file (defaults apply when omitted)")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override one config field; repeatable")

    p = sub.add_parser("eval", help="evaluate one closed-form quantity")
    p.add_argument("quantity", choices=QUANTITIES)
    config_args(p)
    p.add_argument("--freq", type=float, help="analysis frequency in Hz (default f_d/2 + offset)")
    p.add_argument("--flux", type=float, help="flux bias in Wb")
    p.add_argument("--epsilon", type=float, help="sideband detuning in Hz (sigma2_analytic)")
    p.add_argument("--length", type=float, help="electrical length in m (R only)")
    p.add_argument("--json", action="store_true", help="also print a JSON line")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="run the configured protocol")
    config_args(p)
    p.add_argument("-o", "--output", help="output directory (overrides run.output_dir)")
    p.add_argument("-j", "--workers", type=int, help="grid workers (0 = all CPUs)")
    p.add_argument("--records", metavar="DIR",
                   help="also save every Monte Carlo voltage record and its analysis JSON here")
    p.add_argument("--record-format", choices=("binary", "csv"), default="binary")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("schema", help="print the config schema as JSON")
    p.set_defaults(func=cmd_schema)

    p = sub.add_parser("version", help="print version information")
    p.set_defaults(func=cmd_version)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except VersionError as exc:
        print(f"version error: {exc}", file=sys.stderr)
        return EXIT_VERSION
    except (DCEError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
