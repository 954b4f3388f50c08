"""Run configuration: a single versioned TOML document.

Physical values are SI numbers or strings with a unit suffix such as
``"0.23nH"``, ``"50mK"`` or ``"11.3GHz"``. Unknown keys are rejected with a
nearest-match suggestion. ``render`` writes a fully resolved document that
``parse_config`` reads back to an equal ``RunConfig``.
"""

from __future__ import annotations

import difflib
import math
import os
import re
from dataclasses import dataclass, field
from typing import Any

import numpy as np

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib
import tomli_w

from .errors import SchemaError, VersionError
from .experiments import MODES, PROTOCOLS, SweepPlan
from .measurement import AmplifierModel, DigitizerConfig
from .physics import (
    DeviceParams,
    DriveParams,
    Resonance,
    SpectralEnvironment,
    ThermalEnvironment,
)
from .constants import TWO_PI

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "DCESIM_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "dcesim-output"

# --- units ------------------------------------------------------------------

_PREFIX = {
    "p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6, "μ": 1e-6, "m": 1e-3,
    "": 1.0, "k": 1e3, "M": 1e6, "G": 1e9, "T": 1e12,
}
_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_QUANTITY = re.compile(rf"^\s*({_NUMBER})\s*([^\s\d].*?)?\s*$")


def parse_quantity(value, unit: str | None, path="") -> float:
    """Convert a number or suffixed string to an SI float in ``unit``.

    ``unit=None`` marks a dimensionless field: only bare numbers are accepted.
    """
    if isinstance(value, bool):
        raise SchemaError(path, "expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise SchemaError(path, f"expected a number or quantity string, got {type(value).__name__}")
    m = _QUANTITY.match(value)
    if not m:
        raise SchemaError(path, f"cannot parse quantity {value!r}")
    number, suffix = float(m.group(1)), (m.group(2) or "")
    if not suffix:
        return number
    if unit is None:
        raise SchemaError(path, f"dimensionless field does not take a unit ({value!r})")
    if suffix == unit:
        return number
    if suffix.endswith(unit) and suffix[: -len(unit)] in _PREFIX:
        return number * _PREFIX[suffix[: -len(unit)]]
    raise SchemaError(path, f"unit {suffix!r} is not compatible with {unit}")


# --- schema -----------------------------------------------------------------

@dataclass(frozen=True)
class Field:
    kind: str  # quantity | int | choice | text | quantity_list | resonances
    unit: str | None = None
    default: Any = None
    doc: str = ""
    choices: tuple = ()
    minimum: float | None = None
    strict_minimum: bool = False


SCHEMA: dict[str, dict[str, Field]] = {
    "run": {
        "protocol": Field("choice", default="squeezing_vs_power", choices=PROTOCOLS,
                          doc="experiment protocol to run"),
        "mode": Field("choice", default="both", choices=MODES,
                      doc="theory, montecarlo, or both"),
        "seed": Field("int", default=20110602, minimum=0, doc="master RNG seed (64-bit)"),
        "output_dir": Field("text", default=None,
                            doc=f"output directory (default ${OUTPUT_DIR_ENV} or {DEFAULT_OUTPUT_DIR})"),
        "workers": Field("int", default=0, minimum=0, doc="grid workers; 0 = available CPUs"),
    },
    "device": {
        "L_J0": Field("quantity", "H", 0.23e-9, "SQUID inductance at zero flux", minimum=0, strict_minimum=True),
        "L_0": Field("quantity", "H/m", 4.6e-7, "line inductance per length", minimum=0, strict_minimum=True),
        "C_0": Field("quantity", "F/m", 4.6e-7 / 2500.0, "line capacitance per length", minimum=0, strict_minimum=True),
        "flux_bias": Field("quantity", "Wb", 0.0, "static flux through the SQUID loop"),
    },
    "drive": {
        "frequency": Field("quantity", "Hz", 10.3e9, "pump frequency f_d", minimum=0, strict_minimum=True),
        "velocity_ratio": Field("quantity", None, None,
                                "v_e/c_0; sets delta_len (default 0.05 when delta_len is absent)", minimum=0),
        "delta_len": Field("quantity", "m", None, "electrical-length modulation amplitude", minimum=0),
        "phase": Field("quantity", "rad", 0.0, "drive phase in the sideband frame"),
    },
    "environment": {
        "kind": Field("choice", default="flat", choices=("flat", "resonant"), doc="|A(omega)|^2 model"),
        "resonances": Field("resonances", default=(),
                            doc="list of {center = Hz, q = Q, peak = |A|^2 at center (default Q^2)}"),
    },
    "thermal": {
        "temperature": Field("quantity", "K", 0.050, "input field temperature", minimum=0),
    },
    "amplifier": {
        "noise_temperature": Field("quantity", "K", 6.0, "amplifier noise temperature T_N", minimum=0),
        "gain": Field("quantity", None, 1.0, "power gain (metadata)", minimum=0, strict_minimum=True),
    },
    "digitizer": {
        "analysis_bandwidth": Field("quantity", "Hz", 10e6, "analysis (RF) bandwidth", minimum=0, strict_minimum=True),
        "samples_per_channel": Field("int", default=1_000_000, minimum=2, doc="samples per quadrature channel"),
        "max_lag": Field("int", default=20, minimum=0, doc="lag window half-width (samples)"),
        "antialias_taps": Field("int", default=31, minimum=1, doc="antialias FIR length (odd)"),
        "chop_period": Field("quantity", "s", 0.050, "on/off chop half-period", minimum=0, strict_minimum=True),
        "chunk_size": Field("int", default=1 << 18, minimum=1, doc="rows per seeded RNG chunk"),
    },
    "sweep": {
        "drive_frequencies": Field("quantity_list", "Hz", None, "pump frequency grid"),
        "delta_lens": Field("quantity_list", "m", None, "modulation amplitude grid"),
        "velocity_ratios": Field("quantity_list", None, None, "v_e/c_0 grid (alternative to delta_lens)"),
        "powers_db": Field("quantity_list", None, None,
                           "drive power grid in dB relative to reference_power_db (power ~ delta_len^2)"),
        "reference_power_db": Field("quantity", None, 0.0, "power at which delta_len equals drive.delta_len"),
        "analysis_frequencies": Field("quantity_list", "Hz", None, "digitizer frequency grid"),
        "drive_phases": Field("quantity_list", "rad", None, "drive phase grid"),
        "rotation_phases": Field("quantity_list", "rad", None, "digital rotation grid"),
        "sideband_offset": Field("quantity", "Hz", 20e6, "sideband detuning from f_d/2", minimum=0, strict_minimum=True),
    },
}


@dataclass(frozen=True)
class RunSettings:
    protocol: str
    mode: str
    seed: int
    output_dir: str
    workers: int


@dataclass(frozen=True)
class SweepSettings:
    drive_frequencies: tuple
    delta_lens: tuple
    analysis_frequencies: tuple
    drive_phases: tuple
    rotation_phases: tuple
    sideband_offset: float


@dataclass(frozen=True)
class RunConfig:
    run: RunSettings
    device: DeviceParams
    flux_bias: float
    drive: DriveParams
    environment: SpectralEnvironment
    thermal: ThermalEnvironment
    amplifier: AmplifierModel
    digitizer: DigitizerConfig
    sweep: SweepSettings
    version: int = SCHEMA_VERSION

    def plan(self, output=None) -> SweepPlan:
        s = self.sweep
        return SweepPlan(
            protocol=self.run.protocol,
            drive_frequencies=s.drive_frequencies,
            delta_lens=s.delta_lens,
            analysis_frequencies=s.analysis_frequencies,
            drive_phases=s.drive_phases,
            rotation_phases=s.rotation_phases,
            sideband_offset=s.sideband_offset,
            flux_bias=self.flux_bias,
            mode=self.run.mode,
            seed=self.run.seed,
            device=self.device,
            environment=self.environment,
            thermal=self.thermal,
            amplifier=self.amplifier,
            digitizer=self.digitizer,
            output=output if output is not None else self.run.output_dir,
        )


# --- parsing ----------------------------------------------------------------

def _suggest(key, known):
    close = difflib.get_close_matches(key, list(known), n=1, cutoff=0.6)
    return f"; did you mean {close[0]!r}?" if close else ""


def _check_min(value, fld: Field, path):
    if fld.minimum is None:
        return value
    if value < fld.minimum or (fld.strict_minimum and value == fld.minimum):
        rel = ">" if fld.strict_minimum else ">="
        raise SchemaError(path, f"must be {rel} {fld.minimum:g}, got {value!r}")
    return value


def _convert(value, fld: Field, path):
    if fld.kind == "quantity":
        v = parse_quantity(value, fld.unit, path)
        if not math.isfinite(v):
            raise SchemaError(path, "must be finite")
        return _check_min(v, fld, path)
    if fld.kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaError(path, f"expected an integer, got {value!r}")
        return _check_min(value, fld, path)
    if fld.kind == "choice":
        if value not in fld.choices:
            raise SchemaError(path, f"must be one of {list(fld.choices)}, got {value!r}"
                              + _suggest(str(value), fld.choices))
        return value
    if fld.kind == "text":
        if not isinstance(value, str):
            raise SchemaError(path, f"expected a string, got {value!r}")
        return value
    if fld.kind == "quantity_list":
        if not isinstance(value, list) or not value:
            raise SchemaError(path, "expected a nonempty list")
        return tuple(parse_quantity(v, fld.unit, f"{path}[{i}]") for i, v in enumerate(value))
    if fld.kind == "resonances":
        if not isinstance(value, list):
            raise SchemaError(path, "expected a list of tables")
        out = []
        for i, item in enumerate(value):
            p = f"{path}[{i}]"
            if not isinstance(item, dict):
                raise SchemaError(p, "expected a table with center, q and optional peak")
            for k in item:
                if k not in ("center", "q", "peak"):
                    raise SchemaError(f"{p}.{k}", "unknown key" + _suggest(k, ("center", "q", "peak")))
            if "center" not in item or "q" not in item:
                raise SchemaError(p, "resonance needs center and q")
            center = parse_quantity(item["center"], "Hz", f"{p}.center")
            q = parse_quantity(item["q"], None, f"{p}.q")
            peak = parse_quantity(item["peak"], None, f"{p}.peak") if "peak" in item else None
            try:
                out.append(Resonance(TWO_PI * center, q, peak))
            except ValueError as exc:
                raise SchemaError(p, str(exc)) from None
        return tuple(out)
    raise AssertionError(fld.kind)


def _validate_raw(raw: dict) -> dict:
    version = raw.get("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise VersionError(f"config version {version!r} is not supported (expected {SCHEMA_VERSION})")
    out = {}
    for section, body in raw.items():
        if section == "version":
            continue
        if section not in SCHEMA:
            raise SchemaError(section, "unknown section" + _suggest(section, SCHEMA))
        if not isinstance(body, dict):
            raise SchemaError(section, "expected a table")
        fields = SCHEMA[section]
        conv = {}
        for key, value in body.items():
            path = f"{section}.{key}"
            if key not in fields:
                raise SchemaError(path, "unknown key" + _suggest(key, fields))
            conv[key] = _convert(value, fields[key], path)
        out[section] = conv
    return out


def _get(vals, section, key):
    v = vals.get(section, {}).get(key)
    return SCHEMA[section][key].default if v is None else v


def _wrap(path, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except SchemaError:
        raise
    except ValueError as exc:
        raise SchemaError(path, str(exc)) from None


def _default_output_dir():
    return os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR)


def config_from_dict(raw: dict) -> RunConfig:
    vals = _validate_raw(raw)
    g = lambda s, k: _get(vals, s, k)  # noqa: E731

    run = RunSettings(
        protocol=g("run", "protocol"),
        mode=g("run", "mode"),
        seed=g("run", "seed"),
        output_dir=vals.get("run", {}).get("output_dir") or _default_output_dir(),
        workers=g("run", "workers"),
    )
    if run.seed >= 2**64:
        raise SchemaError("run.seed", "must fit in 64 bits")
    device = _wrap("device", DeviceParams, L_J0=g("device", "L_J0"), L_0=g("device", "L_0"),
                   C_0=g("device", "C_0"))
    omega_d = TWO_PI * g("drive", "frequency")
    d = vals.get("drive", {})
    if "delta_len" in d and "velocity_ratio" in d:
        raise SchemaError("drive", "give either delta_len or velocity_ratio, not both")
    if "delta_len" in d:
        delta_len = d["delta_len"]
    else:
        delta_len = d.get("velocity_ratio", 0.05) * device.c_0 / omega_d
    drive = _wrap("drive", DriveParams, omega_d, delta_len, g("drive", "phase"))
    if drive.velocity_ratio(device) >= 1:
        raise SchemaError("drive", "boundary velocity v_e/c_0 must be below 1")

    kind = g("environment", "kind")
    res = g("environment", "resonances")
    if kind == "flat" and res:
        raise SchemaError("environment.resonances", "a flat environment takes no resonances")
    if kind == "resonant" and not res:
        raise SchemaError("environment.resonances", "a resonant environment needs resonances")
    env = SpectralEnvironment(kind, res)

    thermal = ThermalEnvironment(g("thermal", "temperature"))
    amp = AmplifierModel(g("amplifier", "noise_temperature"), g("amplifier", "gain"))
    digitizer = _wrap(
        "digitizer", DigitizerConfig,
        analysis_bandwidth=g("digitizer", "analysis_bandwidth"),
        samples_per_channel=g("digitizer", "samples_per_channel"),
        max_lag=g("digitizer", "max_lag"),
        antialias_taps=g("digitizer", "antialias_taps"),
        rng_seed=0,
        chop_period=g("digitizer", "chop_period"),
        chunk_size=g("digitizer", "chunk_size"),
    )
    sweep = _resolve_sweep(vals.get("sweep", {}), run.protocol, drive, device)
    cfg = RunConfig(run, device, g("device", "flux_bias"), drive, env, thermal, amp, digitizer, sweep)
    _wrap("sweep", cfg.plan)
    return cfg


def _resolve_sweep(s: dict, protocol, drive: DriveParams, device: DeviceParams) -> SweepSettings:
    f_d = drive.omega_d / TWO_PI
    amp_keys = [k for k in ("delta_lens", "velocity_ratios", "powers_db") if k in s]
    if len(amp_keys) > 1:
        raise SchemaError("sweep", f"give only one of {amp_keys}")
    if "delta_lens" in s:
        delta_lens = s["delta_lens"]
    elif "velocity_ratios" in s:
        delta_lens = tuple(r * device.c_0 / drive.omega_d for r in s["velocity_ratios"])
    elif "powers_db" in s:
        ref = s.get("reference_power_db", 0.0)
        delta_lens = tuple(drive.delta_len * 10 ** ((p - ref) / 20) for p in s["powers_db"])
    elif protocol in ("cw_map", "squeezing_vs_power"):
        delta_lens = tuple(drive.delta_len * k / 5 for k in range(6))
    else:
        delta_lens = (drive.delta_len,)

    if "drive_frequencies" in s:
        freqs = s["drive_frequencies"]
    elif protocol == "cw_map":
        freqs = tuple(float(f) for f in np.linspace(8.4e9, 12e9, 19))
    else:
        freqs = (f_d,)
    analysis = s.get("analysis_frequencies")
    if analysis is None:
        analysis = tuple(float(f) for f in np.linspace(4e9, 6e9, 21)) if protocol == "spectral_scan" else ()
    phase_grid = tuple(float(p) for p in np.linspace(0, math.pi, 9))
    drive_phases = s.get("drive_phases") or (phase_grid if protocol == "phase_map" else (drive.theta_d,))
    rotation_phases = s.get("rotation_phases") or (phase_grid if protocol == "phase_map" else (0.0,))
    return SweepSettings(
        drive_frequencies=tuple(freqs),
        delta_lens=tuple(delta_lens),
        analysis_frequencies=tuple(analysis),
        drive_phases=tuple(drive_phases),
        rotation_phases=tuple(rotation_phases),
        sideband_offset=s.get("sideband_offset", SCHEMA["sweep"]["sideband_offset"].default),
    )


def _loads(text: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SchemaError("", f"TOML syntax error: {exc}") from None


def set_path(raw: dict, dotted: str, value):
    """Set ``section.key`` in a raw config dict (used for command-line overrides)."""
    parts = dotted.split(".")
    if len(parts) != 2:
        raise SchemaError(dotted, "override path must be section.key")
    raw.setdefault(parts[0], {})[parts[1]] = value


def parse_override(text: str):
    """``section.key=value``; the value is read as a TOML literal when possible."""
    if "=" not in text:
        raise SchemaError(text, "override must look like section.key=value")
    path, value = text.split("=", 1)
    try:
        parsed = tomllib.loads(f"v = {value}")["v"]
    except tomllib.TOMLDecodeError:
        parsed = value.strip()
    return path.strip(), parsed


def parse_config(text: str = "", overrides=()) -> RunConfig:
    """Parse a TOML config document, apply ``section.key=value`` overrides, resolve defaults."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    raw = _loads(text)
    for item in overrides:
        path, value = parse_override(item) if isinstance(item, str) else item
        set_path(raw, path, value)
    return config_from_dict(raw)


def to_dict(cfg: RunConfig) -> dict:
    """Fully resolved raw document (SI floats, no unit strings)."""
    s = cfg.sweep
    env = {"kind": cfg.environment.kind}
    if cfg.environment.resonances:
        env["resonances"] = [
            {"center": r.center / TWO_PI, "q": r.q, **({} if r.peak is None else {"peak": r.peak})}
            for r in cfg.environment.resonances
        ]
    sweep = {
        "drive_frequencies": list(s.drive_frequencies),
        "delta_lens": list(s.delta_lens),
        "drive_phases": list(s.drive_phases),
        "rotation_phases": list(s.rotation_phases),
        "sideband_offset": s.sideband_offset,
    }
    if s.analysis_frequencies:
        sweep["analysis_frequencies"] = list(s.analysis_frequencies)
    dg = cfg.digitizer
    return {
        "version": cfg.version,
        "run": {
            "protocol": cfg.run.protocol, "mode": cfg.run.mode, "seed": cfg.run.seed,
            "output_dir": cfg.run.output_dir, "workers": cfg.run.workers,
        },
        "device": {"L_J0": cfg.device.L_J0, "L_0": cfg.device.L_0, "C_0": cfg.device.C_0,
                   "flux_bias": cfg.flux_bias},
        "drive": {"frequency": cfg.drive.omega_d / TWO_PI, "delta_len": cfg.drive.delta_len,
                  "phase": cfg.drive.theta_d},
        "environment": env,
        "thermal": {"temperature": cfg.thermal.temperature},
        "amplifier": {"noise_temperature": cfg.amplifier.noise_temperature, "gain": cfg.amplifier.gain},
        "digitizer": {
            "analysis_bandwidth": dg.analysis_bandwidth, "samples_per_channel": dg.samples_per_channel,
            "max_lag": dg.max_lag, "antialias_taps": dg.antialias_taps,
            "chop_period": dg.chop_period, "chunk_size": dg.chunk_size,
        },
        "sweep": sweep,
    }


def render(cfg: RunConfig, include_output_dir=True) -> str:
    doc = to_dict(cfg)
    if not include_output_dir:
        del doc["run"]["output_dir"]
    return tomli_w.dumps(doc)


def schema_description() -> dict:
    """Machine-readable description of every section and key."""
    out = {"version": SCHEMA_VERSION, "sections": {}}
    for section, fields in SCHEMA.items():
        out["sections"][section] = {
            key: {
                "type": f.kind,
                "unit": f.unit,
                "default": list(f.default) if isinstance(f.default, tuple) else f.default,
                "choices": list(f.choices) or None,
                "description": f.doc,
            }
            for key, f in fields.items()
        }
    return out
