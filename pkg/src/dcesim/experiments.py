"""Sweep protocols mirroring the photon-generation and squeezing measurements.

Four protocols are available:

``cw_map``
    drive frequency x drive strength, analysis pinned at half the drive frequency.
``spectral_scan``
    fixed drive, analysis frequency scanned, chopped on/off power difference.
``squeezing_vs_power``
    sigma2 and both sigma1 values against drive strength.
``phase_map``
    drive phase x digital rotation of the Psi correlator.

Every grid point is an independent work item. Monte Carlo seeds are derived
from (master seed, point index), so results do not depend on how many workers
run the grid. A point that raises is recorded with ``status = "error"``
instead of aborting the sweep.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .constants import TWO_PI
from .errors import DCEError, NegativeDenominator
from .gaussian import (
    TwoModeState,
    align_phase,
    covariance_matrix,
    psi_correlator,
    average_power,
    rotate_phase,
    sigma1,
    sigma2_quadrature,
    state_from_drive,
)
from .measurement import (
    AmplifierModel,
    DigitizerConfig,
    Estimate,
    analyze_record,
    chopped_power_difference,
    estimate_rotated_psi,
    estimate_sigma1,
    estimate_sigma2,
    sample_record,
)
from .recordio import write_record
from .physics import (
    DeviceParams,
    DriveParams,
    SpectralEnvironment,
    ThermalEnvironment,
    analytic_sigma2,
    output_flux_density,
    thermal_occupation,
)

PROTOCOLS = ("cw_map", "spectral_scan", "squeezing_vs_power", "phase_map")
MODES = ("theory", "montecarlo", "both")


def delta_len_from_power_db(power_db, reference_db, reference_delta_len):
    """Map a drive power in dB to a modulation amplitude, assuming power ~ delta_len**2."""
    return reference_delta_len * 10 ** ((np.asarray(power_db, dtype=float) - reference_db) / 20)


def point_seed(master_seed, *index) -> int:
    """64-bit seed for grid point ``index`` of a run seeded with ``master_seed``."""
    ss = np.random.SeedSequence([int(master_seed), *map(int, index)])
    return int(ss.generate_state(1, np.uint64)[0])


def _strictly_monotone(values):
    v = np.asarray(values, dtype=float)
    d = np.diff(v)
    return v.size > 0 and (np.all(d > 0) or np.all(d < 0))


@dataclass(frozen=True)
class SweepPlan:
    """Resolved description of one protocol run.

    Frequencies are in Hz (not rad/s) because they are user-facing axes;
    ``sideband_offset`` is the detuning epsilon/2pi of each sideband from
    half the drive frequency.
    """

    protocol: str
    drive_frequencies: tuple = (10.3e9,)
    delta_lens: tuple = ()
    analysis_frequencies: tuple = ()
    drive_phases: tuple = (0.0,)
    rotation_phases: tuple = (0.0,)
    sideband_offset: float = 20e6
    flux_bias: float = 0.0
    mode: str = "theory"
    seed: int = 0
    device: DeviceParams = field(default_factory=DeviceParams)
    environment: SpectralEnvironment = field(default_factory=SpectralEnvironment.flat)
    thermal: ThermalEnvironment = field(default_factory=ThermalEnvironment)
    amplifier: AmplifierModel = field(default_factory=AmplifierModel)
    digitizer: DigitizerConfig = field(default_factory=DigitizerConfig)
    output: str | None = None

    def __post_init__(self):
        for name in ("drive_frequencies", "delta_lens", "analysis_frequencies",
                     "drive_phases", "rotation_phases"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        axes = {
            "cw_map": ("drive_frequencies", "delta_lens"),
            "spectral_scan": ("drive_frequencies", "analysis_frequencies"),
            "squeezing_vs_power": ("delta_lens",),
            "phase_map": ("drive_phases", "rotation_phases"),
        }[self.protocol]
        for name in axes:
            if not _strictly_monotone(getattr(self, name)):
                raise ValueError(f"{name} must be a nonempty, strictly monotone grid")
        singles = {
            "spectral_scan": ("delta_lens",),
            "squeezing_vs_power": ("drive_frequencies",),
            "phase_map": ("drive_frequencies", "delta_lens"),
        }.get(self.protocol, ())
        for name in singles:
            if len(getattr(self, name)) != 1:
                raise ValueError(f"{self.protocol} needs exactly one value in {name}")
        if not self.sideband_offset > 0:
            raise ValueError("sideband_offset must be positive")

    @property
    def montecarlo(self):
        return self.mode in ("montecarlo", "both")

    @property
    def theory(self):
        return self.mode in ("theory", "both")

    def to_dict(self):
        d = asdict(self)
        d["environment"] = {
            "kind": self.environment.kind,
            "resonances": [asdict(r) for r in self.environment.resonances],
        }
        return d


@dataclass
class SweepResult:
    protocol: str
    rows: list
    metadata: dict

    def column(self, name):
        return np.array([r.get(name, np.nan) if r.get(name) is not None else np.nan
                         for r in self.rows], dtype=float)

    def ok_rows(self):
        return [r for r in self.rows if r["status"] == "ok"]


# --- per-point physics -------------------------------------------------------

class _Context:
    def __init__(self, plan: SweepPlan, record_dir=None, record_format="binary"):
        self.plan = plan
        self.record_dir = None if record_dir is None else Path(record_dir)
        self.record_suffix = {"binary": ".dcerec", "csv": ".csv"}[record_format]
        self.dev = plan.device
        self.env = plan.environment
        self.T = plan.thermal.temperature
        # one analysis bin between the two sidebands at minimum
        self.min_separation = TWO_PI * plan.digitizer.analysis_bandwidth

    def drive(self, f_d, delta_len, theta_d=0.0):
        return DriveParams(TWO_PI * f_d, delta_len, theta_d)

    def pair_state(self, drive, omega_plus, align_reference=True):
        state = state_from_drive(
            omega_plus, drive, self.env, self.dev, self.T, self.plan.flux_bias,
            self.min_separation,
        )
        if not align_reference:
            return state
        ref = state_from_drive(
            omega_plus, replace(drive, theta_d=0.0), self.env, self.dev, self.T,
            self.plan.flux_bias, self.min_separation,
        )
        _, theta = align_phase(ref)
        return rotate_phase(state, theta)

    def thermal_state(self, omega_plus, omega_d):
        n_p = thermal_occupation(omega_plus, self.T)
        n_m = thermal_occupation(omega_d - omega_plus, self.T)
        return TwoModeState(n_p, n_m, 0j, omega_plus, omega_d - omega_plus, omega_d)

    def digitizer(self, seed):
        return replace(self.plan.digitizer, rng_seed=seed)

    def record(self, state, seed):
        center = state.omega_d / 2
        rec = sample_record(
            covariance_matrix(state), self.plan.amplifier, self.digitizer(seed), center
        )
        if self.record_dir is not None:
            # seeds are unique per record, so names never collide across workers
            stem = self.record_dir / f"record-{seed:020d}"
            write_record(rec, stem.with_suffix(self.record_suffix))
            stem.with_suffix(".json").write_text(
                analyze_record(rec, self.plan.amplifier).to_json(indent=1, sort_keys=True) + "\n",
                encoding="utf-8",
            )
        return rec

    def offset_pair(self, omega_a, omega_d):
        """Sideband pair (omega_plus) measured for an analysis frequency.

        Analysis frequencies closer to omega_d/2 than half a bin are moved out
        to the minimum separation.
        """
        eps = abs(omega_a - omega_d / 2)
        return omega_d / 2 + max(eps, self.min_separation / 2 * (1 + 1e-9))

    def chopped_occupation(self, state, seed, off_seed):
        """Per-mode on/off occupation difference from a Monte Carlo record pair."""
        on = self.record(state, seed)
        off = self.record(self.thermal_state(state.omega_plus, state.omega_d), off_seed)
        diff = chopped_power_difference(on, off)
        scale = 2 * on.filter_gain
        return diff.value / scale, diff.se / scale


def _cw_point(ctx: _Context, index, f_d, delta_len):
    plan = ctx.plan
    drive = ctx.drive(f_d, delta_len)
    wd = drive.omega_d
    row = {"f_d": f_d, "delta_len": delta_len, "velocity_ratio": drive.velocity_ratio(ctx.dev),
           "f_analysis": f_d / 2}
    if plan.theory:
        n_out = output_flux_density(wd / 2, drive, ctx.env, ctx.dev, ctx.T)
        n_dce = n_out - thermal_occupation(wd / 2, ctx.T)
        row.update(n_out=n_out, n_dce=n_dce,
                   photon_flux=n_dce * plan.digitizer.analysis_bandwidth)
    if plan.montecarlo:
        wp = ctx.offset_pair(wd / 2, wd)
        state = ctx.pair_state(drive, wp, align_reference=False)
        thermal = ctx.thermal_state(wp, wd)
        value, se = ctx.chopped_occupation(
            state, point_seed(plan.seed, index), point_seed(plan.seed, index, 1)
        )
        row.update(
            n_dce_mc=value, n_dce_mc_se=se,
            n_dce_mc_expected=(state.n_plus + state.n_minus - thermal.n_plus - thermal.n_minus) / 2,
        )
    return row


def _spectral_point(ctx: _Context, index, f_d, f_a):
    plan = ctx.plan
    drive = ctx.drive(f_d, plan.delta_lens[0])
    wd, wa = drive.omega_d, TWO_PI * f_a
    row = {"f_d": f_d, "f_analysis": f_a, "delta_len": drive.delta_len}
    if plan.theory:
        n_out = output_flux_density(wa, drive, ctx.env, ctx.dev, ctx.T)
        row.update(n_out=n_out, n_dce=n_out - thermal_occupation(wa, ctx.T))
    if plan.montecarlo:
        wp = ctx.offset_pair(wa, wd)
        state = ctx.pair_state(drive, wp, align_reference=False)
        thermal = ctx.thermal_state(wp, wd)
        value, se = ctx.chopped_occupation(
            state, point_seed(plan.seed, index), point_seed(plan.seed, index, 1)
        )
        row.update(
            n_dce_mc=value, n_dce_mc_se=se,
            n_dce_mc_expected=(state.n_plus + state.n_minus - thermal.n_plus - thermal.n_minus) / 2,
        )
    return row


def _squeezing_point(ctx: _Context, index, delta_len):
    plan = ctx.plan
    drive = ctx.drive(plan.drive_frequencies[0], delta_len)
    wd = drive.omega_d
    eps = TWO_PI * plan.sideband_offset
    state = ctx.pair_state(drive, wd / 2 + eps)
    cov = covariance_matrix(state)
    n_amp = plan.amplifier.added_quanta(wd / 2)
    row = {
        "delta_len": delta_len,
        "velocity_ratio": drive.velocity_ratio(ctx.dev),
        "f_plus": state.omega_plus / TWO_PI,
        "f_minus": state.omega_minus / TWO_PI,
    }
    if plan.theory:
        row.update(
            sigma2_analytic=analytic_sigma2(eps, drive, ctx.dev),
            sigma2_state=sigma2_quadrature(cov),
            sigma2_state_diluted=sigma2_quadrature(cov.with_added_noise(n_amp)),
            sigma1_plus_theory=sigma1(cov, "plus"),
            sigma1_minus_theory=sigma1(cov, "minus"),
        )
    if plan.montecarlo:
        rec = ctx.record(state, point_seed(plan.seed, index))
        s2 = estimate_sigma2(rec)
        try:
            s2_sub = estimate_sigma2(rec, plan.amplifier, subtract_amplifier=True)
        except NegativeDenominator as exc:
            # short records: the subtracted power can fluctuate below zero
            s2_sub = Estimate(None, None)
            row["sigma2_sub_mc_error"] = str(exc)
        s1p = estimate_sigma1(rec, "plus")
        s1m = estimate_sigma1(rec, "minus")
        row.update(
            sigma2_mc=s2.value, sigma2_mc_se=s2.se,
            sigma2_sub_mc=s2_sub.value, sigma2_sub_mc_se=s2_sub.se,
            sigma1_plus_mc=s1p.value, sigma1_plus_mc_se=s1p.se,
            sigma1_minus_mc=s1m.value, sigma1_minus_mc_se=s1m.se,
            sigma2_mc_expected=sigma2_quadrature(cov.with_added_noise(n_amp)),
        )
    return row


def _phase_rows(ctx: _Context, index, theta_d):
    """All rotation-angle rows for one drive phase (one shared record)."""
    plan = ctx.plan
    drive = ctx.drive(plan.drive_frequencies[0], plan.delta_lens[0], theta_d)
    wd = drive.omega_d
    state = ctx.pair_state(drive, wd / 2 + TWO_PI * plan.sideband_offset)
    cov = covariance_matrix(state)
    thetas = np.asarray(plan.rotation_phases)
    rows = [{"theta_d": theta_d, "theta_r": float(t)} for t in thetas]
    if plan.theory:
        n_amp = plan.amplifier.added_quanta(wd / 2)
        psi_n = psi_correlator(cov) / average_power(cov)
        noisy = cov.with_added_noise(n_amp)
        psi_noisy = psi_correlator(noisy) / average_power(noisy)
        for row, t in zip(rows, thetas):
            rot = np.exp(-2j * t)
            row["psi_re_theory"] = (rot * psi_n).real
            row["psi_re_expected_mc"] = (rot * psi_noisy).real
    if plan.montecarlo:
        rec = ctx.record(state, point_seed(plan.seed, index))
        values, errors = estimate_rotated_psi(rec, thetas)
        for row, v, s in zip(rows, values, errors):
            row["psi_re_mc"] = float(v)
            row["psi_re_mc_se"] = float(s)
    return rows


def _safe(fn, coords, *args):
    try:
        out = fn(*args)
    except (DCEError, ValueError, ArithmeticError) as exc:
        rows = [{**c, "status": "error", "error": f"{type(exc).__name__}: {exc}"} for c in coords]
        return rows
    rows = out if isinstance(out, list) else [out]
    return [{**r, "status": "ok"} for r in rows]


def _work_items(ctx: _Context):
    plan = ctx.plan
    p = plan.protocol
    if p == "cw_map":
        grid = [(f, d) for f in plan.drive_frequencies for d in plan.delta_lens]
        return [(_cw_point, [{"f_d": f, "delta_len": d}], (ctx, i, f, d))
                for i, (f, d) in enumerate(grid)]
    if p == "spectral_scan":
        grid = [(f, a) for f in plan.drive_frequencies for a in plan.analysis_frequencies]
        return [(_spectral_point, [{"f_d": f, "f_analysis": a}], (ctx, i, f, a))
                for i, (f, a) in enumerate(grid)]
    if p == "squeezing_vs_power":
        return [(_squeezing_point, [{"delta_len": d}], (ctx, i, d))
                for i, d in enumerate(plan.delta_lens)]
    return [
        (_phase_rows, [{"theta_d": t, "theta_r": r} for r in plan.rotation_phases], (ctx, i, t))
        for i, t in enumerate(plan.drive_phases)
    ]


def run_plan(plan: SweepPlan, workers=1, record_dir=None, record_format="binary") -> SweepResult:
    """Execute ``plan``; grid order and values are independent of ``workers``.

    With ``record_dir`` every Monte Carlo record is also written there (binary
    or CSV record format) together with its correlation analysis as JSON.
    """
    if record_dir is not None:
        Path(record_dir).mkdir(parents=True, exist_ok=True)
    ctx = _Context(plan, record_dir, record_format)
    items = _work_items(ctx)
    start = time.perf_counter()
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda it: _safe(it[0], it[1], *it[2]), items))
    else:
        chunks = [_safe(fn, coords, *args) for fn, coords, args in items]
    rows = [r for chunk in chunks for r in chunk]
    for i, r in enumerate(rows):
        r["index"] = i
    meta = {
        "protocol": plan.protocol,
        "seed": plan.seed,
        "plan": plan.to_dict(),
        "versions": {"dcesim": __version__, "numpy": np.__version__},
        "wall_time_s": time.perf_counter() - start,
    }
    return SweepResult(plan.protocol, rows, meta)


def run_cw_map(plan: SweepPlan, workers=1) -> SweepResult:
    _require(plan, "cw_map")
    return run_plan(plan, workers)


def run_spectral_scan(plan: SweepPlan, workers=1) -> SweepResult:
    _require(plan, "spectral_scan")
    return run_plan(plan, workers)


def run_squeezing_vs_power(plan: SweepPlan, workers=1) -> SweepResult:
    _require(plan, "squeezing_vs_power")
    return run_plan(plan, workers)


def run_phase_map(plan: SweepPlan, workers=1) -> SweepResult:
    _require(plan, "phase_map")
    return run_plan(plan, workers)


def _require(plan, protocol):
    if plan.protocol != protocol:
        raise ValueError(f"plan protocol is {plan.protocol!r}, expected {protocol!r}")


# --- output -----------------------------------------------------------------

RESULT_FORMAT_VERSION = 1


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def result_to_jsonl(result: SweepResult) -> str:
    lines = [json.dumps({k: _jsonable(v) for k, v in r.items()}, sort_keys=True) for r in result.rows]
    return "\n".join(lines) + "\n"


def result_to_csv(result: SweepResult) -> str:
    columns = []
    for r in result.rows:
        for k in r:
            if k not in columns:
                columns.append(k)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for r in result.rows:
        writer.writerow({k: ("" if r.get(k) is None else (
            format(r[k], ".17g") if isinstance(r[k], float) else r[k])) for k in columns})
    return buf.getvalue()


def write_result(result: SweepResult, outdir) -> dict:
    """Write points.jsonl, summary.csv, plan.json and timing.json into ``outdir``.

    Everything except timing.json is a pure function of (plan, seed).
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    meta = {k: v for k, v in result.metadata.items() if k != "wall_time_s"}
    # the destination is not part of the result; keep files location-independent
    meta["plan"] = {k: v for k, v in meta["plan"].items() if k != "output"}
    meta["format_version"] = RESULT_FORMAT_VERSION
    paths = {
        "points": outdir / "points.jsonl",
        "summary": outdir / "summary.csv",
        "plan": outdir / "plan.json",
        "timing": outdir / "timing.json",
    }
    paths["points"].write_text(result_to_jsonl(result), encoding="utf-8")
    paths["summary"].write_text(result_to_csv(result), encoding="utf-8")
    paths["plan"].write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    paths["timing"].write_text(
        json.dumps({"wall_time_s": result.metadata.get("wall_time_s")}) + "\n", encoding="utf-8"
    )
    return paths


def summarize(result: SweepResult) -> str:
    """One line with the protocol's key statistic."""
    ok = result.ok_rows()
    n_err = len(result.rows) - len(ok)
    tail = f" ({n_err} failed points)" if n_err else ""
    if not ok:
        return f"{result.protocol}: no successful points{tail}"
    p = result.protocol
    if p == "squeezing_vs_power":
        last = max(ok, key=lambda r: r["delta_len"])
        if "sigma2_mc" in last:
            body = f"sigma2 at max drive = {last['sigma2_mc']:.5g} +/- {last['sigma2_mc_se']:.2g}"
            if last.get("sigma2_sub_mc") is not None:
                body += (f" (amplifier-subtracted {last['sigma2_sub_mc']:.5g}"
                         f" +/- {last['sigma2_sub_mc_se']:.2g})")
            if "sigma2_state" in last:
                body += f", state theory {last['sigma2_state']:.5g}"
        else:
            body = (f"sigma2 at max drive = {last['sigma2_state']:.5g} (state), "
                    f"{last['sigma2_analytic']:.5g} (analytic)")
    elif p == "phase_map":
        key = "psi_re_mc" if "psi_re_mc" in ok[0] else "psi_re_theory"
        vals = [r[key] for r in ok]
        body = f"Re Psi/P_avg spans [{min(vals):.4g}, {max(vals):.4g}] over {len(ok)} points"
    else:
        key = "n_dce_mc" if "n_dce_mc" in ok[0] else "n_dce"
        best = max(ok, key=lambda r: r[key])
        se = f" +/- {best[key + '_se']:.2g}" if key + "_se" in best else ""
        where = f"f_d = {best['f_d'] / 1e9:.4g} GHz, f_a = {best['f_analysis'] / 1e9:.4g} GHz"
        body = f"peak photon occupation {best[key]:.4g}{se} at {where}"
    return f"{p}: {body}{tail}"
