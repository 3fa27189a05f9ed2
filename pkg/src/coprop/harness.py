"""Run configuration, sweep drivers, ensemble execution, and artifact emission.

A run is a JSON config (defaults reproduce the standard testbed), one sweep
mode, and an output directory.  Every sweep point pairs a co-propagating
ensemble with a dark-fiber ensemble on the same seeds (common random
numbers); the dark reference is memoized because it is independent of the
classical channel and power.  Row artifacts are written per point, so an
interrupted sweep resumes by recomputing only the missing rows, and all
scientific outputs are byte-deterministic for a given config and seed,
whatever the worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .demux import (
    CrosstalkResult,
    EnsembleIntensity,
    crosstalk_ratio,
    quantum_band_filter,
)
from .engine import EngineConfig, propagate
from .noise import NoiseConfig, thermal_occupation
from .params import (
    CBAND_FIRST_CHANNEL,
    CBAND_LAST_CHANNEL,
    GridPolicy,
    PhysicalParams,
    ScaledUnits,
    SimulationGrid,
    WdmPlan,
    attenuation_from_db_per_km,
    build_grid,
    channel_wavelength,
    derive_scaled_units,
)
from .signals import LaunchSpec, QamConfig, compose_launch, make_launch_spec, qam16_waveform

CSV_HEADER = ["x", "c", "c_stderr", "rms_co", "rms_df", "seed", "walltime_s"]
SWEEP_MODES = ("single", "channel", "power", "pulse_width", "colormap")
NOISE_MODES = ("full", "off")
DEFAULT_SWEEP_POWERS = [1e-4, 1e-3, 1e-2, 1e-1]  # W


class ConfigError(ValueError):
    """Invalid or unknown configuration content; lists every violation."""


class RunDirectoryError(RuntimeError):
    """Output directory holds something this run must not overwrite."""


@dataclass
class GridOptions:
    """User-facing grid policy knobs (see params.GridPolicy)."""

    nyquist_factor: float = 1.5
    window_margin: float = 1.2
    pulse_spans: float = 8.0
    min_symbol_spans: float = 12.0
    min_window: float = 16.0
    signal_halfwidth: float = 4.0
    min_n_tau: int = 256
    max_n_tau: int = 1 << 22


@dataclass
class SweepSpec:
    """Which independent variable the run walks.  Exactly one mode is active."""

    mode: str = "channel"
    channels: list[int] | None = None
    powers: list[float] | None = None
    t0_values: list[float] | None = None


@dataclass
class RunConfig:
    """Full run description.  An empty JSON object reproduces the defaults."""

    # fiber and launch (SI units)
    t0: float = math.sqrt(2.0) * 100e-12
    beta2: float = -1.8e-26
    gamma_nl: float = 7.8e-4
    alpha_amp: float = attenuation_from_db_per_km(0.2)
    temperature: float = 300.0
    fiber_length: float = 50e3
    group_index: float = 1.468
    mu: float = 0.4
    classical_power: float = 1e-3

    # channel plan
    channel_spacing: float = 2.0 * math.pi * 100e9
    reference_channel: int = 38
    quantum_channel: int = 38
    classical_channel: int = 39

    # classical modulation
    bit_rate: float = 1.0e10
    roll_off: float = 0.25
    symbol_seed: int = 97
    n_symbols: int | None = None

    # stochastic setup
    ensemble_size: int = 64
    master_seed: int = 1546
    kerr_noise_convention: str = "independent"
    quantum_noise: str = "full"

    # numerics
    n_zeta_steps: int = 2000
    iterations: int = 4
    snapshot_every: int = 20
    window_fraction: float = 0.8
    grid: GridOptions = field(default_factory=GridOptions)

    # execution
    sweep: SweepSpec = field(default_factory=SweepSpec)
    output_dir: str = "coprop_run"
    workers: int = 1


def _merge_into(obj, data: dict, path: str, errors: list[str]) -> None:
    names = {f.name: f for f in dataclasses.fields(obj)}
    for key, value in data.items():
        if key not in names:
            errors.append(f"unknown key: {path}{key}")
            continue
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current) and isinstance(value, dict):
            _merge_into(current, value, f"{path}{key}.", errors)
        elif dataclasses.is_dataclass(current):
            errors.append(f"{path}{key} must be an object")
        elif isinstance(value, dict):
            errors.append(f"{path}{key} must not be an object")
        else:
            setattr(obj, key, value)


def validate_config(cfg: RunConfig) -> list[str]:
    """Collect every violation instead of stopping at the first."""
    errors: list[str] = []

    def check(fn, label):
        try:
            fn()
        except (ValueError, TypeError) as exc:
            errors.append(f"{label}: {exc}")

    check(lambda: PhysicalParams(
        t0=cfg.t0, beta2=cfg.beta2, gamma_nl=cfg.gamma_nl, alpha_amp=cfg.alpha_amp,
        temperature=cfg.temperature, fiber_length=cfg.fiber_length,
        group_index=cfg.group_index), "fiber parameters")
    check(lambda: WdmPlan(
        spacing=cfg.channel_spacing, reference_channel=cfg.reference_channel,
        quantum_channel=cfg.quantum_channel, classical_channel=cfg.classical_channel),
        "channel plan")
    check(lambda: QamConfig(
        bit_rate=cfg.bit_rate, roll_off=cfg.roll_off, symbol_seed=cfg.symbol_seed,
        n_symbols=cfg.n_symbols), "modulation")

    if cfg.mu < 0:
        errors.append("mu must be non-negative")
    if cfg.classical_power < 0:
        errors.append("classical_power must be non-negative")
    if cfg.ensemble_size < 1:
        errors.append("ensemble_size must be >= 1")
    if cfg.master_seed < 0:
        errors.append("master_seed must be non-negative")
    if cfg.kerr_noise_convention not in ("independent", "cross"):
        errors.append(f"kerr_noise_convention must be independent|cross, got {cfg.kerr_noise_convention!r}")
    if cfg.quantum_noise not in NOISE_MODES:
        errors.append(f"quantum_noise must be one of {NOISE_MODES}, got {cfg.quantum_noise!r}")
    if cfg.n_zeta_steps < 1:
        errors.append("n_zeta_steps must be >= 1")
    if cfg.iterations < 1:
        errors.append("iterations must be >= 1")
    if cfg.snapshot_every < 1:
        errors.append("snapshot_every must be >= 1")
    if not 0.0 < cfg.window_fraction <= 1.0:
        errors.append("window_fraction must lie in (0, 1]")
    if cfg.workers < 1:
        errors.append("workers must be >= 1")

    sw = cfg.sweep
    if sw.mode not in SWEEP_MODES:
        errors.append(f"sweep.mode must be one of {SWEEP_MODES}, got {sw.mode!r}")
    else:
        # one active sweep axis: reject lists the mode does not consume
        used = {
            "single": (),
            "channel": ("channels", "powers"),
            "power": ("channels", "powers"),
            "pulse_width": ("t0_values",),
            "colormap": ("powers",),
        }[sw.mode]
        for name in ("channels", "powers", "t0_values"):
            if getattr(sw, name) is not None and name not in used:
                errors.append(f"sweep.{name} is not used by mode {sw.mode!r}")
    if sw.channels is not None:
        if not sw.channels:
            errors.append("sweep.channels must not be empty")
        for ch in sw.channels or []:
            if not isinstance(ch, int) or not CBAND_FIRST_CHANNEL <= ch <= CBAND_LAST_CHANNEL:
                errors.append(f"sweep channel {ch!r} outside the C band")
            elif ch == cfg.quantum_channel:
                errors.append(
                    f"sweep channel {ch} collides with the quantum channel")
    if sw.powers is not None:
        if not sw.powers:
            errors.append("sweep.powers must not be empty")
        for p in sw.powers or []:
            if not isinstance(p, (int, float)) or p < 0:
                errors.append(f"sweep power {p!r} must be a non-negative number")
    if sw.t0_values is not None:
        if not sw.t0_values:
            errors.append("sweep.t0_values must not be empty")
        for t in sw.t0_values or []:
            if not isinstance(t, (int, float)) or t <= 0:
                errors.append(f"sweep t0 value {t!r} must be a positive number")
    return errors


def load_config(source: str | os.PathLike | dict) -> RunConfig:
    """Build a RunConfig from a JSON file path or a dict.

    Unknown keys anywhere in the tree are rejected; all violations are
    reported together.
    """
    if isinstance(source, dict):
        data = source
    else:
        with open(source, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    cfg = RunConfig()
    errors: list[str] = []
    _merge_into(cfg, data, "", errors)
    errors.extend(validate_config(cfg))
    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))
    return cfg


def resolved_config(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def config_identity(cfg: RunConfig) -> str:
    """Hash of everything that affects the science (not where/how it runs)."""
    resolved = resolved_config(cfg)
    resolved.pop("output_dir")
    resolved.pop("workers")
    payload = json.dumps(resolved, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# point resolution and ensemble execution


@dataclass(frozen=True)
class PointPayload:
    """Picklable work order for one ensemble (one sweep point, one role)."""

    params: PhysicalParams
    units: ScaledUnits
    plan: WdmPlan
    grid: SimulationGrid
    qam: QamConfig
    launch: LaunchSpec
    n_steps: int
    iterations: int
    quantum_noise: str
    kerr_convention: str
    master_seed: int
    ensemble_size: int
    snapshot_every: int | None = None

    def band_filter(self):
        return quantum_band_filter(self.grid, self.plan, self.params.t0)

    def noise_config(self) -> NoiseConfig | None:
        if self.quantum_noise == "off":
            return None
        n_th = thermal_occupation(self.units.omega0, self.params.temperature)
        return NoiseConfig(
            n_th=n_th,
            n0=self.units.n0,
            gamma_scaled=self.units.gamma_scaled,
            d_zeta=self.grid.d_zeta,
            d_tau=self.grid.d_tau,
            n_tau=self.grid.n_tau,
            master_seed=self.master_seed,
            kerr_convention=self.kerr_convention,
        )

    def engine_config(self, filt) -> EngineConfig:
        masks = (filt.mask, filt.mask_plus) if self.snapshot_every else None
        return EngineConfig(
            grid=self.grid,
            gamma_scaled=self.units.gamma_scaled,
            n_steps=self.n_steps,
            dispersion_sign=self.params.dispersion_sign,
            iterations=self.iterations,
            noise=self.noise_config(),
            enforce_conjugate=self.quantum_noise == "off",
            snapshot_every=self.snapshot_every,
            snapshot_masks=masks,
        )

    def pairing_key(self) -> str:
        """Identity of everything shared between a co run and its dark twin."""
        payload = json.dumps(
            {
                "grid": self.grid.fingerprint(),
                "steps": self.n_steps,
                "iterations": self.iterations,
                "mu": self.launch.mu,
                "t0": self.launch.t0,
                "omega_q": self.launch.omega_q,
                "quantum_offset": self.launch.quantum_offset,
                "spacing": self.plan.spacing,
                "seed": self.master_seed,
                "ensemble": self.ensemble_size,
                "noise": self.quantum_noise,
                "kerr": self.kerr_convention,
                "temperature": self.params.temperature,
                "gamma_scaled": self.units.gamma_scaled,
                "n0": self.units.n0,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _run_trajectory(payload: PointPayload, trajectory: int):
    from .demux import bandpass_extract  # local import keeps worker startup lean

    filt = payload.band_filter()
    qam = None
    if payload.launch.classical_power > 0:
        qam = qam16_waveform(
            payload.qam, payload.grid, payload.params.t0, trajectory=trajectory
        )
    pair = compose_launch(payload.launch, payload.params, payload.units, payload.grid, qam)
    record = propagate(pair, payload.engine_config(filt), trajectory=trajectory)
    extracted = bandpass_extract(record.final, filt)
    product = extracted.phi * extracted.phi_plus
    return product, record.snapshots, record.snapshot_zetas


def _trajectory_task(args):
    return _run_trajectory(*args)


@dataclass
class EnsembleOutput:
    intensity: EnsembleIntensity
    snapshots: np.ndarray | None = None       # trajectory-averaged, complex
    snapshot_zetas: np.ndarray | None = None


def run_ensemble(payload: PointPayload, workers: int = 1) -> EnsembleOutput:
    """Run all trajectories of one ensemble and reduce in trajectory order.

    Trajectories share no mutable state (noise streams are keyed by
    (seed, trajectory, step)), so the reduction is identical for any worker
    count.  A dark, noise-free ensemble has identical trajectories and is
    computed once.
    """
    n = payload.ensemble_size
    deterministic_dark = (
        payload.quantum_noise == "off" and payload.launch.classical_power == 0
    )
    if deterministic_dark:
        product, snaps, zetas = _run_trajectory(payload, 0)
        products = np.tile(product, (n, 1))
        results = None
    elif workers > 1 and n > 1:
        tasks = [(payload, t) for t in range(n)]
        with ProcessPoolExecutor(max_workers=min(workers, n)) as pool:
            results = list(pool.map(_trajectory_task, tasks))
    else:
        results = [_run_trajectory(payload, t) for t in range(n)]

    if results is not None:
        products = np.stack([r[0] for r in results])
        if results[0][1] is not None:
            snaps = np.mean(np.stack([r[1] for r in results]), axis=0)
            zetas = results[0][2]
        else:
            snaps = zetas = None

    intensity = EnsembleIntensity(
        products=products,
        tau=payload.grid.tau,
        pairing_key=payload.pairing_key(),
        master_seed=payload.master_seed,
    )
    return EnsembleOutput(intensity=intensity, snapshots=snaps, snapshot_zetas=zetas)


# ---------------------------------------------------------------------------
# sweep planning


@dataclass(frozen=True)
class PointDef:
    """One sweep point: the independent variable plus its overrides."""

    x: float
    label: str                 # CSV file group ("" -> results.csv)
    classical_channel: int
    classical_power: float
    t0: float
    collect_snapshots: bool = False

    def key(self, identity: str) -> str:
        payload = json.dumps(
            [identity, self.label, repr(self.x), self.classical_channel,
             repr(self.classical_power), repr(self.t0), self.collect_snapshots]
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _power_label(power: float) -> str:
    return f"p{power * 1e3:g}mW"


def enumerate_points(cfg: RunConfig) -> list[PointDef]:
    sw = cfg.sweep
    points: list[PointDef] = []
    if sw.mode == "single":
        points.append(PointDef(
            x=cfg.classical_channel, label="",
            classical_channel=cfg.classical_channel,
            classical_power=cfg.classical_power, t0=cfg.t0))
    elif sw.mode == "channel":
        channels = sorted(sw.channels or [
            ch for ch in range(CBAND_FIRST_CHANNEL, CBAND_LAST_CHANNEL + 1)
            if ch != cfg.quantum_channel
        ])
        powers = sorted(sw.powers or [cfg.classical_power])
        multi = len(powers) > 1
        for power in powers:
            label = _power_label(power) if multi else ""
            for ch in channels:
                points.append(PointDef(
                    x=ch, label=label, classical_channel=ch,
                    classical_power=power, t0=cfg.t0))
    elif sw.mode == "power":
        channels = sorted(sw.channels or [39, 40])
        powers = sorted(sw.powers or DEFAULT_SWEEP_POWERS)
        multi = len(channels) > 1
        for ch in channels:
            label = f"ch{ch}" if multi else ""
            for power in powers:
                points.append(PointDef(
                    x=power, label=label, classical_channel=ch,
                    classical_power=power, t0=cfg.t0))
    elif sw.mode == "pulse_width":
        t0_values = sorted(
            sw.t0_values or [cfg.t0 * s for s in (1.0, 0.7, 0.5, 0.35, 0.25)])
        for t0 in t0_values:
            points.append(PointDef(
                x=t0, label="", classical_channel=cfg.classical_channel,
                classical_power=cfg.classical_power, t0=t0))
    elif sw.mode == "colormap":
        powers = sorted(sw.powers or DEFAULT_SWEEP_POWERS)
        for power in powers:
            points.append(PointDef(
                x=power, label="", classical_channel=cfg.classical_channel,
                classical_power=power, t0=cfg.t0,
                collect_snapshots=True))
    else:
        raise ConfigError(f"unsupported sweep mode {sw.mode!r}")
    return points


def _shared_sweep_channels(cfg: RunConfig, points: list[PointDef]) -> tuple[int, ...]:
    """Channel sweeps share one grid sized for the farthest channel, so the
    dark-fiber reference is common to every point."""
    if cfg.sweep.mode in ("single", "channel"):
        return tuple(sorted({p.classical_channel for p in points}))
    return ()


def build_payload(
    cfg: RunConfig,
    point: PointDef,
    *,
    dark: bool = False,
    shared_channels: tuple[int, ...] = (),
) -> PointPayload:
    params = PhysicalParams(
        t0=point.t0, beta2=cfg.beta2, gamma_nl=cfg.gamma_nl, alpha_amp=cfg.alpha_amp,
        temperature=cfg.temperature, fiber_length=cfg.fiber_length,
        group_index=cfg.group_index)
    plan = WdmPlan(
        spacing=cfg.channel_spacing, reference_channel=cfg.reference_channel,
        quantum_channel=cfg.quantum_channel,
        classical_channel=point.classical_channel)
    units = derive_scaled_units(params, channel_wavelength(cfg.quantum_channel))
    qam = QamConfig(bit_rate=cfg.bit_rate, roll_off=cfg.roll_off,
                    symbol_seed=cfg.symbol_seed, n_symbols=cfg.n_symbols)
    policy = GridPolicy(
        nyquist_factor=cfg.grid.nyquist_factor,
        window_margin=cfg.grid.window_margin,
        pulse_spans=cfg.grid.pulse_spans,
        min_symbol_spans=cfg.grid.min_symbol_spans,
        min_window=cfg.grid.min_window,
        signal_halfwidth=cfg.grid.signal_halfwidth,
        min_n_tau=cfg.grid.min_n_tau,
        max_n_tau=cfg.grid.max_n_tau,
        n_zeta_steps=cfg.n_zeta_steps,
    )
    grid = build_grid(
        params, units, plan, policy,
        extra_channels=shared_channels,
        symbol_duration=1.0 / (qam.symbol_rate),
    )
    launch = make_launch_spec(
        params, plan, 0.0 if dark else point.classical_power, cfg.mu)
    return PointPayload(
        params=params, units=units, plan=plan, grid=grid, qam=qam, launch=launch,
        n_steps=cfg.n_zeta_steps, iterations=cfg.iterations,
        quantum_noise=cfg.quantum_noise,
        kerr_convention=cfg.kerr_noise_convention,
        master_seed=cfg.master_seed, ensemble_size=cfg.ensemble_size,
        snapshot_every=cfg.snapshot_every if point.collect_snapshots else None,
    )


# ---------------------------------------------------------------------------
# rows, sweep execution, artifacts


@dataclass
class SweepRow:
    """One CSV row.  walltime_s is telemetry and never enters the CSV
    (outputs must be byte-stable); see timings.json."""

    x: float
    c: float
    c_stderr: float
    rms_co: float
    rms_df: float
    seed: int
    walltime_s: float | None = None
    label: str = ""
    point_key: str = ""
    error: str | None = None

    def to_json(self) -> dict:
        return {
            "x": self.x, "c": self.c, "c_stderr": self.c_stderr,
            "rms_co": self.rms_co, "rms_df": self.rms_df, "seed": self.seed,
            "label": self.label, "point_key": self.point_key, "error": self.error,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SweepRow":
        return cls(**data)


@dataclass
class Colormap:
    """Ensemble-averaged quantum-band intensity vs (zeta, tau)."""

    zetas: np.ndarray
    tau: np.ndarray
    intensity: np.ndarray  # real, (n_zeta, n_tau)
    label: str


@dataclass
class SweepResult:
    rows: list[SweepRow]
    colormaps: list[Colormap]
    manifest: dict
    out_dir: Path | None = None


def _compute_point(
    cfg: RunConfig,
    point: PointDef,
    shared_channels: tuple[int, ...],
    dark_cache: dict[str, EnsembleIntensity],
    workers: int,
) -> tuple[CrosstalkResult, Colormap | None]:
    co_payload = build_payload(cfg, point, shared_channels=shared_channels)
    dark_payload = build_payload(cfg, point, dark=True, shared_channels=shared_channels)

    key = dark_payload.pairing_key()
    if key not in dark_cache:
        dark_cache[key] = run_ensemble(dark_payload, workers).intensity
    dark = dark_cache[key]

    co = run_ensemble(co_payload, workers)
    result = crosstalk_ratio(co.intensity, dark, cfg.window_fraction)

    cmap = None
    if point.collect_snapshots and co.snapshots is not None:
        cmap = Colormap(
            zetas=co.snapshot_zetas,
            tau=co_payload.grid.tau,
            intensity=np.real(co.snapshots),
            label=_power_label(point.classical_power),
        )
    return result, cmap


def run_sweep(
    cfg: RunConfig,
    *,
    out_dir: str | os.PathLike | None = None,
    workers: int | None = None,
    force: bool = False,
) -> SweepResult:
    """Execute (or resume) the configured sweep and write all artifacts.

    out_dir=None runs fully in memory (no files).  With an output directory,
    an existing manifest from the same config resumes the run; a different
    manifest or foreign content refuses unless force=True, and force also
    discards previous rows.
    """
    errors = validate_config(cfg)
    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))

    workers = workers if workers is not None else cfg.workers
    identity = config_identity(cfg)
    points = enumerate_points(cfg)
    shared = _shared_sweep_channels(cfg, points)

    out = Path(out_dir) if out_dir is not None else None
    rows_dir = None
    if out is not None:
        rows_dir = out / "rows"
        _prepare_out_dir(out, identity, force)
        rows_dir.mkdir(parents=True, exist_ok=True)

    dark_cache: dict[str, EnsembleIntensity] = {}
    rows: list[SweepRow] = []
    colormaps: list[Colormap] = []
    timings: dict[str, float] = {}

    for point in points:
        key = point.key(identity)
        row_path = rows_dir / f"{key}.json" if rows_dir is not None else None
        needs_matrix = point.collect_snapshots
        matrix_path = (
            out / _colormap_filename(point) if (out is not None and needs_matrix) else None
        )
        if (
            row_path is not None
            and row_path.exists()
            and (matrix_path is None or matrix_path.exists())
        ):
            with open(row_path, "r", encoding="utf-8") as fh:
                rows.append(SweepRow.from_json(json.load(fh)))
            continue

        start = time.perf_counter()
        try:
            result, cmap = _compute_point(cfg, point, shared, dark_cache, workers)
            row = SweepRow(
                x=point.x, c=result.c, c_stderr=result.standard_error,
                rms_co=result.rms_co, rms_df=result.rms_df,
                seed=cfg.master_seed, label=point.label, point_key=key)
            if cmap is not None:
                colormaps.append(cmap)
                if matrix_path is not None:
                    _write_colormap(matrix_path, cmap)
        except Exception as exc:  # point failure: record and continue
            row = SweepRow(
                x=point.x, c=float("nan"), c_stderr=float("nan"),
                rms_co=float("nan"), rms_df=float("nan"),
                seed=cfg.master_seed, label=point.label, point_key=key,
                error=f"{type(exc).__name__}: {exc}")
        row.walltime_s = time.perf_counter() - start
        timings[key] = row.walltime_s
        rows.append(row)
        if row_path is not None:
            _atomic_write_json(row_path, row.to_json())

    manifest = {
        "config": resolved_config(cfg),
        "config_identity": identity,
        "version": _package_version(),
        "rows": [
            {"point_key": r.point_key, "x": r.x, "label": r.label, "seed": r.seed}
            for r in rows
        ],
        "outputs": sorted({_csv_filename(r.label) for r in rows}
                          | {_colormap_filename(p) for p in points if p.collect_snapshots}),
    }

    if out is not None:
        _emit_csvs(out, rows)
        _atomic_write_json(out / "manifest.json", manifest)
        _atomic_write_json(out / "timings.json",
                           {"points_s": timings, "total_s": sum(timings.values())})
    return SweepResult(rows=rows, colormaps=colormaps, manifest=manifest, out_dir=out)


def _package_version() -> str:
    from . import __version__

    return __version__


def _prepare_out_dir(out: Path, identity: str, force: bool) -> None:
    manifest_path = out / "manifest.json"
    if not out.exists():
        out.mkdir(parents=True)
        return
    if manifest_path.exists():
        with open(manifest_path, "r", encoding="utf-8") as fh:
            previous = json.load(fh)
        if previous.get("config_identity") != identity:
            if not force:
                raise RunDirectoryError(
                    f"{out} holds a run with a different configuration; "
                    "pass force to overwrite")
            _clear_run_outputs(out)
        elif force:
            _clear_run_outputs(out)
        return
    if any(out.iterdir()) and not force:
        raise RunDirectoryError(
            f"{out} exists and is not a run directory; pass force to overwrite")


def _clear_run_outputs(out: Path) -> None:
    rows_dir = out / "rows"
    if rows_dir.exists():
        for p in rows_dir.iterdir():
            p.unlink()
    for p in out.iterdir():
        if p.is_file() and (p.suffix in (".csv", ".json")):
            p.unlink()


def _atomic_write_json(path: Path, payload: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def _csv_filename(label: str) -> str:
    return f"results_{label}.csv" if label else "results.csv"


def _colormap_filename(point: PointDef) -> str:
    return f"colormap_{_power_label(point.classical_power)}.csv"


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _emit_csvs(out: Path, rows: list[SweepRow]) -> None:
    groups: dict[str, list[SweepRow]] = {}
    for row in rows:
        groups.setdefault(row.label, []).append(row)
    for label, group in groups.items():
        path = out / _csv_filename(label)
        tmp = path.with_suffix(".csv.tmp")
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)  # CRLF line endings per RFC 4180
            writer.writerow(CSV_HEADER)
            for row in group:
                writer.writerow([
                    _fmt(row.x), _fmt(row.c), _fmt(row.c_stderr),
                    _fmt(row.rms_co), _fmt(row.rms_df), row.seed, "",
                ])
        os.replace(tmp, path)


def _write_colormap(path: Path, cmap: Colormap) -> None:
    tmp = path.with_suffix(".csv.tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["zeta"] + [_fmt(float(t)) for t in cmap.tau])
        for z, row in zip(cmap.zetas, cmap.intensity):
            writer.writerow([_fmt(float(z))] + [_fmt(float(v)) for v in row])
    os.replace(tmp, path)


def apply_desk_scale(cfg: RunConfig) -> RunConfig:
    """Shrink a run to desk scale: at most +-6 channels around the quantum
    channel and 16 trajectories."""
    cfg = dataclasses.replace(
        cfg,
        grid=dataclasses.replace(cfg.grid),
        sweep=dataclasses.replace(cfg.sweep),
    )
    cfg.ensemble_size = min(cfg.ensemble_size, 16)
    if cfg.sweep.mode == "channel":
        lo = max(CBAND_FIRST_CHANNEL, cfg.quantum_channel - 6)
        hi = min(CBAND_LAST_CHANNEL, cfg.quantum_channel + 6)
        channels = cfg.sweep.channels or [
            ch for ch in range(CBAND_FIRST_CHANNEL, CBAND_LAST_CHANNEL + 1)
            if ch != cfg.quantum_channel
        ]
        cfg.sweep.channels = [ch for ch in channels if lo <= ch <= hi]
    return cfg
