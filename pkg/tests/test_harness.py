"""Run configuration, sweep orchestration, and artifact handling."""

import dataclasses
import json
import math
import warnings

import numpy as np
import pytest

from coprop.harness import (
    DEFAULT_SWEEP_POWERS,
    ConfigError,
    RunDirectoryError,
    apply_desk_scale,
    build_payload,
    config_identity,
    enumerate_points,
    load_config,
    resolved_config,
    run_sweep,
)
from coprop.noise import thermal_occupation
from coprop.params import CBAND_FIRST_CHANNEL, CBAND_LAST_CHANNEL


def make_config(**over):
    """Desk-sized run: mean field, 10 steps, 2 trajectories.  Overridable."""
    data = {
        "n_zeta_steps": 10,
        "ensemble_size": 2,
        "quantum_noise": "off",
        "sweep": {"mode": "single"},
    }
    data.update(over)
    return load_config(data)


# ---------------------------------------------------------------------------
# configuration loading and validation


def test_empty_config_reproduces_testbed_defaults():
    cfg = load_config({})
    assert cfg.t0 == pytest.approx(math.sqrt(2.0) * 100e-12, rel=1e-12)
    assert cfg.beta2 == -1.8e-26
    assert cfg.gamma_nl == 7.8e-4
    assert cfg.alpha_amp == pytest.approx(0.2 * math.log(10) / 20.0 / 1000.0, rel=1e-12)
    assert cfg.temperature == 300.0
    assert cfg.fiber_length == 50e3
    assert cfg.mu == 0.4
    assert cfg.classical_power == 1e-3
    assert cfg.channel_spacing == pytest.approx(2.0 * math.pi * 100e9, rel=1e-12)
    assert (cfg.reference_channel, cfg.quantum_channel, cfg.classical_channel) == (38, 38, 39)
    assert cfg.bit_rate == 1.0e10 and cfg.roll_off == 0.25
    assert cfg.ensemble_size == 64
    assert cfg.quantum_noise == "full"
    assert cfg.kerr_noise_convention == "independent"
    assert cfg.n_zeta_steps == 2000
    assert cfg.sweep.mode == "channel"
    assert cfg.workers == 1


def test_unknown_keys_reported_with_paths():
    with pytest.raises(ConfigError) as err:
        load_config({"beta3": 0.0, "grid": {"n_tau": 4}, "sweep": {"stride": 2}})
    msg = str(err.value)
    assert "unknown key: beta3" in msg
    assert "unknown key: grid.n_tau" in msg
    assert "unknown key: sweep.stride" in msg


def test_structural_mismatches_reported():
    with pytest.raises(ConfigError) as err:
        load_config({"grid": 5, "t0": {"value": 1e-10}})
    msg = str(err.value)
    assert "grid must be an object" in msg
    assert "t0 must not be an object" in msg


def test_config_file_must_hold_object(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="root must be a JSON object"):
        load_config(path)


def test_classical_channel_may_not_equal_quantum():
    with pytest.raises(ConfigError, match="channel plan"):
        load_config({"classical_channel": 38})


def test_scalar_violations_collected_together():
    with pytest.raises(ConfigError) as err:
        load_config({
            "mu": -1.0, "ensemble_size": 0, "master_seed": -1,
            "kerr_noise_convention": "mixed", "quantum_noise": "some",
            "n_zeta_steps": 0, "iterations": 0, "snapshot_every": 0,
            "window_fraction": 0.0, "workers": 0,
        })
    msg = str(err.value)
    for needle in (
        "mu must be non-negative", "ensemble_size must be >= 1",
        "master_seed must be non-negative", "kerr_noise_convention",
        "quantum_noise", "n_zeta_steps must be >= 1",
        "iterations must be >= 1", "snapshot_every must be >= 1",
        "window_fraction", "workers must be >= 1",
    ):
        assert needle in msg


def test_sweep_entry_validation():
    with pytest.raises(ConfigError, match="sweep.mode"):
        load_config({"sweep": {"mode": "zigzag"}})
    with pytest.raises(ConfigError) as err:
        load_config({"sweep": {
            "mode": "channel", "channels": [15, 38, 39.0], "powers": [-1e-3]}})
    msg = str(err.value)
    assert "sweep channel 15 outside the C band" in msg
    assert "collides with the quantum channel" in msg
    assert "sweep channel 39.0 outside the C band" in msg  # must be an int
    assert "must be a non-negative number" in msg
    with pytest.raises(ConfigError, match="t0 value"):
        load_config({"sweep": {"mode": "pulse_width", "t0_values": [0.0]}})


def test_empty_axis_lists_rejected():
    with pytest.raises(ConfigError, match="sweep.channels must not be empty"):
        load_config({"sweep": {"mode": "channel", "channels": []}})
    with pytest.raises(ConfigError, match="sweep.powers must not be empty"):
        load_config({"sweep": {"mode": "power", "powers": []}})
    with pytest.raises(ConfigError, match="sweep.t0_values must not be empty"):
        load_config({"sweep": {"mode": "pulse_width", "t0_values": []}})


def test_inactive_sweep_axes_rejected():
    cases = [
        ({"mode": "single", "channels": [39]}, "sweep.channels"),
        ({"mode": "pulse_width", "powers": [1e-3]}, "sweep.powers"),
        ({"mode": "channel", "t0_values": [1e-10]}, "sweep.t0_values"),
        ({"mode": "colormap", "channels": [39]}, "sweep.channels"),
    ]
    for sweep, needle in cases:
        with pytest.raises(ConfigError) as err:
            load_config({"sweep": sweep})
        assert f"{needle} is not used by mode" in str(err.value)


def test_identity_ignores_execution_fields():
    a = load_config({"output_dir": "here", "workers": 4})
    b = load_config({"output_dir": "there", "workers": 1})
    assert config_identity(a) == config_identity(b)
    c = load_config({"master_seed": 7})
    assert config_identity(c) != config_identity(a)


def test_resolved_config_round_trips():
    cfg = make_config(classical_power=2e-3,
                      sweep={"mode": "channel", "channels": [37, 40]})
    replayed = load_config(json.loads(json.dumps(resolved_config(cfg))))
    assert config_identity(replayed) == config_identity(cfg)


# ---------------------------------------------------------------------------
# point enumeration and desk scaling


def test_enumerate_channel_defaults_cover_the_band():
    points = enumerate_points(load_config({}))
    assert len(points) == (CBAND_LAST_CHANNEL - CBAND_FIRST_CHANNEL + 1) - 1
    xs = [p.x for p in points]
    assert xs == sorted(xs)
    assert 38 not in xs  # quantum channel skipped
    assert all(p.label == "" and p.classical_power == 1e-3 for p in points)


def test_enumerate_channel_multi_power_labels_and_order():
    cfg = load_config({"sweep": {
        "mode": "channel", "channels": [40, 36], "powers": [1e-2, 1e-3]}})
    points = enumerate_points(cfg)
    assert [(p.label, p.x) for p in points] == [
        ("p1mW", 36), ("p1mW", 40), ("p10mW", 36), ("p10mW", 40)]
    assert [p.classical_power for p in points] == [1e-3, 1e-3, 1e-2, 1e-2]


def test_enumerate_power_defaults():
    points = enumerate_points(load_config({"sweep": {"mode": "power"}}))
    assert [p.label for p in points] == ["ch39"] * 4 + ["ch40"] * 4
    assert [p.x for p in points] == sorted(DEFAULT_SWEEP_POWERS) * 2
    assert all(p.x == p.classical_power for p in points)


def test_enumerate_pulse_width_defaults():
    cfg = load_config({"sweep": {"mode": "pulse_width"}})
    points = enumerate_points(cfg)
    expected = sorted(cfg.t0 * s for s in (1.0, 0.7, 0.5, 0.35, 0.25))
    assert [p.x for p in points] == expected
    assert all(p.t0 == p.x for p in points)
    assert points[-1].t0 == cfg.t0


def test_enumerate_colormap_and_single():
    points = enumerate_points(load_config({"sweep": {"mode": "colormap"}}))
    assert [p.x for p in points] == sorted(DEFAULT_SWEEP_POWERS)
    assert all(p.collect_snapshots for p in points)
    single = enumerate_points(make_config())
    assert len(single) == 1
    assert single[0].x == 39 and not single[0].collect_snapshots


def test_apply_desk_scale_clips_without_mutating():
    cfg = load_config({"ensemble_size": 64, "sweep": {
        "mode": "channel", "channels": [35, 44, 45]}})
    small = apply_desk_scale(cfg)
    assert small.ensemble_size == 16
    assert small.sweep.channels == [35, 44]  # channel 45 is beyond +-6
    assert cfg.ensemble_size == 64
    assert cfg.sweep.channels == [35, 44, 45]
    full = apply_desk_scale(load_config({}))
    assert full.sweep.channels == [ch for ch in range(32, 45) if ch != 38]
    power = apply_desk_scale(load_config({"ensemble_size": 8, "sweep": {"mode": "power"}}))
    assert power.ensemble_size == 8
    assert power.sweep.powers is None


# ---------------------------------------------------------------------------
# payload wiring


def test_payloads_share_grid_and_pairing_across_a_channel_sweep():
    cfg = make_config(sweep={"mode": "channel", "channels": [37, 39]})
    points = enumerate_points(cfg)
    shared = tuple(p.classical_channel for p in points)
    co = build_payload(cfg, points[0], shared_channels=shared)
    dark = build_payload(cfg, points[0], dark=True, shared_channels=shared)
    other = build_payload(cfg, points[1], shared_channels=shared)
    assert dark.launch.classical_power == 0.0
    assert co.launch.classical_power == cfg.classical_power
    # dark reference is reusable across channels and powers
    assert co.pairing_key() == dark.pairing_key() == other.pairing_key()
    assert co.grid.fingerprint() == other.grid.fingerprint()
    reseeded = dataclasses.replace(co, master_seed=cfg.master_seed + 1)
    assert reseeded.pairing_key() != co.pairing_key()


def test_noise_wiring_follows_quantum_noise_mode():
    cfg = make_config()
    point = enumerate_points(cfg)[0]
    quiet = build_payload(cfg, point)
    assert quiet.noise_config() is None
    assert quiet.engine_config(quiet.band_filter()).enforce_conjugate

    noisy_cfg = make_config(quantum_noise="full")
    noisy = build_payload(noisy_cfg, point)
    nc = noisy.noise_config()
    assert nc is not None
    assert nc.n_th == pytest.approx(
        thermal_occupation(noisy.units.omega0, noisy_cfg.temperature), rel=1e-12)
    assert nc.n0 == noisy.units.n0
    assert nc.master_seed == noisy_cfg.master_seed
    assert not noisy.engine_config(noisy.band_filter()).enforce_conjugate


# ---------------------------------------------------------------------------
# sweep execution (in memory)


def test_run_sweep_revalidates_config():
    cfg = make_config()
    cfg.ensemble_size = 0
    with pytest.raises(ConfigError, match="ensemble_size"):
        run_sweep(cfg)


def test_single_point_in_memory():
    cfg = make_config()
    res = run_sweep(cfg)
    assert res.out_dir is None
    assert len(res.rows) == 1
    row = res.rows[0]
    assert row.error is None
    assert math.isfinite(row.c) and row.c_stderr >= 0.0
    assert row.rms_co > 0.0 and row.rms_df > 0.0
    assert row.seed == cfg.master_seed
    assert res.colormaps == []
    assert res.manifest["config_identity"] == config_identity(cfg)
    assert res.manifest["outputs"] == ["results.csv"]


def test_degenerate_channel_sweep_matches_single_run():
    single = run_sweep(make_config()).rows[0]
    swept = run_sweep(make_config(
        sweep={"mode": "channel", "channels": [39]})).rows[0]
    assert (single.c, single.c_stderr, single.rms_co, single.rms_df) == \
           (swept.c, swept.c_stderr, swept.rms_co, swept.rms_df)


def test_rerun_is_bitwise_reproducible():
    cfg = make_config(quantum_noise="full", mu=50.0, n_zeta_steps=6,
                      ensemble_size=3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # 3 trajectories only
        a = run_sweep(cfg).rows[0]
        b = run_sweep(cfg).rows[0]
    assert a.error is None
    assert (a.c, a.c_stderr, a.rms_co, a.rms_df) == (b.c, b.c_stderr, b.rms_co, b.rms_df)


def test_zero_classical_power_gives_exact_unity():
    cfg = make_config(sweep={"mode": "power", "channels": [39], "powers": [0.0, 1e-3]})
    res = run_sweep(cfg)
    zero, lit = res.rows
    assert zero.x == 0.0
    assert zero.c == 1.0 and zero.c_stderr == 0.0  # co run IS the dark run
    assert zero.rms_co == zero.rms_df
    assert lit.c != 1.0


def test_crosstalk_approaches_unity_at_low_power():
    cfg = make_config(n_zeta_steps=100, sweep={
        "mode": "power", "channels": [39], "powers": [1e-5, 1e-3, 1e-1]})
    res = run_sweep(cfg)
    c = [row.c for row in res.rows]
    assert c[0] < c[1] < c[2]
    assert abs(c[0] - 1.0) < 1e-4
    assert c[2] > 1.005


def test_channel_separation_orders_class_means():
    cfg = make_config(n_zeta_steps=200, classical_power=1e-2, sweep={
        "mode": "channel", "channels": [36, 37, 39, 40]})
    res = run_sweep(cfg)
    c = {row.x: row.c for row in res.rows}
    adjacent = 0.5 * (c[37] + c[39])
    next_nearest = 0.5 * (c[36] + c[40])
    assert adjacent - next_nearest > 2e-4
    assert all(0.98 < v < 1.05 for v in c.values())


def test_distant_channels_stay_unperturbed():
    # band-edge carriers live on walk-off-sized windows that are not
    # commensurate with the symbol clock; the launch must still wrap cleanly
    cfg = make_config(n_zeta_steps=200, ensemble_size=1, sweep={
        "mode": "channel", "channels": [16, 59]})
    res = run_sweep(cfg)
    for row in res.rows:
        assert row.error is None
        assert abs(row.c - 1.0) < 0.01


# ---------------------------------------------------------------------------
# artifacts on disk


def test_artifact_layout_and_csv_format(tmp_path):
    cfg = make_config(sweep={"mode": "channel", "channels": [37, 39]})
    out = tmp_path / "run"
    res = run_sweep(cfg, out_dir=out)
    assert res.out_dir == out

    data = (out / "results.csv").read_bytes()
    assert data.count(b"\r\n") == 3  # header + 2 rows, RFC 4180 endings
    lines = data.decode().split("\r\n")
    assert lines[0] == "x,c,c_stderr,rms_co,rms_df,seed,walltime_s"
    first = lines[1].split(",")
    assert first[0] == "37"                  # integer x stays integral
    assert first[1] == repr(res.rows[0].c)   # floats round-trip exactly
    assert first[5] == str(cfg.master_seed)
    assert first[6] == ""                    # wall time never enters the CSV

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config_identity"] == config_identity(cfg)
    assert manifest["outputs"] == ["results.csv"]
    assert [r["x"] for r in manifest["rows"]] == [37, 39]
    assert config_identity(load_config(manifest["config"])) == manifest["config_identity"]

    timings = json.loads((out / "timings.json").read_text())
    assert set(timings["points_s"]) == {r.point_key for r in res.rows}
    assert timings["total_s"] > 0.0

    row_files = sorted(p.name for p in (out / "rows").iterdir())
    assert row_files == sorted(f"{r.point_key}.json" for r in res.rows)


def test_multi_power_channel_sweep_splits_csvs(tmp_path):
    cfg = make_config(sweep={
        "mode": "channel", "channels": [39], "powers": [1e-3, 1e-2]})
    out = tmp_path / "run"
    res = run_sweep(cfg, out_dir=out)
    assert sorted(res.manifest["outputs"]) == ["results_p10mW.csv", "results_p1mW.csv"]
    assert (out / "results_p1mW.csv").exists()
    assert (out / "results_p10mW.csv").exists()
    assert not (out / "results.csv").exists()


def test_resume_recomputes_only_missing_rows(tmp_path):
    cfg = make_config(sweep={"mode": "channel", "channels": [37, 39]})
    out = tmp_path / "run"
    first = run_sweep(cfg, out_dir=out)
    csv_bytes = (out / "results.csv").read_bytes()

    victim = first.rows[0].point_key
    (out / "rows" / f"{victim}.json").unlink()
    run_sweep(cfg, out_dir=out)
    assert (out / "results.csv").read_bytes() == csv_bytes
    timings = json.loads((out / "timings.json").read_text())
    assert list(timings["points_s"]) == [victim]  # only the missing row rebuilt

    third = run_sweep(cfg, out_dir=out)  # fully cached
    assert json.loads((out / "timings.json").read_text())["points_s"] == {}
    assert [r.c for r in third.rows] == [r.c for r in first.rows]


def test_run_directory_guardrails(tmp_path):
    out = tmp_path / "occupied"
    out.mkdir()
    (out / "notes.txt").write_text("hands off")
    cfg = make_config()
    with pytest.raises(RunDirectoryError, match="not a run directory"):
        run_sweep(cfg, out_dir=out)
    run_sweep(cfg, out_dir=out, force=True)

    other = make_config(master_seed=7)
    with pytest.raises(RunDirectoryError, match="different configuration"):
        run_sweep(other, out_dir=out)
    res = run_sweep(other, out_dir=out, force=True)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config_identity"] == config_identity(other)
    assert {p.stem for p in (out / "rows").iterdir()} == {r.point_key for r in res.rows}


def test_point_failures_recorded_and_sweep_continues(tmp_path):
    # the short pulse needs more than max_n_tau samples, the long one fits
    cfg = make_config(
        grid={"max_n_tau": 4096},
        sweep={"mode": "pulse_width",
               "t0_values": [2e-12, math.sqrt(2.0) * 100e-12]})
    out = tmp_path / "run"
    res = run_sweep(cfg, out_dir=out)
    bad, good = res.rows
    assert bad.x == 2e-12
    assert bad.error is not None and bad.error.startswith("GridSizeError")
    assert math.isnan(bad.c)
    assert good.error is None and math.isfinite(good.c)

    line = (out / "results.csv").read_bytes().decode().split("\r\n")[1].split(",")
    assert line[1] == "nan"
    cached = json.loads((out / "rows" / f"{bad.point_key}.json").read_text())
    assert cached["error"].startswith("GridSizeError")


def test_colormap_artifacts(tmp_path):
    cfg = make_config(snapshot_every=5,
                      sweep={"mode": "colormap", "powers": [0.0, 1e-3]})
    out = tmp_path / "run"
    res = run_sweep(cfg, out_dir=out)
    assert [c.label for c in res.colormaps] == ["p0mW", "p1mW"]
    assert res.rows[0].c == 1.0  # dark equals co at zero power

    cmap = res.colormaps[0]
    assert cmap.intensity.shape == (3, cmap.tau.size)  # steps 0, 5, 10
    assert cmap.zetas[0] == 0.0
    np.testing.assert_allclose(np.diff(cmap.zetas), cmap.zetas[1], rtol=1e-12)

    # vacuum pulse stays even in tau (index 0 is the unpaired edge sample)
    body = cmap.intensity[:, 1:]
    np.testing.assert_allclose(body, body[:, ::-1],
                               rtol=1e-8, atol=float(body.max()) * 1e-10)
    mid = cmap.tau.size // 2
    assert cmap.intensity[2, mid] < 0.2 * cmap.intensity[0, mid]  # 10 dB loss

    files = sorted(p.name for p in out.iterdir() if p.name.startswith("colormap"))
    assert files == ["colormap_p0mW.csv", "colormap_p1mW.csv"]
    matrix = (out / "colormap_p0mW.csv").read_bytes().decode().split("\r\n")
    header = matrix[0].split(",")
    assert header[0] == "zeta"
    assert len(header) == cmap.tau.size + 1
    assert len([row for row in matrix if row]) == 1 + cmap.zetas.size

    # a deleted matrix forces that point to recompute on resume
    (out / "colormap_p1mW.csv").unlink()
    run_sweep(cfg, out_dir=out)
    assert (out / "colormap_p1mW.csv").exists()


def test_worker_count_does_not_change_output_bytes(tmp_path):
    cfg = make_config(quantum_noise="full", mu=50.0,
                      n_zeta_steps=6, ensemble_size=3)
    d1, d2 = tmp_path / "w1", tmp_path / "w2"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # 3 trajectories only
        run_sweep(cfg, out_dir=d1, workers=1)
        run_sweep(cfg, out_dir=d2, workers=2)
    csv_bytes = (d1 / "results.csv").read_bytes()
    assert csv_bytes == (d2 / "results.csv").read_bytes()
    assert b"nan" not in csv_bytes
    assert (d1 / "manifest.json").read_bytes() == (d2 / "manifest.json").read_bytes()
