import re

import numpy as np
import pytest

from quasicycle.config import NetworkConfig, load_config
from quasicycle.errors import OutOfRange
from quasicycle.harness import cli, commands, experiments, plotting
from quasicycle.harness.io import emit_csv, format_value, read_csv
from quasicycle.harness.validation import phase_slip_regression, transition_norm

TINY = NetworkConfig(
    n=12, n_values=(2, 6), coupling_norm=300.0, coupling_norm_values=(0.0, 50.0, 2000.0),
    n_steps=600, burn_in=300, realizations=3, snapshot_times=(0.0, 0.01, 0.025),
    snapshot_window=2e-3, single_duration=0.2,
)


# ---------------------------------------------------------------- CSV


def test_empty_table_writes_header_only(tmp_path):
    p = emit_csv({"a": [], "b": []}, tmp_path / "e.csv")
    assert p.read_bytes() == b"a,b\n"


def test_csv_float_round_trip_and_line_endings(tmp_path):
    x = np.array([0.1, 1 / 3, -2.5e-300, 6.02214076e23, 437.72])
    p = emit_csv({"i": np.arange(5), "x": x, "flag": np.array([True, False, True, True, False])},
                 tmp_path / "r.csv")
    raw = p.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    back = read_csv(p)
    assert np.array_equal(back["x"], x)
    assert back["flag"].tolist() == [1, 0, 1, 1, 0]
    assert raw.splitlines()[1] == b"0,0.10000000000000001,1"


def test_format_value():
    assert format_value(3) == "3"
    assert format_value(np.int64(-4)) == "-4"
    assert format_value(0.5) == "0.5"
    assert format_value("middle") == "middle"


def test_csv_rejects_ragged_columns(tmp_path):
    with pytest.raises(ValueError):
        emit_csv({"a": [1, 2], "b": [1]}, tmp_path / "x.csv")


def test_csv_error_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        emit_csv({"a": [1]}, blocker / "sub" / "x.csv")


# ---------------------------------------------------------------- SVG


def _fake_sweep(n_values=(2, 10, 66, 100), norms=np.geomspace(1, 2e4, 12)):
    tab = {"n": [], "coupling_norm": [], "rho_bar_mean": [], "rho_bar_sd": []}
    for n in n_values:
        for c in norms:
            tab["n"].append(n)
            tab["coupling_norm"].append(float(c))
            tab["rho_bar_mean"].append(float(1 / (1 + n * 30 / c)))
            tab["rho_bar_sd"].append(0.02)
    return tab


def test_sweep_svg_has_one_curve_per_n(tmp_path):
    text = plotting.sweep_figure(_fake_sweep(), tmp_path / "s.svg").read_text()
    gids = re.findall(r'id="(sweep-N\d+)"', text)
    assert sorted(gids) == ["sweep-N10", "sweep-N100", "sweep-N2", "sweep-N66"]
    assert "coupling norm" in text


def test_svg_is_byte_deterministic(tmp_path):
    a = plotting.sweep_figure(_fake_sweep(), tmp_path / "a.svg").read_bytes()
    b = plotting.sweep_figure(_fake_sweep(), tmp_path / "b.svg").read_bytes()
    assert a == b


def test_empty_sweep_figure(tmp_path):
    p = plotting.sweep_figure({"n": [], "coupling_norm": [], "rho_bar_mean": [], "rho_bar_sd": []},
                              tmp_path / "empty.svg")
    assert p.exists()


# ---------------------------------------------------------------- experiments


def test_sweep_table_shape_and_stats():
    res = experiments.run_sweep(TINY)
    assert len(res.table["n"]) == 2 * 3
    assert len(res.realizations["n"]) == 2 * 3 * 3
    assert len(res.frequencies["omega"]) == 3 * 3 * (2 + 6)
    per = np.array(res.realizations["rho_bar"]).reshape(6, 3)
    np.testing.assert_allclose(res.table["rho_bar_mean"], per.mean(axis=1))
    np.testing.assert_allclose(res.table["rho_bar_sd"], per.std(axis=1, ddof=1))


def test_sweep_requires_grid():
    with pytest.raises(ValueError):
        experiments.sweep_points(TINY.replace(coupling_norm_values=()))


def test_sweep_threads_do_not_change_output(tmp_path):
    commands.sweep(TINY, tmp_path / "one", threads=1, figure=False)
    commands.sweep(TINY, tmp_path / "two", threads=2, figure=False)
    for name in ("sweep.csv", "sweep_realizations.csv", "frequencies.csv"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_frequency_classes():
    # 20 bins of width 0.3 over 437.72 +/- 3
    lo = 437.72 - 3
    centers = lo + 0.3 * (np.arange(20) + 0.5)
    omega = np.concatenate([centers, [centers[9]] * 3, [centers[12]] * 2, [centers[5]] * 1])
    labels = experiments.frequency_classes(omega, 437.72, 1.0, 3.0)
    assert set(labels[[0, 1, 18, 19]]) == {"extreme"}
    assert labels[9] == "central" and labels[12] == "central"
    # bin 5 ties bin 12 on count; the lower index wins
    omega2 = np.concatenate([centers, [centers[9]] * 3, [centers[12]] * 2, [centers[5]] * 2])
    lab2 = experiments.frequency_classes(omega2, 437.72, 1.0, 3.0)
    assert lab2[5] == "central" and lab2[12] == "middle"
    assert sum(lab2[:20] == "middle") == 14


def test_raster_bookkeeping():
    r = experiments.run_raster(TINY)
    assert r.membership.shape == (TINY.n_steps + 1, TINY.n)
    assert np.array_equal(r.membership.sum(axis=1), r.metrics["group_size"])
    assert np.all(np.diff(r.omega[r.order]) >= 0)
    tab = r.membership_table()
    assert len(tab) == 2 + TINY.n
    occ = r.class_occupancy()
    assert set(occ) <= {"extreme", "central", "middle"}
    assert all(0 <= v <= 1 for v in occ.values())


def test_raster_zero_coupling_no_dominant_class():
    r = experiments.run_raster(NetworkConfig(seed=0), coupling_norm=0.0)
    assert max(r.class_occupancy().values()) <= 0.6


def test_raster_strong_coupling_group_frequency_bias():
    r = experiments.run_raster(NetworkConfig(seed=0), coupling_norm=4950.0)
    assert r.time_averaged("group_mean_omega") > r.time_averaged("pop_mean_omega")


def test_snapshot_window_and_single_frame():
    r = experiments.run_raster(TINY)
    t, th = r.t, r.theta
    tab0 = experiments.snapshot_table(t, th, [0.01], 0.0)
    assert tab0["frames"] == [1]
    k = int(round(0.01 / TINY.dt))
    expected = np.bincount(np.clip(np.floor((np.mod(th[k] + np.pi, 2 * np.pi)) / (np.pi / 10)).astype(int), 0, 19),
                           minlength=20)
    assert [tab0[f"bin_{b:02d}"][0] for b in range(20)] == expected.tolist()
    tabw = experiments.snapshot_table(t, th, [0.01], 2e-3)
    assert tabw["frames"] == [int(round(2e-3 / TINY.dt))]
    assert sum(tabw[f"bin_{b:02d}"][0] for b in range(20)) == pytest.approx(TINY.n)


def test_snapshot_out_of_range():
    with pytest.raises(OutOfRange):
        experiments.run_phase_snapshots(TINY, snapshot_times=[1.0])


def test_earliest_snapshot_near_uniform():
    tab = experiments.run_phase_snapshots(NetworkConfig(seed=0))
    first = np.array([tab[f"bin_{b:02d}"][0] for b in range(20)])
    assert first.max() / first.min() < 4


def test_single_run_spectra_peak_near_natural_frequency():
    res = experiments.run_single(NetworkConfig(seed=0))
    assert abs(res.peak_full_hz - 69.66) <= 3
    assert abs(res.peak_vstar_hz - 69.66) <= 3
    assert len(res.path["t"]) == 80_001


# ---------------------------------------------------------------- analysis helpers


def test_transition_norm_interpolates_on_log_scale():
    norms = [0.0, 1.0, 10.0, 100.0, 1000.0]
    means = [0.1, 0.1, 0.1, 0.5, 0.9]
    # halfway between 0.1 and 0.9 is 0.5, reached exactly at 100
    assert transition_norm(norms, means) == pytest.approx(100.0)
    assert transition_norm(norms, [0.1, 0.1, 0.1, 0.3, 0.9]) == pytest.approx(10 ** (7 / 3))


def test_phase_slip_regression_recovers_known_slope():
    rng = np.random.default_rng(0)
    z = rng.uniform(0.5, 3.0, 200_001)
    dphi = 0.01 * rng.standard_normal(200_000) / z[:-1]
    slope, corr = phase_slip_regression(z, np.concatenate([[0.0], np.cumsum(dphi)]))
    assert slope == pytest.approx(1e-4, rel=0.05)
    assert corr > 0


# ---------------------------------------------------------------- commands and CLI


def test_commands_write_expected_files(tmp_path):
    commands.sweep(TINY, tmp_path)
    commands.raster(TINY, tmp_path)
    commands.snapshots(TINY, tmp_path)
    for name in ("sweep.csv", "sweep.svg", "raster.csv", "metrics.csv", "snapshots.csv", "config.echo"):
        assert (tmp_path / name).exists(), name


def test_config_echo_reproduces_outputs(tmp_path):
    commands.sweep(TINY, tmp_path / "a", figure=False)
    commands.raster(TINY, tmp_path / "a", figure=False)
    echoed = load_config(tmp_path / "a" / "config.echo")
    assert echoed == TINY
    commands.sweep(echoed, tmp_path / "b", figure=False)
    commands.raster(echoed, tmp_path / "b", figure=False)
    for name in ("sweep.csv", "raster.csv", "metrics.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_different_seed_changes_output(tmp_path):
    commands.sweep(TINY, tmp_path / "a", figure=False)
    commands.sweep(TINY.replace(seed=1), tmp_path / "b", figure=False)
    assert (tmp_path / "a" / "sweep.csv").read_bytes() != (tmp_path / "b" / "sweep.csv").read_bytes()


def _write_tiny_config(path):
    from quasicycle.config import echo_config

    path.write_text(echo_config(TINY))
    return path


def test_cli_sweep_with_overrides(tmp_path, capsys):
    cfg = _write_tiny_config(tmp_path / "tiny.cfg")
    out = tmp_path / "out"
    code = cli.main(["--config", str(cfg), "--seed", "42", "--out", str(out), "--set", "realizations=2",
                     "--no-figures", "sweep"])
    assert code == 0
    echoed = load_config(out / "config.echo")
    assert echoed.seed == 42 and echoed.realizations == 2
    assert "sweep.csv" in capsys.readouterr().out


def test_cli_snapshots_and_single(tmp_path):
    cfg = _write_tiny_config(tmp_path / "tiny.cfg")
    assert cli.main(["--config", str(cfg), "--out", str(tmp_path / "s"), "snapshots"]) == 0
    assert cli.main(["--config", str(cfg), "--out", str(tmp_path / "o"), "single"]) == 0
    assert (tmp_path / "s" / "snapshots.svg").exists()
    assert (tmp_path / "o" / "single.csv").exists()


def test_cli_validate_subset(tmp_path, capsys):
    assert cli.main(["--out", str(tmp_path), "validate", "--only", "1,2"]) == 0
    out = capsys.readouterr().out
    assert "[PASS]  1" in out and "[PASS]  2" in out
    assert read_csv(tmp_path / "validate.csv")["passed"].tolist() == [1, 1]


def test_cli_reports_config_errors(tmp_path, capsys):
    assert cli.main(["--out", str(tmp_path), "--set", "dt=-1", "sweep"]) == 2
    assert "dt must be > 0" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        cli.main(["--seed", "-3", "sweep"])
