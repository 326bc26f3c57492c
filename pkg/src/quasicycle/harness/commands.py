"""Run an experiment and write its files into an output directory.

Each command writes its CSV tables, an SVG figure and ``config.echo``. The
echo holds every config value (the seed included), so feeding it back through
``--config`` reproduces the CSV files byte for byte. Wall-clock time and RNG
details go in its comment lines.
"""
from __future__ import annotations

import platform
import time
from pathlib import Path

import numpy as np

from .. import __version__
from ..config import NetworkConfig, echo_config
from . import experiments, plotting
from .io import emit_csv

__all__ = ["write_echo", "sweep", "raster", "snapshots", "single", "RNG_PROVENANCE"]

RNG_PROVENANCE = (
    "numpy Philox, one stream per (seed, point<<48 | realization<<32 | oscillator<<8 | source) "
    "via SeedSequence(seed, spawn_key=(stream_id,))"
)


def write_echo(cfg: NetworkConfig, out: Path, command: str, wall_seconds: float) -> Path:
    extra = {
        "command": command,
        "version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "rng": RNG_PROVENANCE,
        "wall_seconds": f"{wall_seconds:.3f}",
    }
    path = Path(out) / "config.echo"
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        path.write_text(echo_config(cfg, extra))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def sweep(cfg: NetworkConfig, out, threads: int = 1, figure: bool = True) -> list:
    out = Path(out)
    start = time.perf_counter()
    res = experiments.run_sweep(cfg, threads=threads)
    paths = [
        emit_csv(res.table, out / "sweep.csv"),
        emit_csv(res.realizations, out / "sweep_realizations.csv"),
        emit_csv(res.frequencies, out / "frequencies.csv"),
    ]
    if figure:
        paths.append(plotting.sweep_figure(res.table, out / "sweep.svg"))
    paths.append(write_echo(cfg, out, "sweep", time.perf_counter() - start))
    return paths


def raster(cfg: NetworkConfig, out, figure: bool = True) -> list:
    out = Path(out)
    start = time.perf_counter()
    res = experiments.run_raster(cfg)
    paths = [
        emit_csv(res.membership_table(), out / "raster.csv"),
        emit_csv(res.metrics, out / "metrics.csv"),
        emit_csv(res.oscillator_table(), out / "oscillators.csv"),
    ]
    if figure:
        paths.append(plotting.raster_figure(res, out / "raster.svg"))
    paths.append(write_echo(cfg, out, "raster", time.perf_counter() - start))
    return paths


def snapshots(cfg: NetworkConfig, out, figure: bool = True) -> list:
    out = Path(out)
    start = time.perf_counter()
    table = experiments.run_phase_snapshots(cfg)
    paths = [emit_csv(table, out / "snapshots.csv")]
    if figure:
        paths.append(plotting.snapshots_figure(table, out / "snapshots.svg"))
    paths.append(write_echo(cfg, out, "snapshots", time.perf_counter() - start))
    return paths


def single(cfg: NetworkConfig, out, figure: bool = True) -> list:
    out = Path(out)
    start = time.perf_counter()
    res = experiments.run_single(cfg)
    d = res.derived
    summary = {
        "quantity": ["lambda", "omega_d", "sigma", "q_norm", "peak_full_hz", "peak_vstar_hz",
                     "omega_d_hz"],
        "value": [d.lam, d.omega_d, d.sigma, d.q_norm, res.peak_full_hz, res.peak_vstar_hz,
                  d.omega_d / (2 * np.pi)],
    }
    paths = [
        emit_csv(res.path, out / "single.csv"),
        emit_csv(res.spectrum, out / "spectrum.csv"),
        emit_csv(summary, out / "single_summary.csv"),
    ]
    if figure:
        paths.append(plotting.single_figure(res, out / "single.svg"))
    paths.append(write_echo(cfg, out, "single", time.perf_counter() - start))
    return paths
