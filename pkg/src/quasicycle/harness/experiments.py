"""Experiment orchestration: coupling sweeps, raster runs, phase snapshots and
single-oscillator runs.

Every experiment returns plain column tables (ordered dicts of equal-length
arrays) ready for :func:`quasicycle.harness.io.emit_csv`, plus whatever the
plotting layer needs. Randomness is keyed by (sweep point, realization,
oscillator, source), so the same config and seed give the same tables
regardless of ``threads``.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .. import model
from ..config import NetworkConfig
from ..errors import OutOfRange
from ..metrics import N_BINS, metrics_table, phase_histogram, power_spectrum, sync_membership
from ..network import run_realization, run_realizations
from ..processes import (
    reconstruct_vstar,
    simulate_full_model,
    simulate_ou2d,
    simulate_polar,
)
from ..sde import RngStream, Source, TimeGrid, stream_id

__all__ = [
    "SweepResult",
    "RasterResult",
    "SingleResult",
    "sweep_points",
    "run_sweep_point",
    "run_sweep",
    "frequency_classes",
    "run_raster",
    "snapshot_table",
    "run_phase_snapshots",
    "run_single",
    "CLASS_NAMES",
]

CLASS_NAMES = ("extreme", "central", "middle")


# ---------------------------------------------------------------- sweeps


@dataclass
class SweepResult:
    """Aggregate rows (one per N and coupling norm), per-realization rows and
    the sampled natural frequencies."""

    table: dict
    realizations: dict
    frequencies: dict
    wall_seconds: float = 0.0


def sweep_points(config: NetworkConfig):
    """``(point, n, coupling_norm)`` for every grid point, in output order."""
    if not config.coupling_norm_values:
        raise ValueError("coupling_norm_values is empty")
    norms = config.coupling_norm_values
    return [
        (i * len(norms) + j, n, float(c))
        for i, n in enumerate(config.n_values)
        for j, c in enumerate(norms)
    ]


def run_sweep_point(config: NetworkConfig, point: int, n: int, norm: float) -> dict:
    """All realizations of one grid point; returns per-realization columns."""
    res = run_realizations(config, range(config.realizations), n=n, coupling_norm=norm, point=point)
    window = res.rho[config.burn_in + 1 :]
    return {
        "point": point,
        "n": n,
        "coupling_norm": norm,
        "rho_bar": res.rho_bar,
        "rho_sd": window.std(axis=0),
        "omega": res.omega,
    }


def _point_job(args):
    return run_sweep_point(*args)


def run_sweep(config: NetworkConfig, threads: int = 1) -> SweepResult:
    """Mean and sample standard deviation of the time-averaged PLI across
    realizations, for every N in ``n_values`` and every coupling norm.

    Grid points run in parallel when ``threads > 1``; results are merged in
    grid order, so output does not depend on scheduling.
    """
    start = time.perf_counter()
    jobs = [(config, p, n, c) for p, n, c in sweep_points(config)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_point_job, jobs))
    else:
        parts = [_point_job(j) for j in jobs]

    agg = {k: [] for k in ("n", "coupling_norm", "realizations", "rho_bar_mean", "rho_bar_sd",
                           "rho_bar_min", "rho_bar_max")}
    per = {k: [] for k in ("n", "coupling_norm", "realization", "rho_bar", "rho_sd",
                           "omega_mean", "omega_sd")}
    freq = {k: [] for k in ("n", "coupling_norm", "realization", "oscillator", "omega")}
    for part in parts:
        rb = part["rho_bar"]
        r = len(rb)
        agg["n"].append(part["n"])
        agg["coupling_norm"].append(part["coupling_norm"])
        agg["realizations"].append(r)
        agg["rho_bar_mean"].append(float(rb.mean()))
        agg["rho_bar_sd"].append(float(rb.std(ddof=1)) if r > 1 else 0.0)
        agg["rho_bar_min"].append(float(rb.min()))
        agg["rho_bar_max"].append(float(rb.max()))
        for i in range(r):
            w = part["omega"][i]
            per["n"].append(part["n"])
            per["coupling_norm"].append(part["coupling_norm"])
            per["realization"].append(i)
            per["rho_bar"].append(float(rb[i]))
            per["rho_sd"].append(float(part["rho_sd"][i]))
            per["omega_mean"].append(float(w.mean()))
            per["omega_sd"].append(float(w.std()))
            for j, wj in enumerate(w.tolist()):
                freq["n"].append(part["n"])
                freq["coupling_norm"].append(part["coupling_norm"])
                freq["realization"].append(i)
                freq["oscillator"].append(j)
                freq["omega"].append(wj)
    return SweepResult(agg, per, freq, time.perf_counter() - start)


# ---------------------------------------------------------------- raster


def frequency_classes(omega, mean: float, sd: float, clip_sds: float) -> np.ndarray:
    """Label each natural frequency ``extreme``, ``central`` or ``middle``.

    The clipped range ``mean +/- clip_sds*sd`` is cut into 20 equal bins. The
    two outermost bins on each side are extreme; the two most populated of the
    remaining bins (lowest index on ties) are central; everything else is
    middle.
    """
    omega = np.asarray(omega, dtype=float)
    lo, hi = mean - clip_sds * sd, mean + clip_sds * sd
    if hi > lo:
        k = np.clip(np.floor((omega - lo) / (hi - lo) * N_BINS).astype(int), 0, N_BINS - 1)
    else:
        k = np.full(omega.shape, N_BINS // 2)
    counts = np.bincount(k, minlength=N_BINS)
    inner = np.arange(2, N_BINS - 2)
    order = inner[np.argsort(-counts[inner], kind="stable")]
    central = set(order[:2].tolist())
    labels = np.full(omega.shape, "middle", dtype=object)
    labels[np.isin(k, [0, 1, N_BINS - 2, N_BINS - 1])] = "extreme"
    labels[np.isin(k, sorted(central))] = "central"
    return labels


@dataclass
class RasterResult:
    """Synchronous-group membership of one realization.

    ``membership`` has shape (steps + 1, N) with columns ordered by ascending
    natural frequency (``order`` maps column to oscillator index).
    """

    t: np.ndarray
    order: np.ndarray
    omega: np.ndarray
    membership: np.ndarray
    metrics: dict
    classes: np.ndarray
    burn_in: int
    coupling_norm: float
    theta: np.ndarray = field(repr=False, default=None)
    z: np.ndarray = field(repr=False, default=None)

    def membership_fraction(self) -> np.ndarray:
        """Fraction of post-burn-in steps each (sorted) oscillator spends in the group."""
        return self.membership[self.burn_in + 1 :].mean(axis=0)

    def class_occupancy(self) -> dict:
        """Mean membership fraction over the members of each frequency class."""
        frac = self.membership_fraction()
        return {c: float(frac[self.classes == c].mean()) for c in CLASS_NAMES
                if np.any(self.classes == c)}

    def time_averaged(self, column: str) -> float:
        return float(np.mean(self.metrics[column][self.burn_in + 1 :]))

    def membership_table(self) -> dict:
        cols = {"step": np.arange(len(self.t)), "t": self.t}
        width = len(str(len(self.order) - 1))
        for col in range(len(self.order)):
            cols[f"osc_{col:0{width}d}"] = self.membership[:, col].astype(np.int64)
        return cols

    def oscillator_table(self) -> dict:
        return {
            "rank": np.arange(len(self.order)),
            "oscillator": self.order,
            "omega": self.omega[self.order],
            "frequency_class": list(self.classes),
            "membership_fraction": self.membership_fraction(),
        }


def run_raster(
    config: NetworkConfig, coupling_norm: Optional[float] = None, realization: int = 0
) -> RasterResult:
    norm = config.coupling_norm if coupling_norm is None else coupling_norm
    res = run_realization(config, realization, coupling_norm=norm, record="full")
    theta = res.run.theta[:, 0, :]
    z = res.run.z[:, 0, :]
    omega = res.omega[0]
    order = np.argsort(omega, kind="stable")
    member = sync_membership(theta)
    table = metrics_table(res.run.t, theta, z, omega)
    classes = frequency_classes(omega[order], config.omega_mean, config.omega_sd, config.clip_sds)
    return RasterResult(
        t=res.run.t, order=order, omega=omega, membership=member[:, order], metrics=table,
        classes=classes, burn_in=config.burn_in, coupling_norm=res.coupling_norm,
        theta=theta, z=z,
    )


# ---------------------------------------------------------------- snapshots


def snapshot_table(t, theta, snapshot_times: Sequence[float], window: float) -> dict:
    """Phase histograms averaged over ``[t_s, t_s + window)`` for each snapshot.

    A zero window (or one too short to contain a sample) uses the single frame
    nearest ``t_s``. Besides the averaged counts, ``frame_peak_mean`` and
    ``frame_peak_max`` give the mean and largest single-frame peak bin count in
    the window; a rotating cluster is smeared over several bins by the
    average but not in individual frames.
    """
    t = np.asarray(t, dtype=float)
    theta = np.asarray(theta, dtype=float)
    dt = t[1] - t[0] if len(t) > 1 else 0.0
    tol = 1e-9 * max(dt, 1.0)
    cols = {"time": [], "frames": [], "rho": [], "frame_peak_mean": [], "frame_peak_max": []}
    bins = {f"bin_{k:02d}": [] for k in range(N_BINS)}
    for ts in snapshot_times:
        if not t[0] - tol <= ts <= t[-1] + tol:
            raise OutOfRange(f"snapshot time {ts} outside the run [{t[0]}, {t[-1]}]")
        sel = np.flatnonzero((t >= ts - tol) & (t < ts + window - tol)) if window > 0 else []
        if len(sel) == 0:
            sel = [int(np.argmin(np.abs(t - ts)))]
        frames = theta[sel]
        per_frame = phase_histogram(frames)
        hist = per_frame.mean(axis=0)
        peaks = per_frame.max(axis=-1)
        cols["time"].append(float(ts))
        cols["frames"].append(len(sel))
        cols["rho"].append(float(np.abs(np.exp(1j * frames).mean(axis=-1)).mean()))
        cols["frame_peak_mean"].append(float(peaks.mean()))
        cols["frame_peak_max"].append(int(peaks.max()))
        for k in range(N_BINS):
            bins[f"bin_{k:02d}"].append(float(hist[k]))
    cols.update(bins)
    return cols


def run_phase_snapshots(
    config: NetworkConfig,
    coupling_norm: Optional[float] = None,
    snapshot_times: Optional[Sequence[float]] = None,
    window: Optional[float] = None,
    realization: int = 0,
) -> dict:
    times = config.snapshot_times if snapshot_times is None else tuple(snapshot_times)
    window = config.snapshot_window if window is None else window
    duration = config.dt * config.n_steps
    for ts in times:
        if not 0 <= ts <= duration:
            raise OutOfRange(f"snapshot time {ts} outside the run duration {duration}")
    norm = config.coupling_norm if coupling_norm is None else coupling_norm
    res = run_realization(config, realization, coupling_norm=norm, record="full")
    return snapshot_table(res.run.t, res.run.theta[:, 0, :], times, window)


# ---------------------------------------------------------------- single oscillator


@dataclass
class SingleResult:
    """Paths and spectra of one oscillator at the default parameters."""

    path: dict
    spectrum: dict
    derived: model.DerivedParams
    peak_full_hz: float
    peak_vstar_hz: float


def run_single(
    config: NetworkConfig,
    params: model.EIParams = model.RESULTS_PARAMS,
    realization: int = 0,
    duration: Optional[float] = None,
) -> SingleResult:
    """Full E-I model, its rotating OU reconstruction and the polar amplitude
    and phase, all on the same grid.

    The full model and the reconstruction both start at the origin; the polar
    pair starts from a uniform amplitude on (0, 1] and phase on (-pi, pi].
    """
    duration = config.single_duration if duration is None else duration
    d = model.derive(params)
    grid = TimeGrid(config.dt, int(round(duration / config.dt)))

    def stream(src):
        return RngStream(config.seed, stream_id(0, realization, 0, src))

    full = simulate_full_model(params, grid, [stream(Source.FULL_E), stream(Source.FULL_I)])
    ou = simulate_ou2d(grid.scaled(d.lam), [stream(Source.OU_1), stream(Source.OU_2)])
    vstar = reconstruct_vstar(ou, d, grid)
    z0 = 1.0 - float(stream(Source.INIT_AMPLITUDE).generator.random())
    phi0 = math.pi - 2.0 * math.pi * float(stream(Source.INIT_PHASE).generator.random())
    polar = simulate_polar(
        d, grid, [stream(Source.PHASE), stream(Source.AMPLITUDE)], z0, phi0,
        amplitude_rescale=config.amplitude_rescale, floor=config.epsilon_floor,
        drift_time_scaling=config.drift_time_scaling,
    )
    path = {
        "t": grid.times,
        "v_e": full["v_e"],
        "v_i": full["v_i"],
        "v_e_star": vstar["v_e"],
        "v_i_star": vstar["v_i"],
        "z": polar["z"],
        "phi": polar["phi"],
        "theta": polar["theta"],
    }
    f, p_full = power_spectrum(full["v_e"], grid.dt)
    _, p_star = power_spectrum(vstar["v_e"], grid.dt)
    spectrum = {"frequency_hz": f, "power_full": p_full, "power_vstar": p_star}
    pos = f > 0
    return SingleResult(
        path=path,
        spectrum=spectrum,
        derived=d,
        peak_full_hz=float(f[pos][np.argmax(p_full[pos])]),
        peak_vstar_hz=float(f[pos][np.argmax(p_star[pos])]),
    )
