"""Synchronization and spectral measurements.

Phases may be unwrapped; everything here wraps them as needed. Functions
that take a phase vector treat the last axis as the oscillator axis and
broadcast over any leading (time, realization) axes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import EmptyInput, InsufficientData

__all__ = [
    "N_BINS",
    "MetricsFrame",
    "pli",
    "wrap_phase",
    "phase_bins",
    "phase_histogram",
    "synchronous_group",
    "sync_membership",
    "group_stats",
    "circular_mean",
    "metrics_frame",
    "metrics_table",
    "power_spectrum",
    "peak_frequency",
]

N_BINS = 20
_BIN_WIDTH = 2 * np.pi / N_BINS


@dataclass
class MetricsFrame:
    t: float
    rho: float
    psi: float
    bin_counts: np.ndarray
    sync_group: np.ndarray
    group_mean_omega: float
    group_mean_z: float
    group_mean_theta: float


def pli(theta):
    """Phase-locking index and mean phase, ``rho e^{i psi} = mean(e^{i theta})``.

    psi is 0 when the resultant vanishes exactly.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1:] == (0,) or theta.ndim == 0:
        raise EmptyInput("phase vector is empty")
    m = np.exp(1j * theta).mean(axis=-1)
    rho = np.minimum(np.abs(m), 1.0)
    psi = np.where(m == 0, 0.0, np.angle(m))
    if np.ndim(rho) == 0:
        return float(rho), float(psi)
    return rho, psi


def wrap_phase(theta):
    """Wrap to [-pi, pi)."""
    return np.mod(np.asarray(theta, dtype=float) + np.pi, 2 * np.pi) - np.pi


def phase_bins(theta):
    """Bin index in 0..19 of each phase; bin k covers [-pi + k pi/10, -pi + (k+1) pi/10)."""
    shifted = np.mod(np.asarray(theta, dtype=float) + np.pi, 2 * np.pi)
    k = np.floor(shifted / _BIN_WIDTH).astype(np.int64)
    # mod can round up to exactly 2*pi for inputs just below a multiple of it
    return np.clip(k, 0, N_BINS - 1)


def phase_histogram(theta):
    """Counts per phase bin along the last axis, shape ``(..., 20)``."""
    bins = phase_bins(theta)
    if bins.ndim == 1:
        return np.bincount(bins, minlength=N_BINS)
    lead = bins.shape[:-1]
    flat = bins.reshape(-1, bins.shape[-1])
    offs = (np.arange(flat.shape[0]) * N_BINS)[:, None]
    counts = np.bincount((flat + offs).ravel(), minlength=flat.shape[0] * N_BINS)
    return counts.reshape(lead + (N_BINS,))


def sync_membership(theta):
    """Boolean mask of the most populated bin (lowest index on ties), per frame."""
    bins = phase_bins(theta)
    counts = phase_histogram(theta)
    best = np.argmax(counts, axis=-1)
    return bins == np.expand_dims(best, -1)


def synchronous_group(theta) -> np.ndarray:
    """Indices of the oscillators in the most populated of the 20 phase bins."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1:
        raise ValueError("synchronous_group takes a single phase vector")
    if theta.size == 0:
        raise EmptyInput("phase vector is empty")
    return np.flatnonzero(sync_membership(theta))


def circular_mean(theta, weights=None, axis=-1):
    m = np.exp(1j * np.asarray(theta, dtype=float))
    if weights is not None:
        m = np.where(weights, m, 0)
    s = m.sum(axis=axis)
    return np.where(s == 0, 0.0, np.angle(s))


def group_stats(group, state):
    """Mean natural frequency, mean amplitude and circular mean phase of a group."""
    group = np.asarray(group, dtype=np.int64)
    if group.size == 0:
        raise EmptyInput("synchronous group is empty")
    return (
        float(np.mean(state.omega[group])),
        float(np.mean(state.z[group])),
        float(circular_mean(state.theta[group])),
    )


def metrics_frame(t, state) -> MetricsFrame:
    rho, psi = pli(state.theta)
    group = synchronous_group(state.theta)
    mw, mz, mth = group_stats(group, state)
    return MetricsFrame(t, rho, psi, phase_histogram(state.theta), group, mw, mz, mth)


def metrics_table(t, theta, z, omega) -> dict:
    """Per-frame metrics of a recorded trajectory as named columns.

    ``theta`` and ``z`` have shape ``(T, N)``; ``omega`` has shape ``(N,)``.
    Group means use the synchronous group of each frame; population means
    use all oscillators.
    """
    theta = np.asarray(theta, dtype=float)
    z = np.asarray(z, dtype=float)
    omega = np.asarray(omega, dtype=float)
    rho, psi = pli(theta)
    member = sync_membership(theta)
    size = member.sum(axis=-1)
    counts = phase_histogram(theta)
    cols = {
        "t": np.asarray(t, dtype=float),
        "rho": rho,
        "psi": psi,
        "group_size": size,
        "group_mean_omega": (member * omega).sum(axis=-1) / size,
        "group_mean_z": (member * z).sum(axis=-1) / size,
        "group_mean_theta": circular_mean(theta, member),
        "pop_mean_omega": np.full(len(rho), omega.mean()),
        "pop_mean_z": z.mean(axis=-1),
        "pop_mean_theta": circular_mean(theta),
    }
    for k in range(N_BINS):
        cols[f"bin_{k:02d}"] = counts[:, k]
    return cols


def power_spectrum(x, dt: float, segment: int = 8192):
    """Averaged periodogram: Hann-tapered, mean-removed segments with 50% overlap.

    Returns (frequency in Hz, one-sided power density per Hz). Segments are
    shortened to the series length when the series is shorter than
    ``segment``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) < 256:
        raise InsufficientData(f"need a 1-D series of at least 256 samples, got {x.shape}")
    nper = min(segment, len(x))
    f, p = signal.welch(
        x, fs=1.0 / dt, window="hann", nperseg=nper, noverlap=nper // 2,
        detrend="constant", scaling="density",
    )
    return f, p


def peak_frequency(f, p) -> float:
    pos = f > 0
    return float(f[pos][np.argmax(p[pos])])
