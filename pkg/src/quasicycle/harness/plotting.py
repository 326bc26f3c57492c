"""Figures rendered to SVG with matplotlib.

Output is byte-deterministic for identical input: the SVG id salt is fixed,
text is emitted as text rather than glyph paths, and the date metadata is
dropped. Each sweep curve carries the gid ``sweep-N<n>`` so tools can find it.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..metrics import N_BINS  # noqa: E402

__all__ = ["sweep_figure", "raster_figure", "snapshots_figure", "single_figure", "save_svg"]

_RC = {
    "svg.hashsalt": "quasicycle",
    "svg.fonttype": "none",
    "figure.dpi": 100,
    "font.size": 9,
}

_CLASS_COLORS = {"extreme": (0.85, 0.1, 0.1), "central": (0.1, 0.25, 0.85), "middle": (0.1, 0.6, 0.2)}


def save_svg(fig, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def sweep_figure(table: dict, path) -> Path:
    """Mean time-averaged PLI against coupling norm, one curve per N, with a
    +/- one standard deviation band."""
    n_col = np.asarray(table["n"])
    c_col = np.asarray(table["coupling_norm"], dtype=float)
    m_col = np.asarray(table["rho_bar_mean"], dtype=float)
    s_col = np.asarray(table["rho_bar_sd"], dtype=float)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        for n in sorted(set(n_col.tolist())):
            sel = n_col == n
            order = np.argsort(c_col[sel], kind="stable")
            c, m, s = c_col[sel][order], m_col[sel][order], s_col[sel][order]
            (line,) = ax.plot(c, m, marker="o", ms=3, label=f"N = {n}")
            line.set_gid(f"sweep-N{n}")
            ax.fill_between(c, m - s, m + s, alpha=0.15, color=line.get_color(), lw=0)
        ax.set_xscale("symlog", linthresh=1.0)
        ax.set_xlabel("coupling norm ||C||")
        ax.set_ylabel("mean time-averaged PLI")
        ax.set_ylim(0, 1.02)
        ax.grid(alpha=0.3)
        if len(n_col):
            ax.legend(loc="upper left")
        fig.tight_layout()
        return save_svg(fig, path)


def raster_figure(raster, path) -> Path:
    """Membership raster coloured by frequency class, PLI, and group versus
    population means of natural frequency and amplitude."""
    t = raster.t
    m = raster.metrics
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(2, 2, figsize=(10, 7))
        img = np.ones(raster.membership.T.shape + (3,))
        for col, cls in enumerate(raster.classes):
            img[col, raster.membership[:, col]] = _CLASS_COLORS[cls]
        ax = axes[0, 0]
        ax.imshow(img, aspect="auto", origin="lower", interpolation="nearest",
                  extent=(t[0], t[-1], -0.5, len(raster.order) - 0.5))
        ax.set_xlabel("time (s)")
        ax.set_ylabel("oscillator (ascending natural frequency)")
        ax.set_title(f"synchronous-group membership, ||C|| = {raster.coupling_norm:g}")

        ax = axes[0, 1]
        ax.plot(t, m["rho"], lw=0.6)
        ax.set_ylim(0, 1)
        ax.set_xlabel("time (s)")
        ax.set_ylabel("PLI")

        for ax, key, label in (
            (axes[1, 0], "omega", "natural frequency (rad/s)"),
            (axes[1, 1], "z", "amplitude"),
        ):
            ax.plot(t, m[f"pop_mean_{key}"], lw=0.8, color="k", label="population")
            ax.plot(t, m[f"group_mean_{key}"], lw=0.4, color="tab:red", alpha=0.7, label="group")
            ax.set_xlabel("time (s)")
            ax.set_ylabel(f"mean {label}")
            ax.legend(loc="upper right")
        fig.tight_layout()
        return save_svg(fig, path)


def snapshots_figure(table: dict, path) -> Path:
    times = list(table["time"])
    k = len(times)
    cols = min(4, max(k, 1))
    rows = max(1, -(-k // cols))
    centers = -np.pi + (np.arange(N_BINS) + 0.5) * 2 * np.pi / N_BINS
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(rows, cols, figsize=(2.6 * cols, 2.2 * rows), squeeze=False)
        top = max([max(table[f"bin_{b:02d}"][i] for b in range(N_BINS)) for i in range(k)] + [1])
        for i, ax in enumerate(axes.ravel()):
            if i >= k:
                ax.set_visible(False)
                continue
            counts = [table[f"bin_{b:02d}"][i] for b in range(N_BINS)]
            ax.bar(centers, counts, width=2 * np.pi / N_BINS * 0.9)
            ax.set_xlim(-np.pi, np.pi)
            ax.set_ylim(0, top * 1.05)
            ax.set_title(f"t = {times[i]:g} s, PLI {table['rho'][i]:.2f}")
            ax.set_xlabel("phase (rad)")
        fig.tight_layout()
        return save_svg(fig, path)


def single_figure(single, path, show_seconds: float = 0.5) -> Path:
    """Voltage traces of the full model and its reconstruction, amplitude and
    phase slip, and both power spectra."""
    p = single.path
    t = p["t"]
    sel = t <= show_seconds
    sp = single.spectrum
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(2, 2, figsize=(10, 6))
        ax = axes[0, 0]
        ax.plot(t[sel], p["v_e"][sel], lw=0.5, label="full model")
        ax.plot(t[sel], p["v_e_star"][sel], lw=0.5, label="reconstruction")
        ax.set_xlabel("time (s)")
        ax.set_ylabel("excitatory voltage (mV)")
        ax.legend(loc="upper right")
        ax = axes[0, 1]
        ax.plot(t, p["z"], lw=0.5)
        ax.set_xlabel("time (s)")
        ax.set_ylabel("amplitude Z")
        ax = axes[1, 0]
        ax.plot(t, p["phi"], lw=0.5)
        ax.set_xlabel("time (s)")
        ax.set_ylabel("phase slip (rad)")
        ax = axes[1, 1]
        f = sp["frequency_hz"]
        keep = (f > 0) & (f <= 250)
        ax.semilogy(f[keep], sp["power_full"][keep], lw=0.7, label="full model")
        ax.semilogy(f[keep], sp["power_vstar"][keep], lw=0.7, label="reconstruction")
        ax.axvline(single.derived.omega_d / (2 * np.pi), color="k", lw=0.5, ls="--")
        ax.set_xlabel("frequency (Hz)")
        ax.set_ylabel("power (mV^2/Hz)")
        ax.legend(loc="upper right")
        fig.tight_layout()
        return save_svg(fig, path)
