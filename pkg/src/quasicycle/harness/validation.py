"""Invariant and acceptance checks, runnable from the CLI or from tests.

Each check takes a base :class:`NetworkConfig` (only its seed and numeric
settings are used) and returns a :class:`CheckResult`. Thresholds are fixed
here, not configurable, because they define what passing means.
"""
from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import stats

from .. import model
from ..config import NetworkConfig
from ..errors import NotOscillatory
from ..metrics import metrics_table, power_spectrum
from ..network import run_realization, run_realizations
from ..processes import reconstruct_vstar, simulate_full_model, simulate_ou2d, simulate_polar
from ..sde import RngStream, Source, TimeGrid, stream_id
from . import commands, experiments

__all__ = ["CheckResult", "CHECKS", "run_checks", "transition_norm", "phase_slip_regression"]


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f} s)"


# ---------------------------------------------------------------- helpers


def transition_norm(norms, means) -> float:
    """Coupling norm where the mean PLI curve first reaches halfway between its
    zero-coupling value and its maximum, interpolated on log(norm).

    Used as the location of the steepest rise of a sigmoidal curve sampled on
    a logarithmic grid.
    """
    norms = np.asarray(norms, dtype=float)
    means = np.asarray(means, dtype=float)
    order = np.argsort(norms, kind="stable")
    norms, means = norms[order], means[order]
    target = 0.5 * (means[0] + means.max())
    k = int(np.argmax(means >= target))
    if k == 0:
        return float(norms[0])
    c0, c1, m0, m1 = norms[k - 1], norms[k], means[k - 1], means[k]
    frac = (target - m0) / (m1 - m0) if m1 != m0 else 1.0
    if c0 <= 0:
        return float(c0 + frac * (c1 - c0))
    return float(math.exp(math.log(c0) + frac * (math.log(c1) - math.log(c0))))


def phase_slip_regression(z, phi, n_bins: int = 20):
    """Slope through the origin of per-bin Var(dphi) against per-bin mean 1/Z^2.

    Samples are binned by the amplitude at the start of each step into
    equal-count bins. Returns (slope, corr(|dphi|, 1/Z)).
    """
    z0 = np.asarray(z, dtype=float)[:-1]
    dphi = np.diff(np.asarray(phi, dtype=float))
    order = np.argsort(z0, kind="stable")
    x, y = [], []
    for part in np.array_split(order, n_bins):
        x.append(np.mean(1.0 / z0[part] ** 2))
        y.append(np.var(dphi[part]))
    x, y = np.array(x), np.array(y)
    slope = float(np.dot(x, y) / np.dot(x, x))
    corr = float(np.corrcoef(np.abs(dphi), 1.0 / z0)[0, 1])
    return slope, corr


def _stream(seed, realization, src, point=0):
    return RngStream(seed, stream_id(point, realization, 0, src))


# ---------------------------------------------------------------- checks


def check_parameter_algebra(cfg: NetworkConfig) -> CheckResult:
    d = model.derive(model.RESULTS_PARAMS)
    got = {
        "lambda": d.lam, "omega_d": d.omega_d, "sigma": d.sigma,
        "ratio": d.ratio, "q_norm": d.q_norm,
    }
    want = {
        "lambda": (8.333, 1e-3), "omega_d": (437.72, 0.01), "sigma": (6.85, 0.01),
        "ratio": (0.019, 1e-3), "q_norm": (703.5, 0.5),
    }
    ok = all(abs(got[k] - v) <= tol for k, (v, tol) in want.items())
    detail = ", ".join(f"{k}={got[k]:.5g}" for k in got)
    return CheckResult(1, "parameter algebra", ok, detail, got)


def _random_params(rng):
    return model.EIParams(
        s_ee=rng.uniform(0.0, 3.0), s_ei=rng.uniform(0.2, 3.0), s_ie=rng.uniform(0.5, 6.0),
        s_ii=rng.uniform(0.0, 2.0), tau_e=rng.uniform(0.002, 0.01), tau_i=rng.uniform(0.002, 0.02),
        sigma_e=rng.uniform(1.0, 20.0), sigma_i=rng.uniform(1.0, 20.0),
    )


def check_canonical_form(cfg: NetworkConfig, count: int = 1000) -> CheckResult:
    """Admissible means complex eigenvalues with positive damping."""
    rng = RngStream(cfg.seed, stream_id(0, 0, 0, 0xFF)).generator
    worst, n = 0.0, 0
    while n < count:
        p = _random_params(rng)
        try:
            d = model.derive(p)
        except NotOscillatory:
            continue
        if not d.lam > 0:
            continue
        q = d.q_matrix
        resid = np.linalg.solve(q, -model.drift_matrix(p) @ q) - model.canonical_form(p)
        worst = max(worst, float(np.abs(resid).max()))
        n += 1
    return CheckResult(2, "canonical form", worst < 1e-9,
                       f"max residual {worst:.3g} over {count} parameter sets", {"max": worst})


def check_ou_radial_law(cfg: NetworkConfig, dt: float = 0.01, samples: int = 4_000_000,
                        burn: int = 1000) -> CheckResult:
    grid = TimeGrid(dt, samples + burn)
    path = simulate_ou2d(grid, [_stream(cfg.seed, 0, Source.OU_1), _stream(cfg.seed, 0, Source.OU_2)])
    s = path.values[burn + 1 :]
    radial = float(np.hypot(s[:, 0], s[:, 1]).mean())
    var = s.var(axis=0)
    target = math.sqrt(math.pi) / 2
    ok = abs(radial / target - 1) <= 0.02 and bool(np.all(np.abs(var / 0.5 - 1) <= 0.03))
    detail = f"mean|S|={radial:.4f} (target {target:.4f}), var=({var[0]:.4f}, {var[1]:.4f})"
    return CheckResult(3, "OU radial law", ok, detail,
                       {"radial_mean": radial, "var1": float(var[0]), "var2": float(var[1])})


def check_phase_slip_law(cfg: NetworkConfig, n_steps: int = 1_000_000) -> CheckResult:
    d = model.derive(model.RESULTS_PARAMS)
    grid = TimeGrid(cfg.dt, n_steps)
    path = simulate_polar(
        d, grid, [_stream(cfg.seed, 0, Source.PHASE), _stream(cfg.seed, 0, Source.AMPLITUDE)],
        z0=1.0, phi0=0.0, amplitude_rescale=cfg.amplitude_rescale, floor=cfg.epsilon_floor,
    )
    slope, corr = phase_slip_regression(path["z"], path["phi"])
    expected = d.lam * cfg.dt
    ok = abs(slope / expected - 1) <= 0.2 and corr > 0
    detail = f"slope={slope:.4g} (lam*dt={expected:.4g}, ratio {slope / expected:.3f}), corr={corr:.3f}"
    return CheckResult(4, "phase-slip law", ok, detail, {"slope": slope, "corr": corr})


def check_spectral_agreement(cfg: NetworkConfig, seeds: int = 5, duration: float = 4.0) -> CheckResult:
    p = model.RESULTS_PARAMS
    d = model.derive(p)
    grid = TimeGrid(cfg.dt, int(round(duration / cfg.dt)))
    peaks = []
    for k in range(seeds):
        seed = cfg.seed + k
        full = simulate_full_model(p, grid, [_stream(seed, 0, Source.FULL_E), _stream(seed, 0, Source.FULL_I)])
        ou = simulate_ou2d(grid.scaled(d.lam), [_stream(seed, 0, Source.OU_1), _stream(seed, 0, Source.OU_2)])
        vstar = reconstruct_vstar(ou, d, grid)
        for x in (full["v_e"], vstar["v_e"]):
            f, pw = power_spectrum(x, grid.dt)
            pos = f > 0
            peaks.append(float(f[pos][np.argmax(pw[pos])]))
    ok = all(abs(f - 69.66) <= 3.0 for f in peaks)
    detail = "peaks (Hz, full/reconstruction per seed): " + " ".join(f"{f:.2f}" for f in peaks)
    return CheckResult(5, "spectral agreement", ok, detail, {"peaks": peaks})


def check_zero_coupling(cfg: NetworkConfig) -> CheckResult:
    base = NetworkConfig(seed=cfg.seed)
    r = range(base.realizations)
    m100 = float(run_realizations(base, r, n=100, coupling_norm=0.0, point=0).rho_bar.mean())
    m2 = float(run_realizations(base, r, n=2, coupling_norm=0.0, point=1).rho_bar.mean())
    ok = 0.07 <= m100 <= 0.11 and 0.58 <= m2 <= 0.70
    return CheckResult(6, "zero-coupling baseline", ok,
                       f"N=100 mean rho_bar={m100:.4f} in [0.07, 0.11]; N=2 {m2:.4f} in [0.58, 0.70]",
                       {"n100": m100, "n2": m2})


def check_sync_transition(cfg: NetworkConfig, threads: int = 1) -> CheckResult:
    base = NetworkConfig(seed=cfg.seed, n_values=(10, 66, 100))
    res = experiments.run_sweep(base, threads=threads)
    n_col = np.asarray(res.table["n"])
    c_col = np.asarray(res.table["coupling_norm"])
    m_col = np.asarray(res.table["rho_bar_mean"])
    parts, locs, ok = [], [], True
    for n in base.n_values:
        sel = n_col == n
        c, m = c_col[sel], m_col[sel]
        rho_s = float(stats.spearmanr(c, m).statistic)
        top = float(m[np.argmax(c)])
        zero = float(m[np.argmin(c)])
        loc = transition_norm(c, m)
        locs.append(loc)
        ok &= rho_s >= 0.9 and top > 0.9 and top > zero
        parts.append(f"N={n}: spearman={rho_s:.3f}, rho_bar(0)={zero:.3f}, "
                     f"rho_bar({c.max():g})={top:.3f}, half-rise at {loc:.4g}")
    ok &= all(a < b for a, b in zip(locs, locs[1:]))
    return CheckResult(7, "synchronization transition", bool(ok), "; ".join(parts),
                       {"table": res.table, "locations": locs})


@lru_cache(maxsize=4)
def _operating_point(seed: int):
    """Per-realization summaries at N=100, ||C||=4950, one realization at a time."""
    base = NetworkConfig(seed=seed, n=100, coupling_norm=4950.0)
    rows = []
    for r in range(base.realizations):
        res = run_realization(base, r, record="full")
        tab = metrics_table(res.run.t, res.run.theta[:, 0], res.run.z[:, 0], res.omega[0])
        w = slice(base.burn_in + 1, None)
        rows.append((
            float(res.rho_bar[0]),
            float(tab["group_mean_omega"][w].mean()), float(tab["pop_mean_omega"][w].mean()),
            float(tab["group_mean_z"][w].mean()), float(tab["pop_mean_z"][w].mean()),
        ))
    return np.array(rows)


def check_operating_point(cfg: NetworkConfig) -> CheckResult:
    rows = _operating_point(cfg.seed)
    rb = rows[:, 0]
    hits = int(np.sum(rb > 0.8))
    return CheckResult(8, "strong-coupling operating point", hits >= 8,
                       f"{hits}/10 realizations with rho_bar > 0.8 (need >= 8); rho_bar = "
                       + " ".join(f"{x:.3f}" for x in rb), {"rho_bar": rb.tolist()})


def check_group_bias(cfg: NetworkConfig) -> CheckResult:
    rows = _operating_point(cfg.seed)
    p_w = float(stats.ttest_rel(rows[:, 1], rows[:, 2], alternative="greater").pvalue)
    p_z = float(stats.ttest_rel(rows[:, 3], rows[:, 4], alternative="greater").pvalue)
    dw = float(np.mean(rows[:, 1] - rows[:, 2]))
    dz = float(np.mean(rows[:, 3] - rows[:, 4]))
    ok = p_w < 0.05 and p_z < 0.05
    return CheckResult(9, "synchronous-group bias", ok,
                       f"group-population omega {dw:+.4f} rad/s (p={p_w:.3g}), "
                       f"amplitude {dz:+.4f} (p={p_z:.3g})",
                       {"p_omega": p_w, "p_z": p_z, "d_omega": dw, "d_z": dz})


def check_coupling_variants(cfg: NetworkConfig, long_steps: int = 1_000_000,
                            record_every: int = 100, settle: float = 0.5) -> CheckResult:
    base = NetworkConfig(seed=cfg.seed, n=100, coupling_norm=4950.0)
    out, ok, parts = {}, True, []
    for variant in ("difference", "ratio"):
        c = base.replace(amplitude_variant=variant, n_steps=long_steps, burn_in=0)
        res = run_realization(c, 0, record="full", record_every=record_every)
        start = int(round(settle / (c.dt * record_every)))
        med = float(np.median(res.run.z[start:]))
        mx = float(res.run.max_z[0])
        out[variant] = (mx, med)
        ok &= mx < 100
        parts.append(f"{variant}: max Z={mx:.3g}, median Z={med:.4g}")
    ok &= out["ratio"][1] > out["difference"][1]
    for variant in ("other_only", "cosine_factor"):
        c = base.replace(amplitude_variant=variant, n_steps=int(round(1.0 / base.dt)),
                         burn_in=0, explosion_threshold=1e3)
        res = run_realization(c, 0)
        at = float(res.run.exploded_at[0])
        out[variant] = at
        ok &= not math.isnan(at) and at <= 1.0
        parts.append(f"{variant}: explosion at t={at:.4g} s")
    return CheckResult(10, "coupling variants", bool(ok), "; ".join(parts), out)


def determinism_config(seed: int) -> NetworkConfig:
    return NetworkConfig(
        seed=seed, n=20, n_values=(2, 10), coupling_norm=200.0,
        coupling_norm_values=(0.0, 10.0, 1000.0), n_steps=1500, burn_in=500, realizations=2,
        snapshot_times=(0.0, 0.05), single_duration=0.5,
    )


def check_determinism(cfg: NetworkConfig) -> CheckResult:
    c = determinism_config(cfg.seed)
    with tempfile.TemporaryDirectory() as tmp:
        dirs = [Path(tmp) / "a", Path(tmp) / "b"]
        for d in dirs:
            for cmd in (commands.sweep, commands.raster, commands.snapshots, commands.single):
                cmd(c, d, figure=False)
        names = sorted(p.name for p in dirs[0].glob("*.csv"))
        same = [(dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes() for n in names]
    ok = bool(names) and all(same)
    return CheckResult(11, "determinism", ok,
                       f"{sum(same)}/{len(names)} CSV files byte-identical", {"files": names})


CHECKS = {
    1: check_parameter_algebra,
    2: check_canonical_form,
    3: check_ou_radial_law,
    4: check_phase_slip_law,
    5: check_spectral_agreement,
    6: check_zero_coupling,
    7: check_sync_transition,
    8: check_operating_point,
    9: check_group_bias,
    10: check_coupling_variants,
    11: check_determinism,
}


def run_checks(cfg: NetworkConfig, numbers=None, echo=print) -> list:
    results = []
    for k in numbers or sorted(CHECKS):
        t0 = time.perf_counter()
        r = CHECKS[k](cfg)
        r.seconds = time.perf_counter() - t0
        if echo is not None:
            echo(r.line())
        results.append(r)
    return results
