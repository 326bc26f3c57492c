"""Coupled quasi-cycle oscillator network.

Each oscillator i carries an unwrapped phase ``theta_i`` and an amplitude
``z_i``. One Euler-Maruyama step is::

    theta_i += [-w_i + (1/2N) sum_j (z_j/z_i) C_ij sin(theta_j - theta_i)] dt + eta_i / z_i
    z_i     += k_i (1/(2 z_i) - z_i) dt + (1/2N) sum_j C_ij g(j, i) dt + k_i xi_i
    z_i      = max(z_i, floor)

where ``k_i = (sigma_i/sqrt(lam_i)) (|Q_i|/rescale)``, ``eta_i`` and ``xi_i``
are independent Normal(0, lam_i dt) increments (Brownian motions on the clock
``lam_i t``) and ``g`` is the amplitude coupling variant. Both sums are
evaluated through the complex field ``C @ (z e^{i theta})``, which is exact
and costs one matrix-vector product (or one sum for all-to-all coupling).

Arrays may carry leading batch axes; the last axis indexes oscillators.
Batching realizations this way runs them in lockstep without mixing them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import model
from .config import AMPLITUDE_VARIANTS, NetworkConfig
from .errors import NumericalDivergence
from .processes import AMPLITUDE_RESCALE, Z_FLOOR, amplitude_scale
from .sde import DIVERGENCE_LIMIT, RngStream, Source, stream_id

__all__ = [
    "CouplingSpec",
    "NetworkState",
    "NetworkNoise",
    "NetworkRun",
    "sample_natural_frequencies",
    "derive_per_oscillator",
    "initial_state",
    "step_network",
    "simulate_network",
    "step_classic_kuramoto",
    "simulate_classic_kuramoto",
    "RealizationResult",
    "run_realization",
    "run_realizations",
    "EXPLOSION_THRESHOLD",
]

EXPLOSION_THRESHOLD = 1e3
_CHUNK = 2048


@dataclass(frozen=True)
class CouplingSpec:
    """Coupling matrix and the form of the phase and amplitude interaction.

    ``kind="all_to_all"`` uses ``strength`` on every off-diagonal entry, so the
    matrix 2-norm is ``strength * (N - 1)``. ``kind="explicit"`` carries a full
    matrix.
    """

    kind: str = "all_to_all"
    strength: float = 0.0
    matrix: Optional[np.ndarray] = field(default=None, compare=False)
    ratio_factor: bool = True
    amplitude_variant: str = "difference"

    def __post_init__(self):
        if self.amplitude_variant not in AMPLITUDE_VARIANTS:
            raise ValueError(f"unknown amplitude_variant {self.amplitude_variant!r}")
        if self.kind == "all_to_all":
            if not self.strength >= 0:
                raise ValueError(f"coupling strength must be >= 0, got {self.strength}")
        elif self.kind == "explicit":
            m = np.asarray(self.matrix, dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError("explicit coupling needs a square matrix")
            if np.any(np.diag(m) != 0):
                raise ValueError("coupling matrix must have a zero diagonal")
            if np.any(m < 0):
                raise ValueError("coupling matrix entries must be >= 0")
            object.__setattr__(self, "matrix", m)
        else:
            raise ValueError(f"unknown coupling kind {self.kind!r}")

    @classmethod
    def all_to_all(cls, strength: float, **kw) -> "CouplingSpec":
        return cls("all_to_all", strength, **kw)

    @classmethod
    def from_norm(cls, norm: float, n: int, **kw) -> "CouplingSpec":
        """All-to-all coupling whose matrix has 2-norm ``norm``."""
        return cls("all_to_all", norm / (n - 1) if n > 1 else 0.0, **kw)

    @classmethod
    def explicit(cls, matrix, **kw) -> "CouplingSpec":
        return cls("explicit", 0.0, np.asarray(matrix, dtype=float), **kw)

    def as_matrix(self, n: int) -> np.ndarray:
        if self.kind == "explicit":
            if self.matrix.shape != (n, n):
                raise ValueError(f"coupling matrix is {self.matrix.shape}, network has {n}")
            return self.matrix.copy()
        return self.strength * (np.ones((n, n)) - np.eye(n))

    def norm(self, n: int) -> float:
        if self.kind == "all_to_all":
            return self.strength * (n - 1)
        return float(np.linalg.norm(self.as_matrix(n), 2))

    @property
    def is_zero(self) -> bool:
        if self.kind == "all_to_all":
            return self.strength == 0
        return not np.any(self.matrix)


@dataclass
class NetworkState:
    """Instantaneous network state; all arrays share shape ``(..., N)``."""

    z: np.ndarray
    theta: np.ndarray
    omega: np.ndarray
    lam: np.ndarray
    sig: np.ndarray
    qnorm: np.ndarray

    @property
    def n(self) -> int:
        return self.z.shape[-1]

    def copy(self) -> "NetworkState":
        return NetworkState(*(np.array(getattr(self, f)) for f in
                              ("z", "theta", "omega", "lam", "sig", "qnorm")))


class NetworkNoise:
    """Per-oscillator phase and amplitude streams, buffered in chunks.

    ``keys`` is an integer array of shape ``(..., N)`` of base stream ids whose
    source byte is zero; the phase and amplitude streams add
    :data:`Source.PHASE` and :data:`Source.AMPLITUDE`. :meth:`draw` returns
    standard normals shaped like ``keys``.
    """

    def __init__(self, seed: int, keys):
        self.keys = np.asarray(keys, dtype=np.uint64)
        flat = [int(k) for k in self.keys.ravel()]
        self._phase = [RngStream(seed, k | Source.PHASE) for k in flat]
        self._amp = [RngStream(seed, k | Source.AMPLITUDE) for k in flat]
        self._buf = None
        self._pos = 0

    @classmethod
    def from_streams(cls, phase: Sequence[RngStream], amplitude: Sequence[RngStream]):
        obj = cls.__new__(cls)
        obj.keys = np.array([s.stream_id for s in phase], dtype=np.uint64)
        obj._phase, obj._amp = list(phase), list(amplitude)
        obj._buf, obj._pos = None, 0
        return obj

    def _refill(self):
        shape = (_CHUNK,) + self.keys.shape
        gb = np.stack([s.standard_normals(_CHUNK) for s in self._phase], axis=-1)
        gw = np.stack([s.standard_normals(_CHUNK) for s in self._amp], axis=-1)
        self._buf = (gb.reshape(shape), gw.reshape(shape))
        self._pos = 0

    def draw(self):
        if self._buf is None or self._pos == _CHUNK:
            self._refill()
        k = self._pos
        self._pos += 1
        return self._buf[0][k], self._buf[1][k]


def sample_natural_frequencies(
    n: int, mean: float, sd: float, clip_sds: float, stream: RngStream
) -> np.ndarray:
    """``n`` draws from Normal(mean, sd^2) restricted to mean +/- clip_sds*sd.

    Out-of-range draws are replaced by fresh draws until every value lies in
    the window.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if sd < 0:
        raise ValueError("sd must be >= 0")
    if sd == 0:
        return np.full(n, float(mean))
    x = stream.standard_normals(n)
    bad = np.abs(x) > clip_sds
    while bad.any():
        x[bad] = stream.standard_normals(int(bad.sum()))
        bad = np.abs(x) > clip_sds
    return mean + sd * x


def derive_per_oscillator(omega, base: model.EIParams = model.RESULTS_PARAMS):
    """Damping, noise scalar and |Q| of each oscillator from its frequency.

    Only the inhibitory self-efficacy varies between oscillators; it is solved
    from the requested frequency with every other parameter taken from
    ``base``. Raises OutOfRange for frequencies no admissible efficacy gives.
    """
    omega = np.asarray(omega, dtype=float)
    lam = np.empty_like(omega)
    sig = np.empty_like(omega)
    qn = np.empty_like(omega)
    cache = {}
    for idx, w in np.ndenumerate(omega):
        if w not in cache:
            d = model.derive(model.params_for_frequency(float(w), base))
            cache[w] = (d.lam, d.sigma, d.q_norm)
        lam[idx], sig[idx], qn[idx] = cache[w]
    return lam, sig, qn


def initial_state(omega, init_phase_streams, init_amp_streams, base=model.RESULTS_PARAMS):
    """Phases uniform on (-pi, pi] and amplitudes uniform on (0, 1].

    One stream per batch entry supplies all N values of that entry.
    """
    omega = np.asarray(omega, dtype=float)
    n = omega.shape[-1]
    u_th = np.stack([s.generator.random(n) for s in init_phase_streams]).reshape(omega.shape)
    u_z = np.stack([s.generator.random(n) for s in init_amp_streams]).reshape(omega.shape)
    lam, sig, qn = derive_per_oscillator(omega, base)
    return NetworkState(
        z=1.0 - u_z, theta=math.pi - 2.0 * math.pi * u_th, omega=omega, lam=lam, sig=sig, qnorm=qn
    )


class _Kernel:
    """Per-run constants of the network update."""

    def __init__(self, state: NetworkState, coupling: CouplingSpec, dt: float,
                 amplitude_rescale: float, floor: float, drift_time_scaling: str):
        n = state.n
        self.n = n
        self.dt = dt
        self.floor = floor
        self.minus_omega = -state.omega
        self.noise_sd = np.sqrt(state.lam * dt)
        self.scale = amplitude_scale(state.sig, state.lam, state.qnorm, amplitude_rescale)
        if drift_time_scaling == "real_time":
            self.drift_dt = dt
        elif drift_time_scaling == "lambda_scaled":
            self.drift_dt = dt * state.lam
        else:
            raise ValueError(f"unknown drift_time_scaling {drift_time_scaling!r}")
        self.coupling = coupling
        self.active = not coupling.is_zero and n > 1
        self.half_over_n = 1.0 / (2 * n)
        # folded constants for the coupled branch
        self.phase_gain = self.half_over_n * dt
        self.amp_gain = self.half_over_n * self.drift_dt
        self.relax = self.scale * self.drift_dt
        self.amp_noise_sd = self.scale * self.noise_sd
        if self.active and coupling.kind == "explicit":
            self.mat_t = coupling.as_matrix(n).T.copy()
            self.rowsum = self.mat_t.sum(axis=0)
        else:
            self.mat_t = None
            self.rowsum = coupling.strength * (n - 1)

    def apply(self, x):
        """``C @ x`` along the oscillator axis."""
        if self.mat_t is not None:
            return x @ self.mat_t
        return self.coupling.strength * (x.sum(axis=-1, keepdims=True) - x)

    def step(self, z, theta, gb, gw, v=None):
        """Unfloored ``(z, theta)`` after one step; ``v`` may pass in ``exp(i theta)``."""
        eta = self.noise_sd * gb
        if self.active:
            c = self.coupling
            if v is None:
                v = np.exp(1j * theta)
            cv = v.conj()
            field_ = self.apply(z * v)  # sum_j C_ij z_j exp(i theta_j)
            if c.ratio_factor:
                pull = (cv * field_).imag / z
            else:
                pull = (cv * self.apply(v)).imag
            variant = c.amplitude_variant
            if variant == "difference":
                push = self.apply(z) - self.rowsum * z
            elif variant == "ratio":
                push = self.apply(z) / z
            elif variant == "other_only":
                push = self.apply(z)
            elif variant == "cosine_factor":
                push = (cv * field_).real
            else:
                push = 0.0
            theta_new = theta + self.minus_omega * self.dt + pull * self.phase_gain + eta / z
            z_new = z + self.relax * (0.5 / z - z) + push * self.amp_gain + self.amp_noise_sd * gw
        else:
            xi = self.noise_sd * gw
            theta_new = theta + self.minus_omega * self.dt + eta / z
            z_new = z + self.scale * (0.5 / z - z) * self.drift_dt + self.scale * xi
        return z_new, theta_new


def step_network(
    state: NetworkState,
    coupling: CouplingSpec,
    dt: float,
    noise: NetworkNoise,
    amplitude_rescale: float = AMPLITUDE_RESCALE,
    floor: float = Z_FLOOR,
    drift_time_scaling: str = "real_time",
    limit: float = DIVERGENCE_LIMIT,
) -> NetworkState:
    """One Euler-Maruyama update of the whole network; returns a new state."""
    k = _Kernel(state, coupling, dt, amplitude_rescale, floor, drift_time_scaling)
    gb, gw = noise.draw()
    z, theta = k.step(state.z, state.theta, gb, gw)
    _check(z, theta, limit, None)
    return replace(state, z=np.maximum(z, floor), theta=theta)


def _check(z, theta, limit, step):
    if not (np.all(np.abs(z) <= limit) and np.all(np.isfinite(theta))):
        raise NumericalDivergence(
            f"network state left the finite region (|z| <= {limit:g})"
            + ("" if step is None else f" at step {step}"),
            step=step,
        )


def _diverged(limit, step, dt):
    return NumericalDivergence(
        f"network state left the finite region (|z| <= {limit:g}) at step {step}",
        step=step, time=step * dt,
    )


@dataclass
class NetworkRun:
    """Output of :func:`simulate_network`.

    ``rho``/``psi`` have shape ``(n_steps + 1, ...)``. ``theta``/``z`` hold every
    ``record_every``-th state when full recording was requested, else None.
    ``exploded_at`` is the first time max(z) crossed the explosion threshold
    (NaN if it never did) for each batch entry.
    """

    t: np.ndarray
    rho: np.ndarray
    psi: np.ndarray
    theta: Optional[np.ndarray]
    z: Optional[np.ndarray]
    max_z: np.ndarray
    exploded_at: np.ndarray
    final: NetworkState
    steps_run: int


def simulate_network(
    state: NetworkState,
    coupling: CouplingSpec,
    dt: float,
    n_steps: int,
    noise: NetworkNoise,
    record: str = "pli",
    record_every: int = 1,
    amplitude_rescale: float = AMPLITUDE_RESCALE,
    floor: float = Z_FLOOR,
    drift_time_scaling: str = "real_time",
    explosion_threshold: Optional[float] = None,
    limit: float = DIVERGENCE_LIMIT,
) -> NetworkRun:
    """Advance ``state`` by ``n_steps`` steps.

    ``record="full"`` keeps theta and z; ``"pli"`` keeps only the per-step
    phase-locking index and mean phase. With ``explosion_threshold`` set, a
    batch entry whose largest amplitude passes the threshold is frozen from
    that step on, its first-passage time is recorded, and the run stops
    early once every entry has exploded.
    """
    if record not in ("full", "pli"):
        raise ValueError(f"record must be 'full' or 'pli', got {record!r}")
    k = _Kernel(state, coupling, dt, amplitude_rescale, floor, drift_time_scaling)
    z = np.array(state.z, dtype=float)
    theta = np.array(state.theta, dtype=float)
    batch = z.shape[:-1]
    rho = np.full((n_steps + 1,) + batch, np.nan)
    psi = np.full((n_steps + 1,) + batch, np.nan)
    keep_full = record == "full"
    if keep_full:
        n_rec = n_steps // record_every + 1
        th_rec = np.empty((n_rec,) + z.shape)
        z_rec = np.empty((n_rec,) + z.shape)
        th_rec[0], z_rec[0] = theta, z
    max_z = np.array(z.max(axis=-1), dtype=float)
    exploded_at = np.full(batch, np.nan)
    watch = explosion_threshold is not None
    alive = np.ones(batch, dtype=bool)

    def _order(v):
        m = v.mean(axis=-1)
        return np.abs(m), np.angle(m)

    v = np.exp(1j * theta)
    rho[0], psi[0] = _order(v)
    steps_run = n_steps
    for s in range(1, n_steps + 1):
        gb, gw = noise.draw()
        z_new, th_new = k.step(z, theta, gb, gw, v)
        if watch:
            if not alive.all():
                z_new = np.where(alive[..., None], z_new, z)
                th_new = np.where(alive[..., None], th_new, theta)
        # a NaN in z fails both comparisons; a non-finite theta shows up as a NaN PLI
        zmax = z_new.max(axis=-1)
        if not (np.max(zmax) <= limit and z_new.min() >= -limit):
            raise _diverged(limit, s, dt)
        z = np.maximum(z_new, floor)
        theta = th_new
        zmax = np.maximum(zmax, floor)
        np.maximum(max_z, zmax, out=max_z)
        v = np.exp(1j * theta)
        rho[s], psi[s] = _order(v)
        if not np.all(np.isfinite(rho[s])):
            raise _diverged(limit, s, dt)
        if keep_full and s % record_every == 0:
            th_rec[s // record_every], z_rec[s // record_every] = theta, z
        if watch:
            crossed = alive & (zmax > explosion_threshold)
            if crossed.any():
                exploded_at[crossed] = s * dt
                alive &= ~crossed
                if not alive.any():
                    steps_run = s
                    break
    t = dt * np.arange(n_steps + 1)
    final = replace(state, z=z, theta=theta)
    if keep_full:
        last = steps_run // record_every + 1
        return NetworkRun(t, rho, psi, th_rec[:last], z_rec[:last], max_z, exploded_at, final, steps_run)
    return NetworkRun(t, rho, psi, None, None, max_z, exploded_at, final, steps_run)


def step_classic_kuramoto(theta, omega, k: float, dt: float, stream=None, noise_sd: float = 0.0):
    """One Euler step of the mean-field Kuramoto model with optional phase noise.

    ``d theta_j = [w_j + (K/N) sum_k sin(theta_k - theta_j)] dt + noise_sd dB_j``.
    ``stream`` is a single RngStream supplying the N noise draws of this step.
    """
    theta = np.asarray(theta, dtype=float)
    n = theta.shape[-1]
    v = np.exp(1j * theta)
    pull = (v.conj() * v.sum(axis=-1, keepdims=True)).imag
    out = theta + (np.asarray(omega) + k / n * pull) * dt
    if noise_sd > 0:
        out = out + noise_sd * math.sqrt(dt) * stream.standard_normals(n)
    return out


def simulate_classic_kuramoto(theta0, omega, k, dt, n_steps, stream=None, noise_sd=0.0):
    """Per-step phase-locking index of a classic Kuramoto run."""
    theta = np.asarray(theta0, dtype=float)
    rho = np.empty(n_steps + 1)
    rho[0] = abs(np.exp(1j * theta).mean())
    for s in range(1, n_steps + 1):
        theta = step_classic_kuramoto(theta, omega, k, dt, stream, noise_sd)
        rho[s] = abs(np.exp(1j * theta).mean())
    return rho, theta


@dataclass
class RealizationResult:
    """One (or a batch of) realizations of a configured network.

    Batched fields carry a leading realization axis.
    """

    realizations: tuple
    omega: np.ndarray
    rho: np.ndarray
    psi: np.ndarray
    rho_bar: np.ndarray
    run: NetworkRun
    n: int
    coupling_norm: float


def _realization_keys(point, realizations, n):
    return np.array(
        [[stream_id(point, r, i, 0) for i in range(n)] for r in realizations],
        dtype=np.uint64,
    )


def run_realizations(
    config: NetworkConfig,
    realizations: Sequence[int],
    n: Optional[int] = None,
    coupling_norm: Optional[float] = None,
    point: int = 0,
    record: str = "pli",
    record_every: int = 1,
    coupling: Optional[CouplingSpec] = None,
) -> RealizationResult:
    """Run several realizations of one (N, coupling) point in lockstep.

    Realization r of point p draws its frequencies, initial state and noise
    from streams keyed by ``(p, r)`` only, so its trajectory does not depend
    on which other realizations share the batch.
    """
    n = config.n if n is None else n
    norm = config.coupling_norm if coupling_norm is None else coupling_norm
    spec = coupling if coupling is not None else config.coupling_spec(n, norm)
    realizations = tuple(realizations)
    omega = np.stack([
        sample_natural_frequencies(
            n, config.omega_mean, config.omega_sd, config.clip_sds,
            RngStream(config.seed, stream_id(point, r, 0, Source.FREQUENCY)),
        )
        for r in realizations
    ])
    state = initial_state(
        omega,
        [RngStream(config.seed, stream_id(point, r, 0, Source.INIT_PHASE)) for r in realizations],
        [RngStream(config.seed, stream_id(point, r, 0, Source.INIT_AMPLITUDE)) for r in realizations],
    )
    noise = NetworkNoise(config.seed, _realization_keys(point, realizations, n))
    run = simulate_network(
        state, spec, config.dt, config.n_steps, noise,
        record=record, record_every=record_every,
        amplitude_rescale=config.amplitude_rescale, floor=config.epsilon_floor,
        drift_time_scaling=config.drift_time_scaling,
        explosion_threshold=config.explosion_threshold,
    )
    window = run.rho[config.burn_in + 1 :]
    return RealizationResult(
        realizations=realizations,
        omega=omega,
        rho=run.rho,
        psi=run.psi,
        rho_bar=window.mean(axis=0),
        run=run,
        n=n,
        coupling_norm=spec.norm(n),
    )


def run_realization(config: NetworkConfig, realization: int = 0, **kw) -> RealizationResult:
    """Single realization; same arguments as :func:`run_realizations`.

    Array fields keep a leading realization axis of length one.
    """
    return run_realizations(config, [realization], **kw)
