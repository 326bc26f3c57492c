"""Parameter algebra for a single linear E-I noise oscillator.

The oscillator is the linear SDE ``dV = -A V dt + N dW`` with

    A = [[(1 - s_ee)/tau_e,  s_ei/tau_e      ],
         [-s_ie/tau_i,       (1 + s_ii)/tau_i]]
    N = diag(sigma_e/tau_e, sigma_i/tau_i)

Everything here is closed form: damping rate and natural frequency from the
eigenvalues of ``-A``, the canonical transform ``Q`` that brings ``-A`` into
rotation-plus-decay form, and the noise scalar obtained through ``Q``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import NotOscillatory, OutOfRange, SingularTransform

__all__ = [
    "EIParams",
    "DerivedParams",
    "RESULTS_PARAMS",
    "drift_matrix",
    "noise_matrix",
    "derive_damping",
    "derive_frequency",
    "derive_sigma",
    "canonical_transform",
    "canonical_form",
    "matrix_2norm",
    "derive",
    "solve_sii_for_frequency",
    "params_for_frequency",
    "is_quasi_cycle",
]


@dataclass(frozen=True)
class EIParams:
    """Raw parameters of one excitatory-inhibitory pair.

    Efficacies are dimensionless, time constants in seconds and noise
    amplitudes in mV.
    """

    s_ee: float = 1.5
    s_ei: float = 1.0
    s_ie: float = 4.0
    s_ii: float = 0.1
    tau_e: float = 0.003
    tau_i: float = 0.006
    sigma_e: float = 12.0
    sigma_i: float = 12.0

    def __post_init__(self):
        for name in ("s_ee", "s_ei", "s_ie", "s_ii", "sigma_e", "sigma_i"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("tau_e", "tau_i"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")

    def with_s_ii(self, s_ii: float) -> "EIParams":
        return replace(self, s_ii=s_ii)


# Operating point used for every network simulation: only s_ii varies
# between oscillators.
RESULTS_PARAMS = EIParams()


@dataclass(frozen=True)
class DerivedParams:
    lam: float
    omega_d: float
    sigma: float
    q_matrix: np.ndarray
    q_norm: float

    @property
    def ratio(self) -> float:
        return self.lam / self.omega_d

    @property
    def amplitude_scale(self) -> float:
        """sigma / sqrt(lambda), the prefactor of the reconstructed path."""
        return self.sigma / math.sqrt(self.lam)


def drift_matrix(p: EIParams) -> np.ndarray:
    return np.array(
        [
            [(1.0 - p.s_ee) / p.tau_e, p.s_ei / p.tau_e],
            [-p.s_ie / p.tau_i, (1.0 + p.s_ii) / p.tau_i],
        ]
    )


def noise_matrix(p: EIParams) -> np.ndarray:
    return np.diag([p.sigma_e / p.tau_e, p.sigma_i / p.tau_i])


def derive_damping(p: EIParams) -> float:
    """Damping rate (1/s): minus the real part of the eigenvalues of -A."""
    return 0.5 * ((1.0 - p.s_ee) / p.tau_e + (1.0 + p.s_ii) / p.tau_i)


def _frequency_radicand(p: EIParams) -> float:
    gap = (1.0 - p.s_ee) / p.tau_e - (1.0 + p.s_ii) / p.tau_i
    return p.s_ei * p.s_ie / (p.tau_e * p.tau_i) - 0.25 * gap * gap


def derive_frequency(p: EIParams) -> float:
    """Natural angular frequency (rad/s), the imaginary part of the eigenvalues.

    Raises NotOscillatory when the eigenvalues are real.
    """
    radicand = _frequency_radicand(p)
    if not radicand > 0:
        raise NotOscillatory(
            f"eigenvalues of -A are real (radicand {radicand:.6g} <= 0)"
        )
    return math.sqrt(radicand)


def canonical_transform(p: EIParams) -> np.ndarray:
    """Matrix Q with ``Q^-1 (-A) Q = [[-lam, w], [-w, -lam]]``.

    Q is unique only up to a rotation and a scale. We fix it by taking the
    real and imaginary parts of the eigenvector of ``-A`` so that the lower
    left entry vanishes and the lower right entry equals ``s_ie / tau_i``:

        Q = [[-w, (a - d)/2], [0, c]]

    where ``-A = [[a, b], [c, d]]``. For the default parameters this is
    ``[[-437.72, 175.0], [0, 666.67]]``.
    """
    w = derive_frequency(p)
    m = -drift_matrix(p)
    a, d, c = m[0, 0], m[1, 1], m[1, 0]
    return np.array([[-w, 0.5 * (a - d)], [0.0, c]])


def canonical_form(p: EIParams) -> np.ndarray:
    lam = derive_damping(p)
    w = derive_frequency(p)
    return np.array([[-lam, w], [-w, -lam]])


def matrix_2norm(m: np.ndarray) -> float:
    """Largest singular value of a 2x2 matrix, closed form."""
    m = np.asarray(m, dtype=float)
    fro2 = float(np.sum(m * m))
    det = float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    disc = max(fro2 * fro2 - 4.0 * det * det, 0.0)
    return math.sqrt(0.5 * (fro2 + math.sqrt(disc)))


def derive_sigma(p: EIParams, q: np.ndarray) -> float:
    """Noise scalar sqrt(0.5 tr(Q^-1 N N^T Q^-T)) in mV."""
    q = np.asarray(q, dtype=float)
    det = q[0, 0] * q[1, 1] - q[0, 1] * q[1, 0]
    scale = max(1.0, float(np.max(np.abs(q)))) ** 2
    if abs(det) <= 1e-14 * scale:
        raise SingularTransform(f"transform matrix is singular (det={det:.3g})")
    c = np.linalg.solve(q, noise_matrix(p))
    return math.sqrt(0.5 * float(np.sum(c * c)))


def derive(p: EIParams) -> DerivedParams:
    q = canonical_transform(p)
    return DerivedParams(
        lam=derive_damping(p),
        omega_d=derive_frequency(p),
        sigma=derive_sigma(p, q),
        q_matrix=q,
        q_norm=matrix_2norm(q),
    )


def solve_sii_for_frequency(omega_d: float, base: EIParams = RESULTS_PARAMS) -> float:
    """Inhibitory self-efficacy that gives ``base`` the natural frequency omega_d.

    Inverts the frequency formula for s_ii with every other parameter held
    fixed. With u = (1 + s_ii)/tau_i and g = (1 - s_ee)/tau_e the relation is
    ``(u - g)^2 = 4 (s_ei s_ie/(tau_e tau_i) - omega_d^2)``; the larger root is
    the one with a non-negative efficacy.

    Raises OutOfRange when no admissible s_ii exists.
    """
    coupling = base.s_ei * base.s_ie / (base.tau_e * base.tau_i)
    disc = coupling - omega_d * omega_d
    if not disc >= 0:
        raise OutOfRange(
            f"omega_d={omega_d} exceeds the coupling limit {math.sqrt(coupling):.6g}"
        )
    g = (1.0 - base.s_ee) / base.tau_e
    s_ii = base.tau_i * (g + 2.0 * math.sqrt(disc)) - 1.0
    if s_ii < 0:
        raise OutOfRange(f"omega_d={omega_d} needs s_ii={s_ii:.6g} < 0")
    return s_ii


def params_for_frequency(omega_d: float, base: EIParams = RESULTS_PARAMS) -> EIParams:
    return base.with_s_ii(solve_sii_for_frequency(omega_d, base))


def is_quasi_cycle(d: DerivedParams, ratio_threshold: float = 0.05) -> bool:
    return d.lam > 0 and d.lam / d.omega_d < ratio_threshold
