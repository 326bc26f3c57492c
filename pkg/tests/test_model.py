import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from quasicycle import model
from quasicycle.errors import NotOscillatory, OutOfRange, SingularTransform

P = model.RESULTS_PARAMS


def forward_omega(s_ii, s_ee=1.5, s_ei=1.0, s_ie=4.0, tau_e=0.003, tau_i=0.006):
    """Independent oracle: natural frequency written out from the eigenvalues."""
    a = (1 - s_ee) / tau_e
    d = (1 + s_ii) / tau_i
    return math.sqrt(s_ei * s_ie / (tau_e * tau_i) - 0.25 * (a - d) ** 2)


# ---------------------------------------------------------------- reference values


def test_default_damping_and_frequency():
    assert model.derive_damping(P) == pytest.approx(8.333, abs=1e-3)
    assert model.derive_frequency(P) == pytest.approx(437.72, abs=0.01)


def test_default_sigma_ratio_and_q_norm():
    d = model.derive(P)
    assert d.sigma == pytest.approx(6.85, abs=0.01)
    assert d.ratio == pytest.approx(0.019, abs=1e-3)
    assert d.q_norm == pytest.approx(703.5, abs=0.5)


def test_default_q_matrix_entries():
    q = model.canonical_transform(P)
    np.testing.assert_allclose(q, [[-437.718, 175.0], [0.0, 666.667]], atol=1e-3)


def test_q_norm_matches_svd():
    d = model.derive(P)
    assert d.q_norm == pytest.approx(703.16744, abs=1e-4)
    assert d.q_norm == pytest.approx(np.linalg.norm(d.q_matrix, 2), rel=1e-12)


def test_sigma_matches_direct_inverse():
    q = model.canonical_transform(P)
    c = np.linalg.inv(q) @ model.noise_matrix(P)
    assert model.derive_sigma(P, q) == pytest.approx(math.sqrt(0.5 * np.trace(c @ c.T)), rel=1e-12)


def test_drift_and_noise_matrices():
    np.testing.assert_allclose(
        model.drift_matrix(P), [[-0.5 / 0.003, 1 / 0.003], [-4 / 0.006, 1.1 / 0.006]]
    )
    np.testing.assert_allclose(model.noise_matrix(P), np.diag([4000.0, 2000.0]))


def test_quasi_cycle_at_default():
    assert model.is_quasi_cycle(model.derive(P))


# ---------------------------------------------------------------- canonical form

positive = st.floats(0.0, 3.0)


@settings(max_examples=300, deadline=None)
@given(
    s_ee=positive, s_ei=st.floats(0.2, 3.0), s_ie=st.floats(0.5, 6.0), s_ii=st.floats(0.0, 2.0),
    tau_e=st.floats(0.002, 0.01), tau_i=st.floats(0.002, 0.02),
)
def test_canonical_form_identity(s_ee, s_ei, s_ie, s_ii, tau_e, tau_i):
    p = model.EIParams(s_ee, s_ei, s_ie, s_ii, tau_e, tau_i)
    try:
        d = model.derive(p)
    except NotOscillatory:
        return
    q = d.q_matrix
    a = model.drift_matrix(p)
    got = np.linalg.solve(q, -a @ q)
    # Q becomes ill-conditioned as w -> 0, so the round-off bound grows with cond(Q)
    atol = max(1e-9, 1e-13 * np.linalg.cond(q) * np.abs(a).max())
    np.testing.assert_allclose(got, model.canonical_form(p), atol=atol)
    # eigenvalues of -A are -lam +/- i w
    ev = np.linalg.eigvals(-model.drift_matrix(p))
    assert np.allclose(sorted(ev.imag), [-d.omega_d, d.omega_d], rtol=1e-9)
    assert np.allclose(ev.real, -d.lam, atol=1e-9 * max(1.0, d.omega_d))


def test_real_eigenvalues_raise():
    with pytest.raises(NotOscillatory):
        model.derive_frequency(model.EIParams(s_ei=0.0))


def test_singular_transform_raises():
    with pytest.raises(SingularTransform):
        model.derive_sigma(P, np.array([[1.0, 2.0], [2.0, 4.0]]))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=4))
def test_matrix_2norm_matches_svd(entries):
    m = np.array(entries).reshape(2, 2)
    assert model.matrix_2norm(m) == pytest.approx(np.linalg.norm(m, 2), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("field", ["s_ee", "s_ii", "sigma_e"])
def test_negative_efficacy_rejected(field):
    with pytest.raises(ValueError):
        model.EIParams(**{field: -0.1})


def test_nonpositive_time_constant_rejected():
    with pytest.raises(ValueError):
        model.EIParams(tau_e=0.0)


# ---------------------------------------------------------------- inhibitory efficacy inversion


@pytest.mark.parametrize(
    "omega, s_ii",
    [(437.72, 0.09994595892370389), (440.72, 0.007557458804105563), (434.72, 0.1878453122650145)],
)
def test_sii_for_frequency_reference_points(omega, s_ii):
    assert model.solve_sii_for_frequency(omega) == pytest.approx(s_ii, abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(st.floats(434.72, 440.72))
def test_sii_round_trip(omega):
    s_ii = model.solve_sii_for_frequency(omega)
    assert model.derive_frequency(P.with_s_ii(s_ii)) == pytest.approx(omega, abs=1e-9)
    # agrees with a root-finder on the forward formula
    oracle = brentq(lambda s: forward_omega(s) - omega, 0.0, 0.5, xtol=1e-14)
    assert s_ii == pytest.approx(oracle, abs=1e-9)


def test_sii_for_frequency_out_of_range():
    with pytest.raises(OutOfRange):
        model.solve_sii_for_frequency(441.5)  # would need s_ii < 0
    with pytest.raises(OutOfRange):
        model.solve_sii_for_frequency(1000.0)  # beyond the coupling limit


def test_frequency_at_sii_point_two():
    assert model.derive_frequency(P.with_s_ii(0.2)) == pytest.approx(forward_omega(0.2), abs=1e-9)
    assert model.derive_frequency(P.with_s_ii(0.2)) == pytest.approx(434.294, abs=1e-3)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 0.5))
def test_damping_is_linear_in_sii(s_ii):
    assert model.derive_damping(P.with_s_ii(s_ii)) == pytest.approx(250.0 / 3.0 * s_ii, abs=1e-9)


@pytest.mark.parametrize("omega", np.linspace(434.72, 440.72, 13))
def test_sigma_close_to_reciprocal_frequency(omega):
    d = model.derive(model.params_for_frequency(omega))
    assert d.sigma == pytest.approx(2998.38 / omega, abs=1e-2)
    assert d.sigma == pytest.approx(3000.0 / omega, rel=1e-12)


def test_quasi_cycle_threshold_is_monotone():
    d = model.derive(P)
    flags = [model.is_quasi_cycle(d, t) for t in np.linspace(0.001, 0.1, 50)]
    # once true it stays true as the threshold grows
    assert flags == sorted(flags)
    assert not model.is_quasi_cycle(d, d.ratio)
