import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasicycle.errors import EmptyInput, InsufficientData
from quasicycle.metrics import (
    N_BINS,
    circular_mean,
    group_stats,
    metrics_frame,
    metrics_table,
    peak_frequency,
    phase_bins,
    phase_histogram,
    pli,
    power_spectrum,
    synchronous_group,
    wrap_phase,
)
from quasicycle.network import NetworkState


def test_pli_of_identical_phases_is_one():
    rho, psi = pli(np.full(10, 1.2))
    assert rho == pytest.approx(1.0)
    assert psi == pytest.approx(1.2)


def test_pli_of_evenly_spread_phases_is_zero():
    rho, psi = pli(np.linspace(-math.pi, math.pi, 8, endpoint=False))
    assert rho < 1e-15
    assert pli(np.array([0.0, math.pi]))[0] < 1e-15


def test_pli_ignores_unwrapping():
    th = np.array([0.1, 0.5, -2.0, 3.0])
    assert pli(th + 2 * math.pi * np.array([3, -5, 11, 0]))[0] == pytest.approx(pli(th)[0], abs=1e-12)


def test_pli_broadcasts_over_leading_axes():
    rng = np.random.default_rng(0)
    th = rng.uniform(-4, 4, (5, 3, 7))
    rho, psi = pli(th)
    assert rho.shape == (5, 3)
    assert rho[2, 1] == pytest.approx(pli(th[2, 1])[0])


def test_pli_empty():
    with pytest.raises(EmptyInput):
        pli(np.array([]))


@pytest.mark.parametrize("n, expected, tol", [(2, 2 / math.pi, 0.01), (100, 0.0886, 0.002)])
def test_pli_of_uniform_phases(n, expected, tol):
    # N = 2: E|cos(d/2)| = 2/pi. N = 100: E|resultant| ~ sqrt(pi/(4N)).
    rng = np.random.default_rng(1)
    rho, _ = pli(rng.uniform(-math.pi, math.pi, (40_000, n)))
    assert rho.mean() == pytest.approx(expected, abs=tol)


def test_wrap_phase_range():
    x = wrap_phase(np.array([-math.pi, math.pi, 3 * math.pi, -7.0, 0.0]))
    assert np.all((x >= -math.pi) & (x < math.pi))
    np.testing.assert_allclose(np.exp(1j * x), np.exp(1j * np.array([-math.pi, math.pi, 3 * math.pi, -7.0, 0.0])))


def test_phase_bin_edges():
    w = 2 * math.pi / N_BINS
    assert phase_bins(np.array([-math.pi]))[0] == 0
    assert phase_bins(np.array([math.pi]))[0] == 0
    assert phase_bins(np.array([math.pi - 1e-9]))[0] == N_BINS - 1
    assert phase_bins(np.array([-math.pi + w + 1e-12]))[0] == 1
    assert phase_bins(np.array([0.0]))[0] == 10


@settings(max_examples=300, deadline=None)
@given(st.floats(-1e3, 1e3))
def test_phase_bin_contains_wrapped_phase(theta):
    k = int(phase_bins(np.array([theta]))[0])
    assert 0 <= k < N_BINS
    lo = -math.pi + k * 2 * math.pi / N_BINS
    x = float(wrap_phase(theta))
    assert lo - 1e-9 <= x < lo + 2 * math.pi / N_BINS + 1e-9


def test_histogram_counts_and_batch():
    rng = np.random.default_rng(2)
    th = rng.uniform(-10, 10, (4, 37))
    h = phase_histogram(th)
    assert h.shape == (4, N_BINS)
    assert np.all(h.sum(axis=-1) == 37)
    assert np.array_equal(h[3], phase_histogram(th[3]))


def test_synchronous_group_is_largest_bin():
    th = np.array([0.01, 0.02, 0.03, 1.0, 1.01, -2.0])
    assert synchronous_group(th).tolist() == [0, 1, 2]


def test_synchronous_group_tie_takes_lowest_bin():
    th = np.array([1.0, 1.01, -2.0, -2.01])  # two bins with two members each
    assert synchronous_group(th).tolist() == [2, 3]


def test_synchronous_group_errors():
    with pytest.raises(EmptyInput):
        synchronous_group(np.array([]))
    with pytest.raises(ValueError):
        synchronous_group(np.zeros((2, 2)))


def test_circular_mean_and_weights():
    assert circular_mean(np.array([math.pi - 0.1, -math.pi + 0.1])) == pytest.approx(math.pi)
    assert circular_mean(np.array([0.2, 2.0]), np.array([True, False])) == pytest.approx(0.2)


def _state(theta, z, omega):
    n = len(theta)
    one = np.ones(n)
    return NetworkState(np.asarray(z, float), np.asarray(theta, float), np.asarray(omega, float), one, one, one)


def test_group_stats_and_frame():
    st_ = _state([0.01, 0.02, 2.0], [1.0, 3.0, 10.0], [436.0, 438.0, 440.0])
    w, z, th = group_stats([0, 1], st_)
    assert (w, z) == (437.0, 2.0)
    assert th == pytest.approx(0.015)
    f = metrics_frame(0.5, st_)
    assert f.sync_group.tolist() == [0, 1]
    assert f.bin_counts.sum() == 3
    with pytest.raises(EmptyInput):
        group_stats([], st_)


def test_metrics_table_bookkeeping():
    rng = np.random.default_rng(3)
    th = rng.uniform(-3, 3, (50, 30))
    z = rng.uniform(0.5, 2, (50, 30))
    w = rng.normal(437.72, 1, 30)
    tab = metrics_table(np.arange(50) * 5e-5, th, z, w)
    counts = np.column_stack([tab[f"bin_{k:02d}"] for k in range(N_BINS)])
    assert np.array_equal(tab["group_size"], counts.max(axis=1))
    for t in (0, 17, 49):
        g = synchronous_group(th[t])
        assert tab["group_mean_omega"][t] == pytest.approx(w[g].mean())
        assert tab["group_mean_z"][t] == pytest.approx(z[t, g].mean())
    np.testing.assert_allclose(tab["pop_mean_z"], z.mean(axis=1))
    np.testing.assert_allclose(tab["rho"], pli(th)[0])


def test_power_spectrum_peak_and_parseval():
    dt = 5e-5
    t = np.arange(80_000) * dt
    rng = np.random.default_rng(4)
    x = 3.0 * np.sin(2 * math.pi * 69.66 * t) + rng.normal(0, 0.5, len(t))
    f, p = power_spectrum(x, dt)
    assert abs(peak_frequency(f, p) - 69.66) <= f[1] - f[0]
    # one-sided density integrates to the variance
    assert np.sum(p) * (f[1] - f[0]) == pytest.approx(x.var(), rel=0.05)


def test_power_spectrum_short_series():
    f, p = power_spectrum(np.random.default_rng(0).normal(size=1000), 1e-3)
    assert len(f) == 501
    with pytest.raises(InsufficientData):
        power_spectrum(np.zeros(100), 1e-3)
