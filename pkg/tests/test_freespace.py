import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from memoryflow import freespace as fs
from memoryflow import kernel as K
from oracles import gaussian, laplace_invert, peak_short_time

SPEC = K.normalized_fractional(0.5, 0.2)
FIG1 = K.normalized_fractional(0.2, 0.1)


def _mp_hat_u(alpha, delta, x):
    # closed form of K through the lower incomplete gamma function
    C = (1 - alpha) * mp.mpf(delta) ** (alpha - 1)

    def F(z):
        Kz = C / alpha * (z ** alpha * mp.gammainc(1 - alpha, 0, z * delta)
                          - (1 - mp.exp(-z * delta)) * mp.mpf(delta) ** (-alpha))
        r = mp.sqrt(Kz)
        return r / (2 * z) * mp.exp(-x * r)
    return F


def test_hat_u_small_z():
    z = 1e-8
    assert fs.hat_u(SPEC, 0.0, z).real / (0.5 * z ** -0.5) == pytest.approx(1.0, abs=1e-6)


def test_hat_u_large_z():
    a, d = 0.2, 0.1
    lead = lambda z: math.sqrt(math.gamma(1.8) / (4 * a * d ** 0.8)) * z ** -0.9
    A = math.gamma(1 - a) * (1 - a) * d ** (a - 1) / a
    B = (1 - a) * d ** (a - 1) * d ** -a / a
    for z in (1e4, 1e8):
        # two-term symbol expansion is exact up to e^{-z delta}
        exact = math.sqrt(A * z ** a - B) / (2 * z)
        assert fs.hat_u(FIG1, 0.0, z).real == pytest.approx(exact, rel=1e-12)
    # leading law alone approaches 1 slowly; the constant B still shows at 1e8
    r8 = fs.hat_u(FIG1, 0.0, 1e8).real / lead(1e8)
    r16 = fs.hat_u(FIG1, 0.0, 1e16).real / lead(1e16)
    assert abs(r16 - 1) < abs(r8 - 1) < 0.02
    assert r16 == pytest.approx(1.0, abs=1e-3)


@given(st.floats(0, 5), st.floats(1e-3, 1e3), st.floats(-1e3, 1e3))
def test_hat_u_even(x, zr, zi):
    z = complex(zr, zi)
    assert fs.hat_u(SPEC, x, z) == fs.hat_u(SPEC, -x, z)


def test_hat_u_broadcasts():
    out = fs.hat_u(SPEC, np.array([0.0, 0.5])[:, None], np.array([1.0, 2 + 1j, 10.0]))
    assert out.shape == (2, 3)
    assert out[0, 2] == fs.hat_u(SPEC, 0.0, 10.0)


def test_hat_u_rejects_left_half_plane():
    with pytest.raises(K.KernelDomainError):
        fs.hat_u(SPEC, 0.0, -1.0)
    with pytest.raises(K.KernelDomainError):
        fs.hat_u_fourier(SPEC, 1.0, 0.0)


def test_hat_u_fourier_zero_mode():
    z = np.array([0.3, 2 + 5j])
    np.testing.assert_allclose(fs.hat_u_fourier(SPEC, 0.0, z), 1 / z, rtol=1e-15)


def test_contour_geometry():
    c = fs.InversionContour()
    assert c.M == 32
    nodes = c.nodes(0.5)
    assert nodes.size == 65
    assert np.all(nodes.real == c.shift(0.5))
    assert c.shift(0.5) == pytest.approx(-math.log(1e-14) / 2.0)


@pytest.mark.parametrize("t", [0.05, 0.5, 2.0])
def test_invert_against_mpmath(t):
    a, d = 0.5, 0.2
    ref = laplace_invert(_mp_hat_u(a, d, 0.1), t)
    assert fs.invert(SPEC, 0.1, t) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("t", [1e-4, 0.01, 0.05, 0.15])
def test_peak_against_short_time_series(t):
    assert fs.peak_value(SPEC, t) == pytest.approx(peak_short_time(0.5, 0.2, t), rel=1e-8)


@pytest.mark.parametrize("t", [1e-3, 0.1, 1.0, 10.0])
def test_mass_conservation(t):
    assert fs.total_mass(SPEC, t) == pytest.approx(1.0, abs=1e-6)


def test_mass_for_scaled_kernel():
    for sigma in (0.25, 4.0):
        assert fs.total_mass(SPEC.scaled(sigma), 0.3) == pytest.approx(1.0, abs=1e-6)


@given(st.floats(0, 3), st.sampled_from([0.03, 0.3, 3.0]))
def test_evenness(x, t):
    assert fs.invert(SPEC, x, t) == fs.invert(SPEC, -x, t)


def test_positive_on_resolved_range():
    for t in (0.05, 0.5, 5.0):
        x = np.linspace(0, 6, 300)
        u = fs.invert(SPEC, x, t)
        assert np.all(u[np.abs(u) > 1e-10] > 0)


def test_peak_decreasing():
    t = np.geomspace(1e-5, 100, 50)
    # keep clear of t = delta where the inversion loses accuracy
    t = t[np.abs(t / 0.1 - 1) > 0.15]
    with warnings.catch_warnings():
        warnings.simplefilter("error", fs.InversionAccuracyWarning)
        p = fs.peak_value(FIG1, t)
    assert np.all(np.diff(p) < 0)


def test_two_regime_slopes():
    a = FIG1.alpha
    for t, slope in [(1e-9, -a / 2), (1e4, -0.5)]:
        p1, p2 = fs.peak_value(FIG1, [t, 1.1 * t])
        assert math.log(p2 / p1) / math.log(1.1) == pytest.approx(slope, abs=0.02)


def test_peak_asymptotes():
    assert fs.peak_value(FIG1, 100.0) / fs.peak_large_time(FIG1, 100.0) == pytest.approx(1.0, abs=0.02)
    # small-time law is the leading term only; the approach is slow for alpha = 0.2
    r = [fs.peak_value(FIG1, t) / fs.peak_small_time(FIG1, t) for t in (1e-5, 1e-9, 1e-13)]
    assert abs(r[2] - 1) < abs(r[1] - 1) < abs(r[0] - 1)


def test_quoted_small_time_coefficient():
    a, d = 0.2, 0.1
    quoted = math.sqrt(math.gamma(1.8)) / (math.sqrt(4 * a * d ** 0.8) * math.gamma(0.9))
    assert fs.peak_small_time(FIG1, 1.0) == pytest.approx(quoted, rel=1e-14)


@pytest.mark.parametrize("t", [0.02, 0.5, 3.0])
def test_contour_converged(t):
    x = np.array([0.0, 0.2, 1.0])
    base = fs.invert(SPEC, x, t, fs.InversionContour(64))
    fine = fs.invert(SPEC, x, t, fs.InversionContour(128))
    assert np.max(np.abs(base - fine)) < 1e-8


def test_warning_near_horizon():
    with pytest.warns(fs.InversionAccuracyWarning):
        fs.invert(SPEC, 0.0, 0.2)


def test_invert_requires_positive_time():
    with pytest.raises(ValueError):
        fs.invert(SPEC, 0.0, 0.0)


def test_tail_asymptote_constants():
    tail = fs.TailAsymptote.for_kernel(SPEC)
    assert tail.a == pytest.approx(-2 / 3, rel=1e-15)
    assert tail.c == pytest.approx(4 / 3, rel=1e-15)
    assert tail.b == pytest.approx(1.5 * 2 ** (-4 / 3) * 0.5 ** (1 / 3), rel=1e-14)
    assert tail.b == pytest.approx(0.4725, abs=1e-4)
    assert tail.c_delta == pytest.approx(1.991, abs=1e-3)


def test_tail_fit_fractional():
    fit = fs.tail_fit(SPEC, SPEC.delta / 10)
    assert fit.exponent == pytest.approx(4 / 3, abs=0.1)
    assert fit.n_points >= 8


def test_tail_fit_gaussian_profile():
    x = np.linspace(0.01, 3, 600)
    fit = fs.tail_fit(SPEC, 0.1, profile=(x, gaussian(x, 0.1)))
    assert fit.exponent == pytest.approx(2.0, abs=0.1)


def test_tail_fit_reports_short_window():
    x = np.linspace(0.01, 0.1, 20)
    fit = fs.tail_fit(SPEC, 0.1, profile=(x, gaussian(x, 0.1)))
    assert fit.exponent is None and "insufficient" in fit.message


def test_fourier_modes():
    assert fs.invert_fourier(SPEC, 0.0, 0.7) == pytest.approx(1.0, abs=1e-10)
    xi = np.array([0.5, 3.0, 20.0])
    np.testing.assert_array_equal(fs.invert_fourier(SPEC, xi, 0.5), fs.invert_fourier(SPEC, -xi, 0.5))
    assert np.all(np.isreal(fs.invert_fourier(SPEC, xi, 0.5)))


def test_fourier_mode_is_transform_of_profile():
    t, xi = 0.5, 2.0
    x = np.linspace(0, 8, 4001)
    u = fs.invert(SPEC, x, t)
    w = np.full(x.size, x[1]); w[0] = w[-1] = x[1] / 2
    assert 2 * np.sum(w * u * np.cos(xi * x)) == pytest.approx(fs.invert_fourier(SPEC, xi, t), abs=1e-5)


def test_spectral_decay_bound():
    violations, c, b = fs.spectral_decay_check(SPEC, 0.5, 200.0)
    assert violations == 0
    assert c == pytest.approx(1.0, abs=1e-10)
    assert b > 0


def test_kernel_scaling_identity():
    x = np.linspace(-1, 1, 21)
    scaled, plain = fs.kernel_scaling_check(SPEC, 1.0, x, 0.3)
    np.testing.assert_array_equal(scaled, plain)
    sigma = 4.0
    scaled, _ = fs.kernel_scaling_check(SPEC, sigma, x, 0.3)
    exact = math.sqrt(sigma) * fs.invert(SPEC, math.sqrt(sigma) * x, 0.3)
    np.testing.assert_allclose(scaled, exact, rtol=1e-9, atol=1e-12)
    with pytest.raises(ValueError):
        fs.kernel_scaling_check(SPEC, 0.0, x, 0.3)
