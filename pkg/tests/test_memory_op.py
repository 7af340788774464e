import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from memoryflow import kernel as K
from memoryflow import memory_op as op
from oracles import c_sum


def test_first_weight_closed_form():
    w = op.build_weights(K.normalized_fractional(0.5, 1.0), 0.01)
    assert w.M == 100
    assert w.weights[0] == pytest.approx(10.0, rel=1e-14)


def test_two_cell_weights():
    w = op.build_weights(K.normalized_fractional(0.5, 1.0), 0.5)
    assert w.M == 2
    # (1/(k tau)) times the cell mass: the first cell holds mass 0.5^0.5
    assert w.weights[0] == pytest.approx(math.sqrt(0.5) / 0.5, rel=1e-14)
    assert w.weights[1] == pytest.approx(1 - math.sqrt(0.5), rel=1e-14)
    assert w.weights[1] == pytest.approx(0.29289, abs=1e-5)


@given(st.floats(0.05, 0.95), st.integers(1, 3000))
def test_weights_closed_form(a, M):
    d = 0.3
    w = op.build_weights(K.normalized_fractional(a, d), d / M)
    tau = d / M
    k = np.arange(1, M + 1)
    ref = d ** (a - 1) / (k * tau) * ((k * tau) ** (1 - a) - ((k - 1) * tau) ** (1 - a))
    np.testing.assert_allclose(w.weights, ref, rtol=1e-9)
    assert np.all(w.weights > 0)
    assert w.W0 == math.fsum(w.weights)


def test_nonintegral_depth_rejected():
    with pytest.raises(op.ConfigurationError, match="nearest admissible tau"):
        op.build_weights(K.normalized_fractional(0.5, 1.0), 0.3)
    with pytest.raises(op.ConfigurationError):
        op.memory_depth(1.0, 0.0)


def test_weights_are_read_only():
    w = op.build_weights(K.normalized_fractional(0.5, 1.0), 0.1)
    with pytest.raises(ValueError):
        w.weights[0] = 1.0


@given(st.floats(-1e6, 1e6), st.integers(1, 200))
def test_apply_annihilates_constants(c, M):
    w = op.build_weights(K.normalized_fractional(0.4, 1.0), 1.0 / M)
    assert op.apply(w, c, np.full(M, c)) == 0.0


def test_apply_checks_history_length():
    w = op.build_weights(K.normalized_fractional(0.4, 1.0), 0.25)
    with pytest.raises(ValueError, match="exactly M=4"):
        op.apply(w, 1.0, np.zeros(3))


@given(st.lists(st.floats(-10, 10), min_size=9, max_size=9), st.floats(-3, 3), st.floats(-3, 3))
def test_apply_linear(vals, a, b):
    w = op.build_weights(K.normalized_fractional(0.6, 0.8), 0.2)
    u = np.array(vals[:5])
    v = np.array(vals[4:])
    lhs = op.apply(w, a * u[0] + b * v[0], a * u[1:] + b * v[1:])
    rhs = a * op.apply(w, u[0], u[1:]) + b * op.apply(w, v[0], v[1:])
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_apply_linear_trajectory_recovers_mass():
    spec = K.truncated_caputo(0.4, 1.0)
    b = 3.0
    errs = []
    for M in (16, 32, 64, 128):
        w = op.build_weights(spec, 1.0 / M)
        t = 2.0
        hist = b * (t - w.tau * np.arange(1, M + 1))
        errs.append(abs(op.apply(w, b * t, hist) - b * K.mass(spec)))
    # sum_k w_k k tau is exactly the kernel mass
    assert max(errs) < 1e-12


def _exact_operator(v, t, a, d):
    with mp.workdps(30):
        t = mp.mpf(t)
        rho = lambda s: (1 - a) * mp.mpf(d) ** (a - 1) * s ** (-a)
        d1, d2 = mp.diff(v, t), mp.diff(v, t, 2)

        def quotient(s):
            # Taylor form where the difference would cancel to noise
            return d1 - s * d2 / 2 if s < 1e-12 else (v(t) - v(t - s)) / s
        p = 1 / (1 - mp.mpf(a))
        f = lambda u: quotient(u ** p) * rho(u ** p) * p * u ** (p - 1)
        return float(mp.quad(f, mp.linspace(0, mp.mpf(d) ** (1 / p), 5)))


@pytest.mark.parametrize("name,v,vn", [
    ("t2", lambda t: t ** 2, lambda t: t ** 2),
    ("t3", lambda t: t ** 3, lambda t: t ** 3),
    ("sin", mp.sin, np.sin),
])
def test_consistency_order(name, v, vn):
    a, d, t = 0.5, 1.0, 1.3
    exact = _exact_operator(v, t, a, d)
    if name == "t2":
        assert exact == pytest.approx(2 * t - 1 / 3, rel=1e-12)
    errs = []
    for M in (32, 64, 128, 256, 512):
        w = op.build_weights(K.normalized_fractional(a, d), d / M)
        hist = vn(t - w.tau * np.arange(1, M + 1))
        errs.append(abs(op.apply(w, vn(t), hist) - exact))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates >= 0.9), rates


def test_single_cell_is_backward_difference():
    for spec in (K.normalized_fractional(0.3, 0.1), K.truncated_caputo(0.7, 0.4)):
        w = op.build_weights(spec, spec.delta)
        assert w.weights[0] == pytest.approx(K.mass(spec) / spec.delta)
        assert op.apply(w, 2.0, [1.5]) == pytest.approx(0.5 * K.mass(spec) / spec.delta)


@pytest.mark.parametrize("a,d", [(0.5, 1.0), (0.75, 0.2), (0.2, 0.5), (0.05, 3.0), (0.95, 0.01)])
def test_c_coefficient_against_series(a, d):
    assert op.c_coefficient(a, d) == pytest.approx(c_sum(a, d), rel=1e-12)


def test_c_coefficient_properties():
    assert op.c_coefficient(0.5, 1.0) > 1.0
    for a in (0.2, 0.5, 0.8):
        assert op.c_coefficient(a, 0.6) / op.c_coefficient(a, 0.3) == pytest.approx(2 ** (a - 1), rel=1e-14)
    with pytest.raises(ValueError):
        op.c_coefficient(1.0, 1.0)


def test_c_coefficient_limit_of_weights():
    a, d = 0.75, 0.2
    tau = d / 2048
    w = op.build_weights(K.normalized_fractional(a, d), tau)
    ratio = w.W0 * tau ** a / op.c_coefficient(a, d)
    assert ratio == pytest.approx(1.0, abs=0.02)
    assert ratio < 1.0  # the finite sum stops at M


@given(st.integers(1, 12), st.lists(st.floats(-5, 5), min_size=1, max_size=40))
def test_history_ring_matches_list(M, pushes):
    ring = op.HistoryRing(M, fill=0.0)
    ref = [0.0] * M
    w = np.arange(1.0, M + 1)
    for v in pushes:
        ring.push(v)
        ref = [v] + ref[:-1]
        np.testing.assert_array_equal(ring.ordered(), ref)
        assert ring.weighted_sum(w) == pytest.approx(float(np.dot(w, ref)))


def test_history_ring_fields():
    ring = op.HistoryRing(3, shape=(2, 2))
    ring.seed(np.stack([np.full((2, 2), v) for v in (3.0, 2.0, 1.0)]))
    ring.push(np.full((2, 2), 4.0))
    np.testing.assert_array_equal(ring.ordered()[:, 0, 0], [4.0, 3.0, 2.0])
    np.testing.assert_allclose(ring.weighted_sum(np.array([1.0, 10.0, 100.0])), np.full((2, 2), 234.0))


def test_weights_csv():
    w = op.build_weights(K.normalized_fractional(0.5, 1.0), 0.5)
    lines = op.weights_csv(w).splitlines()
    assert lines[0] == "k,w_k"
    assert len(lines) == 3
    assert float(lines[2].split(",")[1]) == w.weights[1]
