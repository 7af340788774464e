"""Independent reference computations used by the tests.

Nothing here imports the package's numerical routines: the values are
produced by mpmath quadrature and summation, closed-form series, or a
plain numpy port of the Philox generator.
"""
import math

import mpmath as mp
import numpy as np


def rho_normalized(alpha, delta):
    return lambda s: (1 - alpha) * delta ** (alpha - 1) * s ** (-alpha)


def symbol_quad(rho, delta, z, dps=30, alpha=None):
    """K(z) by tanh-sinh quadrature of (1 - e^{-zs}) rho(s) / s over (0, delta).

    For power-law kernels pass ``alpha``: the substitution s = v^(1/(1-alpha))
    removes the endpoint singularity.
    """
    with mp.workdps(dps):
        z = mp.mpmathify(z)
        if alpha is None:
            return complex(mp.quad(lambda s: -mp.expm1(-z * s) / s * rho(s), [0, delta / 8, delta / 2, delta]))
        p = 1 / (1 - mp.mpf(alpha))

        def f(v):
            s = v ** p
            return -mp.expm1(-z * s) / s * rho(s) * p * v ** (p - 1)
        top = mp.mpf(delta) ** (1 / p)
        return complex(mp.quad(f, mp.linspace(0, top, 6)))


def c_sum(alpha, delta, K=200000):
    """delta^(alpha-1) sum_k (k^(1-alpha) - (k-1)^(1-alpha)) / k.

    Terms up to K are summed directly; the tail uses the Euler-Maclaurin
    formula with an mpmath integral.
    """
    b = 1 - alpha
    k = np.arange(2, K + 1, dtype=float)
    head = 1.0 + math.fsum(-k ** (b - 1) * np.expm1(b * np.log1p(-1 / k)))
    with mp.workdps(30):
        f = lambda x: -x ** (b - 1) * mp.expm1(b * mp.log1p(-1 / x))
        a0 = mp.mpf(K + 1)
        # x = a0 t^(-1/alpha) turns the k^(-1-alpha) tail into a bounded integrand on (0, 1]
        g = lambda t: f(a0 * t ** (-1 / alpha)) * a0 / alpha * t ** (-1 / alpha - 1)
        tail = (mp.quad(g, [0, 0.5, 1]) + f(a0) / 2 - mp.diff(f, a0) / 12
                + mp.diff(f, a0, 3) / 720 - mp.diff(f, a0, 5) / 30240)
        return float(delta ** (alpha - 1) * (head + tail))


def _large_z_constants(alpha, delta):
    # K(z) = A z^alpha - B + O(e^{-z delta}) for the normalized kernel
    C = (1 - alpha) * delta ** (alpha - 1)
    A = C * math.gamma(1 - alpha) / alpha
    B = C * delta ** (-alpha) / alpha
    return A, B


def peak_short_time(alpha, delta, t, terms=400):
    """Exact u(0, t) for 0 < t < delta (normalized kernel, Dirac history)."""
    A, B = _large_z_constants(alpha, delta)
    with mp.workdps(40):
        r = mp.mpf(B) / A
        t = mp.mpf(t)
        s = mp.nsum(lambda n: mp.binomial(0.5, n) * (-r) ** n * t ** (n * alpha - alpha / 2)
                    / mp.gamma(1 - alpha / 2 + n * alpha), [0, mp.inf])
        return float(mp.sqrt(A) / 2 * s)


def msd_short_time(alpha, delta, t):
    """Exact zero-history solution of G m = 2 for 0 < t < delta (normalized kernel)."""
    A, B = _large_z_constants(alpha, delta)
    with mp.workdps(40):
        r = mp.mpf(B) / A
        t = mp.mpf(t)
        s = mp.nsum(lambda n: r ** n * t ** (alpha * (n + 1)) / mp.gamma(1 + alpha * (n + 1)), [0, mp.inf])
        return float(2 / mp.mpf(A) * s)


def laplace_invert(F, t, dps=30):
    """mpmath de Hoog inversion of a transform given as an mpmath callable."""
    with mp.workdps(dps):
        return float(mp.invertlaplace(F, t, method="dehoog"))


_M0, _M1 = np.uint64(0xD2511F53), np.uint64(0xCD9E8D57)
_W0, _W1 = np.uint32(0x9E3779B9), np.uint32(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)


def philox4x32_numpy(counter, key, rounds=10):
    """Reference Philox4x32 in vectorized numpy (uint32 lanes)."""
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint32) for c in counter)
    k0, k1 = (np.asarray(k, dtype=np.uint32) for k in key)
    with np.errstate(over="ignore"):
        for r in range(rounds):
            p0 = c0.astype(np.uint64) * _M0
            p1 = c2.astype(np.uint64) * _M1
            hi0, lo0 = (p0 >> np.uint64(32)).astype(np.uint32), (p0 & _MASK).astype(np.uint32)
            hi1, lo1 = (p1 >> np.uint64(32)).astype(np.uint32), (p1 & _MASK).astype(np.uint32)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
            if r < rounds - 1:
                k0 = k0 + _W0
                k1 = k1 + _W1
    return c0, c1, c2, c3


def gaussian(x, t, D=1.0):
    return np.exp(-np.asarray(x) ** 2 / (4 * D * t)) / np.sqrt(4 * np.pi * D * t)
