"""Scalar nonlocal initial-value problems and mean-square-displacement diagnostics.

The mean square displacement m(t) of the fundamental solution obeys
G_delta m = 2 for t > 0 with m = 0 on (-delta, 0); other history data
g on (-delta, 0) give the history-dependent growth curves.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .kernel import KernelSpec, mass
from .memory_op import MemoryWeights

__all__ = [
    "HistoryKind",
    "HistorySignal",
    "TimeSeries",
    "solve_scalar",
    "local_slope",
    "crossover_time",
    "early_msd_asymptote",
    "parse_history",
]


class HistoryKind(enum.Enum):
    ZERO = "zero"
    AFFINE = "affine"
    STEP = "step"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class HistorySignal:
    """Prescribed data g(t) on (-delta, 0).

    ``AFFINE`` is ``k (1 + 2t)``; ``STEP`` is ``height`` on ``[t_on, t_off]``
    and zero elsewhere; ``TABULATED`` carries samples on the step grid
    ordered most recent first (value at -tau first), plus the value at 0-.
    """

    kind: HistoryKind
    k: float = 1.0
    height: float = 0.0
    t_on: float = 0.0
    t_off: float = 0.0
    samples: np.ndarray | None = field(default=None, compare=False, repr=False)
    value_at_zero: float = 0.0

    @classmethod
    def zero(cls):
        return cls(HistoryKind.ZERO)

    @classmethod
    def affine(cls, k: float):
        return cls(HistoryKind.AFFINE, k=k)

    @classmethod
    def step(cls, height: float, t_on: float, t_off: float):
        if t_on > t_off:
            raise ValueError("step history needs t_on <= t_off")
        return cls(HistoryKind.STEP, height=height, t_on=t_on, t_off=t_off)

    @classmethod
    def tabulated(cls, samples, value_at_zero: float | None = None):
        samples = np.asarray(samples, dtype=float)
        v0 = float(samples[0]) if value_at_zero is None else float(value_at_zero)
        return cls(HistoryKind.TABULATED, samples=samples, value_at_zero=v0)

    def __call__(self, t):
        """Evaluate g at times t < 0 (analytic kinds only)."""
        t = np.asarray(t, dtype=float)
        if self.kind is HistoryKind.ZERO:
            return np.zeros_like(t)
        if self.kind is HistoryKind.AFFINE:
            return self.k * (1 + 2 * t)
        if self.kind is HistoryKind.STEP:
            return np.where((t >= self.t_on) & (t <= self.t_off), self.height, 0.0)
        raise TypeError("tabulated history has no closed form; use on_grid")

    def on_grid(self, tau: float, M: int) -> np.ndarray:
        """Values at -tau, -2 tau, ..., -M tau (most recent first)."""
        if self.kind is HistoryKind.TABULATED:
            if self.samples.size != M:
                raise ValueError(f"tabulated history has {self.samples.size} samples, need {M}")
            return self.samples.copy()
        return self(-tau * np.arange(1, M + 1))

    def left_limit(self) -> float:
        """g(0-), the value the solution starts from."""
        if self.kind is HistoryKind.TABULATED:
            return self.value_at_zero
        if self.kind is HistoryKind.STEP:
            return self.height if self.t_on < 0 <= self.t_off else 0.0
        return float(self(0.0))


@dataclass
class TimeSeries:
    """Uniformly sampled trajectory; ``values[n]`` belongs to ``t = n * tau``."""

    tau: float
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.tau * np.arange(self.values.size)

    def at(self, t: float) -> float:
        n = round(t / self.tau)
        if abs(n * self.tau - t) > 1e-9 * max(t, self.tau):
            raise ValueError(f"t={t} is not on the step grid (tau={self.tau})")
        return float(self.values[n])


def solve_scalar(w: MemoryWeights, history: HistorySignal, rhs, T: float,
                 metadata: dict | None = None) -> TimeSeries:
    """March G_tau m = f from t = 0 to T.

    ``m[0]`` is the left limit g(0-) and for n >= 1

        m[n] = (f(t_n) + sum_k w_k m[n-k]) / W0,

    where indices below zero read the history. ``rhs`` is a callable of t
    or a constant.
    """
    tau, M = w.tau, w.M
    N = int(round(T / tau))
    f: Callable = rhs if callable(rhs) else (lambda t, c=float(rhs): c)
    # buffer layout: [g(-M tau) ... g(-tau), m0, m1, ..., mN]
    buf = np.empty(M + N + 1)
    buf[:M] = history.on_grid(tau, M)[::-1]
    buf[M] = history.left_limit()
    rev_w = w.weights[::-1].copy()
    for n in range(1, N + 1):
        i = M + n
        buf[i] = (f(n * tau) + rev_w @ buf[i - M:i]) / w.W0
    meta = {"tau": tau, "M": M, "history": history.kind.value}
    meta.update(metadata or {})
    return TimeSeries(tau, buf[M:].copy(), meta)


def local_slope(series: TimeSeries) -> TimeSeries:
    """Log-log slope d log m / d log t by centered differences.

    The first and last nodes, and any node whose neighbours are not
    strictly positive, come back as NaN; ``metadata["excluded"]`` lists
    the interior nodes dropped for nonpositive values.
    """
    m = np.asarray(series.values, dtype=float)
    t = series.times
    out = np.full(m.shape, np.nan)
    if m.size >= 3:
        lo, hi = m[:-2], m[2:]
        ok = (lo > 0) & (hi > 0) & (t[:-2] > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = (np.log(hi) - np.log(lo)) / (np.log(t[2:]) - np.log(np.where(t[:-2] > 0, t[:-2], 1.0)))
        out[1:-1] = np.where(ok, slope, np.nan)
        excluded = (np.flatnonzero(~ok & (t[:-2] > 0)) + 1).tolist()
    else:
        excluded = []
    meta = dict(series.metadata, excluded=excluded)
    return TimeSeries(series.tau, out, meta)


def _moving_average(x, window):
    """Centered moving average that ignores NaNs; NaN where the window is empty."""
    half = window // 2
    valid = np.isfinite(x)
    xs = np.concatenate(([0.0], np.cumsum(np.where(valid, x, 0.0))))
    ns = np.concatenate(([0], np.cumsum(valid)))
    idx = np.arange(x.size)
    lo = np.clip(idx - half, 0, x.size)
    hi = np.clip(idx + half + 1, 0, x.size)
    count = ns[hi] - ns[lo]
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(count > 0, (xs[hi] - xs[lo]) / count, np.nan)


def crossover_time(series: TimeSeries, alpha: float, window: int = 5,
                   threshold: float | None = None) -> float | None:
    """First time the smoothed log-log slope reaches (alpha + 1) / 2.

    Returns ``None`` when the slope never crosses the threshold on the
    sampled range.
    """
    level = (alpha + 1) / 2 if threshold is None else threshold
    slope = _moving_average(local_slope(series).values, window)
    t = series.times
    good = np.flatnonzero(np.isfinite(slope))
    if good.size < 2:
        return None
    s, tt = slope[good], t[good]
    above = s >= level
    if above[0]:
        return None
    hits = np.flatnonzero(above[1:] & ~above[:-1])
    if hits.size == 0:
        return None
    i = hits[0]
    s0, s1 = s[i], s[i + 1]
    return float(tt[i] + (level - s0) / (s1 - s0) * (tt[i + 1] - tt[i]))


def early_msd_asymptote(spec: KernelSpec, t):
    """Small-time MSD law sin(alpha pi) delta^(1-alpha) / ((1-alpha) pi) t^alpha.

    This is the coefficient as commonly quoted for the normalized fractional
    kernel. The leading term of the zero-history solution of G m = 2 is
    twice this value; see :func:`msd_leading_term`.
    """
    a, d = spec.alpha, spec.delta
    return math.sin(a * math.pi) * d ** (1 - a) / ((1 - a) * math.pi) * np.asarray(t) ** a


def msd_leading_term(spec: KernelSpec, t):
    """Leading small-time term 2 t^alpha / (A Gamma(1+alpha)) of the zero-history MSD.

    A is the coefficient of z^alpha in the large-z expansion of K(z).
    """
    a = spec.alpha
    A = spec.power_coefficient * math.gamma(1 - a) / a
    return 2.0 / (A * math.gamma(1 + a)) * np.asarray(t) ** a


def late_msd_asymptote(spec: KernelSpec, t):
    """Long-time law m ~ 2 t / mass."""
    return 2.0 * np.asarray(t) / mass(spec)


def parse_history(text: str, delta: float) -> HistorySignal:
    """Parse ``zero``, ``affine:k`` or ``step:h,a,b`` (a, b in units of time)."""
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    if name == "zero":
        return HistorySignal.zero()
    if name == "affine":
        return HistorySignal.affine(float(arg) if arg else 1.0)
    if name == "step":
        if not arg:
            return HistorySignal.step(10.0, -delta, -delta / 2)
        h, a, b = (float(v) for v in arg.split(","))
        return HistorySignal.step(h, a, b)
    raise ValueError(f"unknown history {text!r}; expected zero, affine:k or step:h,a,b")
