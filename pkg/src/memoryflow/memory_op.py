"""Discrete nonlocal time operator on a uniform step.

The operator acting on a sampled trajectory v is

    G_tau v(t) = W0 v(t) - sum_{k=1}^{M} w_k v(t - k tau),

with w_k = (1 / (k tau)) * integral of rho over ((k-1) tau, k tau) and
W0 = sum_k w_k. The same table (normalized) is the waiting-time law of
the trapping random walk in :mod:`memoryflow.walker`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import binom, zeta

from .kernel import KernelSpec, cell_mass_steps

__all__ = [
    "ConfigurationError",
    "MemoryWeights",
    "build_weights",
    "memory_depth",
    "apply",
    "c_coefficient",
    "HistoryRing",
    "weights_csv",
]


class ConfigurationError(ValueError):
    """Inconsistent discretization parameters."""


@dataclass(frozen=True)
class MemoryWeights:
    tau: float
    weights: np.ndarray
    W0: float

    @property
    def M(self) -> int:
        return self.weights.size

    @property
    def delta(self) -> float:
        return self.M * self.tau


def memory_depth(delta: float, tau: float) -> int:
    """Number of steps M = delta / tau, which must be an integer.

    Raises
    ------
    ConfigurationError
        If delta / tau is not an integer to 1e-12 relative accuracy; the
        message names the nearest admissible step.
    """
    if not tau > 0:
        raise ConfigurationError(f"time step must be positive, got {tau}")
    ratio = delta / tau
    M = max(1, round(ratio))
    if abs(ratio - M) > 1e-12 * ratio:
        raise ConfigurationError(
            f"delta/tau = {ratio!r} is not an integer; nearest admissible tau is {delta / M!r} (M={M})")
    return M


def build_weights(spec: KernelSpec, tau: float) -> MemoryWeights:
    M = memory_depth(spec.delta, tau)
    k = np.arange(1, M + 1, dtype=float)
    # cell edges from k * (delta / M) so the last edge is exactly delta
    h = spec.delta / M
    w = cell_mass_steps(spec, h, k) / (k * h)
    w.setflags(write=False)
    return MemoryWeights(tau=h, weights=w, W0=float(math.fsum(w)))


def apply(w: MemoryWeights, current: float, history) -> float:
    """Discrete operator at one node.

    ``history[k-1]`` is the value at ``t - k tau`` (most recent first).
    """
    history = np.asarray(history, dtype=float)
    if history.shape[0] != w.M:
        raise ValueError(f"history must hold exactly M={w.M} values, got {history.shape[0]}")
    # written as a sum of differences so constants cancel exactly
    return np.tensordot(w.weights, current - history, axes=(0, 0))


def c_coefficient(alpha: float, delta: float, direct_terms: int = 64) -> float:
    """Limit of W0 * tau**alpha as tau -> 0 for the normalized fractional kernel.

    c = delta**(alpha-1) * sum_k (k**(1-alpha) - (k-1)**(1-alpha)) / k.
    The first ``direct_terms`` terms are summed directly; the remainder is
    expanded in powers of 1/k, each of which sums to a Hurwitz zeta value.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    beta = 1.0 - alpha
    k = np.arange(2, direct_terms + 1, dtype=float)
    head = 1.0 + math.fsum(k ** beta * -np.expm1(beta * np.log1p(-1.0 / k)) / k)
    # (k^b - (k-1)^b)/k = -sum_j binom(b, j) (-1)^j k^(-alpha-j); ratio 1/K per term
    tail = 0.0
    for j in range(1, 40):
        term = -binom(beta, j) * (-1) ** j * zeta(alpha + j, direct_terms + 1)
        tail += term
        if abs(term) < 1e-18:
            break
    return delta ** (alpha - 1) * (head + tail)


class HistoryRing:
    """Fixed-capacity store of the last M states, most recent first.

    Holds scalars (``shape=()``) or fields of any shape. Pushing is O(1);
    the weighted sum costs one contraction over the M slots. Single-writer:
    concurrent solves need their own rings.
    """

    def __init__(self, M: int, shape=(), fill=0.0):
        self._data = np.empty((M,) + tuple(shape))
        self._data[...] = fill
        self._head = 0  # slot of the most recent entry

    @property
    def M(self) -> int:
        return self._data.shape[0]

    def push(self, value):
        self._head = (self._head - 1) % self.M
        self._data[self._head] = value

    def ordered(self) -> np.ndarray:
        """Copy of the contents, most recent first."""
        return np.roll(self._data, -self._head, axis=0)

    def weighted_sum(self, weights) -> np.ndarray:
        """sum_k weights[k-1] * (value at lag k)."""
        return np.tensordot(np.roll(weights, self._head), self._data, axes=(0, 0))

    def seed(self, values):
        """Fill from an array ordered most recent first."""
        self._data[...] = values
        self._head = 0


def weights_csv(w: MemoryWeights) -> str:
    lines = ["k,w_k"]
    lines += [f"{k},{v:.17g}" for k, v in enumerate(w.weights, start=1)]
    return "\n".join(lines) + "\n"
