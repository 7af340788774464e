"""Memory kernels rho_delta(s) supported on (0, delta) and their Laplace symbol.

Three families are available:

* ``NORMALIZED_FRACTIONAL``: ``(1 - alpha) delta**(alpha - 1) s**(-alpha)``,
  a probability density on (0, delta).
* ``TRUNCATED_CAPUTO``: ``alpha / Gamma(1 - alpha) s**(-alpha)`` cut off at
  delta, the kernel whose infinite-horizon limit is the Caputo derivative.
* ``TABULATED``: piecewise-linear interpolation of user samples.

Every family may carry a constant multiplier ``scale``.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import exp1

__all__ = [
    "KernelFamily",
    "KernelSpec",
    "KernelDomainError",
    "normalized_fractional",
    "truncated_caputo",
    "tabulated",
    "load_tabulated_csv",
    "density",
    "mass",
    "first_moment",
    "cell_mass",
    "cell_mass_steps",
    "symbol_K",
]

EULER_GAMMA = 0.57721566490153286061

# |z delta| below which K is summed from its Taylor series
_SERIES_RADIUS = 2.0


class KernelDomainError(ValueError):
    """Argument outside the domain on which a kernel quantity is defined."""


class KernelFamily(enum.Enum):
    NORMALIZED_FRACTIONAL = "normalized_fractional"
    TRUNCATED_CAPUTO = "truncated_caputo"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class KernelSpec:
    """A memory kernel with horizon ``delta``.

    ``alpha`` is ignored by tabulated kernels. ``table`` holds the sample
    abscissae and values as two float arrays.
    """

    family: KernelFamily
    delta: float
    alpha: float = float("nan")
    scale: float = 1.0
    table: tuple[np.ndarray, np.ndarray] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.family is KernelFamily.TABULATED:
            if self.table is None:
                raise ValueError("tabulated kernel needs a table")
            s, rho = (np.asarray(a, dtype=float) for a in self.table)
            if s.ndim != 1 or s.shape != rho.shape or s.size < 2:
                raise ValueError("table must be two 1-D arrays of equal length >= 2")
            if s[0] <= 0 or s[-1] > self.delta * (1 + 1e-12) or np.any(np.diff(s) <= 0):
                raise ValueError("table abscissae must increase strictly within (0, delta]")
            if np.any(rho < 0):
                raise ValueError("kernel samples must be nonnegative")
            object.__setattr__(self, "table", (s, rho))
        elif not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def is_fractional(self) -> bool:
        return self.family is not KernelFamily.TABULATED

    @property
    def power_coefficient(self) -> float:
        """Constant C in rho(s) = C s**(-alpha) for the fractional families."""
        a = self.alpha
        if self.family is KernelFamily.NORMALIZED_FRACTIONAL:
            c = (1 - a) * self.delta ** (a - 1)
        elif self.family is KernelFamily.TRUNCATED_CAPUTO:
            c = a / math.gamma(1 - a)
        else:
            raise TypeError("tabulated kernels have no power-law coefficient")
        return self.scale * c

    def scaled(self, sigma: float) -> "KernelSpec":
        """The kernel ``sigma * rho``."""
        return replace(self, scale=self.scale * sigma)


def normalized_fractional(alpha: float, delta: float) -> KernelSpec:
    return KernelSpec(KernelFamily.NORMALIZED_FRACTIONAL, delta=delta, alpha=alpha)


def truncated_caputo(alpha: float, delta: float) -> KernelSpec:
    return KernelSpec(KernelFamily.TRUNCATED_CAPUTO, delta=delta, alpha=alpha)


def tabulated(s, rho, delta: float | None = None) -> KernelSpec:
    s = np.asarray(s, dtype=float)
    return KernelSpec(KernelFamily.TABULATED, delta=float(s[-1]) if delta is None else delta,
                      table=(s, np.asarray(rho, dtype=float)))


def load_tabulated_csv(path, delta: float | None = None) -> KernelSpec:
    """Read a kernel table from a CSV file with header ``s,rho``."""
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header != ["s", "rho"]:
            raise ValueError(f"{path}: expected header 's,rho', got {','.join(header)!r}")
        rows = [(float(a), float(b)) for a, b in reader if a.strip()]
    s, rho = np.array(rows).T
    return tabulated(s, rho, delta)


# -- piecewise-linear helpers for tabulated kernels ----------------------------

def _segments(spec):
    """Nodes and per-segment linear coefficients rho = a + b s.

    The first segment (0, s_1) holds the value rho(s_1) constant.
    """
    s, rho = spec.table
    nodes = np.concatenate(([0.0], s))
    b = np.concatenate(([0.0], np.diff(rho) / np.diff(s)))
    a = np.concatenate(([rho[0]], rho[:-1] - b[1:] * s[:-1]))
    return nodes, spec.scale * a, spec.scale * b


def _table_cumulative(spec, x):
    """Integral of the interpolated tabulated density over (0, x)."""
    nodes, a, b = _segments(spec)
    x = np.clip(np.asarray(x, dtype=float), 0.0, nodes[-1])
    seg_int = a * np.diff(nodes) + 0.5 * b * np.diff(nodes ** 2)
    cum = np.concatenate(([0.0], np.cumsum(seg_int)))
    j = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, len(a) - 1)
    lo = nodes[j]
    return cum[j] + a[j] * (x - lo) + 0.5 * b[j] * (x * x - lo * lo)


def density(spec: KernelSpec, s):
    """Evaluate rho_delta(s); zero for s >= delta.

    Raises
    ------
    KernelDomainError
        If any ``s <= 0``.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0):
        raise KernelDomainError("kernel is only defined for s > 0")
    inside = s_arr < spec.delta
    if spec.is_fractional:
        out = np.where(inside, spec.power_coefficient * np.where(inside, s_arr, 1.0) ** (-spec.alpha), 0.0)
    else:
        ts, trho = spec.table
        out = np.where(inside, spec.scale * np.interp(s_arr, ts, trho, left=trho[0], right=0.0), 0.0)
    return out if out.ndim else float(out)


def cell_mass(spec: KernelSpec, lo, hi):
    """Integral of rho over (lo, hi) with 0 <= lo <= hi <= delta.

    Differences of nearby powers are formed with expm1/log1p so that cells
    deep in the memory window keep full relative accuracy.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if spec.is_fractional:
        beta = 1.0 - spec.alpha
        ratio = np.divide(lo, hi, out=np.zeros(np.broadcast(lo, hi).shape), where=hi > 0)
        diff = np.where(ratio > 0,
                        -hi ** beta * np.expm1(beta * np.log(np.where(ratio > 0, ratio, 1.0))),
                        hi ** beta)
        return spec.power_coefficient * diff / beta
    return _table_cumulative(spec, hi) - _table_cumulative(spec, lo)


def cell_mass_steps(spec: KernelSpec, step: float, k):
    """Integral of rho over ((k-1) step, k step) for integer cell indices k >= 1.

    On a uniform grid the ratio of cell edges is exactly (k-1)/k, which
    this form exploits; it is accurate to rounding even for k ~ 1e6.
    """
    k = np.asarray(k, dtype=float)
    if not spec.is_fractional:
        return cell_mass(spec, (k - 1) * step, k * step)
    beta = 1.0 - spec.alpha
    with np.errstate(divide="ignore"):
        shrink = np.where(k > 1, -np.expm1(beta * np.log1p(-1.0 / np.maximum(k, 2.0))), 1.0)
    return spec.power_coefficient * (k * step) ** beta * shrink / beta


def mass(spec: KernelSpec) -> float:
    """Total mass of the kernel over (0, delta)."""
    return float(cell_mass(spec, 0.0, spec.delta))


def first_moment(spec: KernelSpec) -> float:
    """The integral of s * rho(s) over (0, delta)."""
    if spec.is_fractional:
        return spec.power_coefficient * spec.delta ** (2 - spec.alpha) / (2 - spec.alpha)
    nodes, a, b = _segments(spec)
    return float(np.sum(a * np.diff(nodes ** 2) / 2 + b * np.diff(nodes ** 3) / 3))


# -- Laplace symbol --------------------------------------------------------------

def _power_symbol_series(w, alpha):
    # sum_{n>=1} (-1)^(n+1) w^n / (n! (n - alpha)); |w| < 2 needs < 40 terms
    term = np.ones_like(w)
    out = np.zeros_like(w)
    for n in range(1, 40):
        term = term * (-w) / n
        out -= term / (n - alpha)
    return out


def _expint_cf(p, w, max_iter=5000):
    """Generalized exponential integral E_p(w) for Re w > 0 and |w| >= 2.

    Modified Lentz evaluation of the continued fraction
    E_p(w) = e^{-w} / (w + p - 1 p / (w + p + 2 - 2 (p + 1) / (w + p + 4 - ...))).
    """
    tiny = 1e-300
    b = w + p
    c = np.full_like(w, 1.0 / tiny)
    d = 1.0 / b
    h = d
    for i in range(1, max_iter):
        an = -i * (p - 1 + i)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        step = c * d
        h = h * step
        if np.all(np.abs(step - 1.0) < 1e-16):
            break
    return h * np.exp(-w)


def _power_symbol(w, alpha):
    """J(w) = int_0^1 (1 - exp(-w u)) u^(-1-alpha) du for Re w > 0."""
    out = np.empty_like(w)
    small = np.abs(w) < _SERIES_RADIUS
    if small.any():
        out[small] = _power_symbol_series(w[small], alpha)
    big = ~small
    if big.any():
        wb = w[big]
        out[big] = (math.gamma(1 - alpha) / alpha * wb ** alpha - 1 / alpha
                    + _expint_cf(1 + alpha, wb))
    return out


def _ein(w):
    """Entire exponential integral Ein(w) = int_0^w (1 - e^{-t}) / t dt."""
    out = np.empty_like(w)
    small = np.abs(w) < 1.0
    ws = w[small]
    term = np.ones_like(ws)
    acc = np.zeros_like(ws)
    for n in range(1, 30):
        term = term * (-ws) / n
        acc -= term / n
    out[small] = acc
    wb = w[~small]
    out[~small] = exp1(wb) + np.log(wb) + EULER_GAMMA
    return out


def _tabulated_symbol(spec, z):
    nodes, a, b = _segments(spec)
    zz = z[..., None]
    lo, hi = nodes[:-1], nodes[1:]
    flat = (zz * nodes).reshape(-1)
    ein = _ein(flat.astype(complex)).reshape(zz.shape[:-1] + (nodes.size,))
    part_a = a * (ein[..., 1:] - ein[..., :-1])
    part_b = b * ((hi - lo) - (np.exp(-zz * lo) - np.exp(-zz * hi)) / zz)
    return np.sum(part_a + part_b, axis=-1)


def symbol_K(spec: KernelSpec, z):
    """Laplace symbol K(z) = int_0^delta (1 - e^{-zs}) s^{-1} rho(s) ds.

    Defined on the open right half-plane. For the power-law families the
    integral reduces to ``C delta**(-alpha) J(z delta)`` with J summed from
    its Taylor series near the origin and otherwise written through the
    generalized exponential integral E_{1+alpha}.

    Raises
    ------
    KernelDomainError
        If ``Re z <= 0`` anywhere.
    """
    z_arr = np.asarray(z, dtype=complex)
    if np.any(z_arr.real <= 0):
        raise KernelDomainError("K(z) is only evaluated for Re z > 0")
    shape = z_arr.shape
    flat = z_arr.reshape(-1)
    if spec.is_fractional:
        a = spec.alpha
        out = spec.power_coefficient * spec.delta ** (-a) * _power_symbol(flat * spec.delta, a)
    else:
        out = _tabulated_symbol(spec, flat)
    out = out.reshape(shape)
    return out if shape else complex(out)
