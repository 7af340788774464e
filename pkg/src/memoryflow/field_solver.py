"""Implicit time marching of diffusion problems on boxes with zero Dirichlet data.

Three time operators share one spatial discretization:

* nonlocal in time:   (W0 I - Lap_h) u^n = sum_k w_k u^{n-k}
* local (backward Euler):   (I / tau - Lap_h) u^n = u^{n-1} / tau
* Caputo (L1 scheme):   (kappa b_0 / (tau^alpha Gamma(2-alpha)) I - Lap_h) u^n = ...

Lap_h is the 3-point (1D) or 5-point (2D) Laplacian on interior nodes.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sps
from scipy.linalg import cho_solve_banded, cholesky_banded
from scipy.sparse.linalg import LinearOperator, cg

from .kernel import KernelSpec
from .memory_op import ConfigurationError, HistoryRing, MemoryWeights, build_weights

__all__ = [
    "Grid",
    "ModelKind",
    "Model",
    "HistoryField",
    "LinearSolveError",
    "assemble_laplacian",
    "Stepper",
    "Trajectory",
    "solve",
    "second_moment",
    "total_mass",
    "total_variation",
]


class LinearSolveError(ArithmeticError):
    """An implicit step failed to reach its residual tolerance."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid with N intervals per axis; unknowns live on interior nodes."""

    dim: int
    extents: tuple
    N: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigurationError("dim must be 1 or 2")
        if self.N < 3:
            raise ConfigurationError("need at least 3 intervals per axis")
        ext = tuple(tuple(map(float, e)) for e in self.extents)
        if len(ext) != self.dim:
            raise ConfigurationError(f"expected {self.dim} extents, got {len(ext)}")
        widths = [b - a for a, b in ext]
        if any(w <= 0 for w in widths):
            raise ConfigurationError("extents must satisfy a < b")
        if self.dim == 2 and not math.isclose(widths[0], widths[1], rel_tol=1e-12):
            raise ConfigurationError("2D grids must have equal spacing on both axes")
        object.__setattr__(self, "extents", ext)

    @classmethod
    def line(cls, a: float, b: float, N: int) -> "Grid":
        return cls(1, ((a, b),), N)

    @classmethod
    def square(cls, a: float, b: float, N: int) -> "Grid":
        return cls(2, ((a, b), (a, b)), N)

    @property
    def h(self) -> float:
        a, b = self.extents[0]
        return (b - a) / self.N

    @property
    def shape(self) -> tuple:
        return (self.N - 1,) * self.dim

    @property
    def size(self) -> int:
        return (self.N - 1) ** self.dim

    def axis(self, i: int = 0) -> np.ndarray:
        """Interior node coordinates along axis i."""
        a, _ = self.extents[i]
        return a + self.h * np.arange(1, self.N)

    def mesh(self):
        if self.dim == 1:
            return (self.axis(0),)
        return tuple(np.meshgrid(self.axis(0), self.axis(1), indexing="ij"))

    def nearest_index(self, point) -> tuple:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        idx = []
        for i, p in enumerate(point):
            a, _ = self.extents[i]
            j = int(round((p - a) / self.h)) - 1
            if not 0 <= j < self.N - 1:
                raise ConfigurationError(f"point {p} is not an interior node location")
            idx.append(j)
        return tuple(idx)


def assemble_laplacian(grid: Grid) -> sps.csr_matrix:
    """Second-difference operator with homogeneous Dirichlet closure."""
    n = grid.N - 1
    d1 = sps.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]) / grid.h ** 2
    if grid.dim == 1:
        return d1.tocsr()
    eye = sps.identity(n)
    return (sps.kron(d1, eye) + sps.kron(eye, d1)).tocsr()


class ModelKind(enum.Enum):
    NONLOCAL = "nonlocal"
    LOCAL = "local"
    FRACTIONAL = "fractional"


@dataclass(frozen=True)
class Model:
    """Time operator of the problem.

    ``scale`` multiplies the Caputo derivative; it lets the fractional
    model carry the same constant as a power-law memory kernel.
    """

    kind: ModelKind
    spec: KernelSpec | None = None
    alpha: float = float("nan")
    scale: float = 1.0

    @classmethod
    def nonlocal_in_time(cls, spec: KernelSpec) -> "Model":
        return cls(ModelKind.NONLOCAL, spec=spec)

    @classmethod
    def local(cls) -> "Model":
        return cls(ModelKind.LOCAL)

    @classmethod
    def fractional(cls, alpha: float, scale: float = 1.0) -> "Model":
        if not 0 < alpha < 1:
            raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha}")
        return cls(ModelKind.FRACTIONAL, alpha=alpha, scale=scale)


@dataclass
class HistoryField:
    """Data on (-delta, 0] for a field problem.

    ``sample(t)`` returns the interior field at time t <= 0. Time
    independent data set ``static`` so the ring is filled with one array.
    """

    sample: Callable[[float], np.ndarray]
    static: bool = False
    label: str = "custom"

    @classmethod
    def constant(cls, values: np.ndarray, label="constant") -> "HistoryField":
        values = np.asarray(values, dtype=float)
        return cls(lambda t: values, static=True, label=label)

    @classmethod
    def dirac(cls, grid: Grid, x0) -> "HistoryField":
        """Unit point mass at the node nearest x0 (value 1/h^dim)."""
        u = np.zeros(grid.shape)
        u[grid.nearest_index(x0)] = 1.0 / grid.h ** grid.dim
        return cls.constant(u, label=f"dirac:{x0}")

    @classmethod
    def dirac_ring(cls, grid: Grid, lo: float = 0.25, hi: float = 0.75) -> "HistoryField":
        """Unit line density on the boundary of the square [lo, hi]^2 (2D only).

        Each perimeter node carries arc length h, hence value 1/h.
        """
        if grid.dim != 2:
            raise ConfigurationError("the ring datum needs a 2D grid")
        i0, j0 = grid.nearest_index((lo, lo))
        i1, j1 = grid.nearest_index((hi, hi))
        for p, idx in ((lo, i0), (hi, i1)):
            if not math.isclose(grid.axis(0)[idx], p, abs_tol=1e-9 * grid.h + 1e-14):
                raise ConfigurationError(f"ring side {p} must fall on a grid line")
        u = np.zeros(grid.shape)
        u[i0:i1 + 1, [j0, j1]] = 1.0 / grid.h
        u[[i0, i1], j0:j1 + 1] = 1.0 / grid.h
        return cls.constant(u, label="dirac-ring")

    @classmethod
    def analytic(cls, grid: Grid, g: Callable) -> "HistoryField":
        """g(*coords, t) evaluated on interior nodes."""
        coords = grid.mesh()
        return cls(lambda t: np.asarray(g(*coords, t), dtype=float) * np.ones(grid.shape), label="analytic")

    @classmethod
    def snapshots(cls, fields: np.ndarray, tau: float) -> "HistoryField":
        """Tabulated fields at t = 0, -tau, -2 tau, ... (most recent first)."""
        fields = np.asarray(fields, dtype=float)

        def sample(t):
            k = int(round(-t / tau))
            if not 0 <= k < fields.shape[0]:
                raise ConfigurationError(f"no snapshot for t={t}")
            return fields[k]
        return cls(sample, label="file")


class _Solver:
    """Repeated solves with A = shift * I - Lap_h."""

    def __init__(self, grid: Grid, shift: float, rtol: float = 1e-10):
        self.grid, self.rtol = grid, rtol
        lap = assemble_laplacian(grid)
        if grid.dim == 1:
            n = grid.size
            ab = np.empty((2, n))
            ab[0, 0] = 0.0
            ab[0, 1:] = -1.0 / grid.h ** 2
            ab[1] = shift + 2.0 / grid.h ** 2
            self._chol = cholesky_banded(ab)
        else:
            self.A = (shift * sps.identity(grid.size) - lap).tocsr()
            inv_diag = 1.0 / self.A.diagonal()
            self._precond = LinearOperator(self.A.shape, matvec=lambda v: inv_diag * v)

    def __call__(self, rhs: np.ndarray, guess: np.ndarray | None = None) -> np.ndarray:
        b = rhs.reshape(-1)
        if self.grid.dim == 1:
            return cho_solve_banded((self._chol, False), b).reshape(rhs.shape)
        x, info = cg(self.A, b, x0=None if guess is None else guess.reshape(-1),
                     rtol=self.rtol, atol=0.0, M=self._precond, maxiter=10 * self.grid.size)
        bnorm = np.linalg.norm(b)
        res = np.linalg.norm(b - self.A @ x) / (bnorm if bnorm > 0 else 1.0)
        if info != 0 or res > 10 * self.rtol:
            raise LinearSolveError(f"conjugate gradient stopped with relative residual {res:.3e} (info={info})")
        return x.reshape(rhs.shape)


class Stepper:
    """Advances one model by one step; owns the history it needs."""

    def __init__(self, model: Model, grid: Grid, tau: float, history: HistoryField):
        self.model, self.grid, self.tau = model, grid, tau
        self.n = 0
        u0 = np.array(history.sample(0.0), dtype=float)
        if u0.shape != grid.shape:
            raise ConfigurationError(f"history field has shape {u0.shape}, grid needs {grid.shape}")
        self.current = u0
        if model.kind is ModelKind.NONLOCAL:
            self.weights: MemoryWeights = build_weights(model.spec, tau)
            M = self.weights.M
            self.ring = HistoryRing(M, grid.shape)
            if history.static:
                self.ring.seed(np.broadcast_to(u0, (M,) + grid.shape))
            else:
                # lags 1..M read u^0, u^-1, ..., u^(1-M)
                self.ring.seed(np.stack([history.sample(-k * tau) for k in range(M)]))
            self._solve = _Solver(grid, self.weights.W0)
        elif model.kind is ModelKind.LOCAL:
            self._solve = _Solver(grid, 1.0 / tau)
        else:
            a = model.alpha
            self._coef = model.scale / (tau ** a * math.gamma(2 - a))
            self._increments: list[np.ndarray] = []  # u^j - u^(j-1), oldest first
            self._solve = _Solver(grid, self._coef)

    def _l1_weight(self, j):
        a = self.model.alpha
        return (j + 1) ** (1 - a) - j ** (1 - a)

    def step(self) -> np.ndarray:
        kind = self.model.kind
        if kind is ModelKind.NONLOCAL:
            rhs = self.ring.weighted_sum(self.weights.weights)
            new = self._solve(rhs, self.current)
            self.ring.push(new)
        elif kind is ModelKind.LOCAL:
            new = self._solve(self.current / self.tau, self.current)
        else:
            n = self.n + 1
            rhs = self.current.copy()
            if self._increments:
                # b_j for lags j = 1..n-1 applied to increments u^(n-j) - u^(n-j-1)
                b = self._l1_weight(np.arange(n - 1, 0, -1, dtype=float))
                rhs -= np.tensordot(b, np.asarray(self._increments), axes=(0, 0))
            new = self._solve(self._coef * rhs, self.current)
            self._increments.append(new - self.current)
        self.current = new
        self.n += 1
        return new


@dataclass
class Trajectory:
    times: list
    fields: list
    second_moment: np.ndarray | None = None
    peak: np.ndarray | None = None
    mass: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def field_at(self, t: float) -> np.ndarray:
        for ti, f in zip(self.times, self.fields):
            if math.isclose(ti, t, rel_tol=1e-9, abs_tol=1e-12):
                return f
        raise KeyError(f"no snapshot recorded at t={t}")


def _grid_index(t, tau):
    n = round(t / tau)
    if abs(n * tau - t) > 1e-9 * max(abs(t), tau):
        raise ConfigurationError(f"record time {t} is not on the step grid (tau={tau})")
    return int(n)


def solve(model: Model, grid: Grid, history: HistoryField, tau: float, T: float,
          record: Sequence[float] = (), center: float | None = None) -> Trajectory:
    """March from t = 0 to T and keep snapshots at the record times.

    Per-step diagnostics (peak, discrete mass and, in 1D, the second
    moment about ``center``) are stored for every step.
    """
    if model.kind is ModelKind.NONLOCAL:
        build_weights(model.spec, tau)  # validates delta / tau early
    steps = _grid_index(T, tau)
    wanted = {_grid_index(t, tau): t for t in record}
    if any(n > steps for n in wanted):
        raise ConfigurationError("record times must not exceed T")
    stepper = Stepper(model, grid, tau, history)
    if center is None:
        a, b = grid.extents[0]
        center = 0.5 * (a + b)
    peak = np.empty(steps + 1)
    mass_series = np.empty(steps + 1)
    msd = np.empty(steps + 1) if grid.dim == 1 else None
    times, fields = [], []

    def observe(n, u):
        peak[n] = u.max()
        mass_series[n] = total_mass(u, grid)
        if msd is not None:
            msd[n] = second_moment(u, grid, center)
        if n in wanted:
            times.append(wanted[n])
            fields.append(u.copy())

    observe(0, stepper.current)
    for n in range(1, steps + 1):
        observe(n, stepper.step())
    meta = {"model": model.kind.value, "tau": tau, "h": grid.h, "N": grid.N, "dim": grid.dim,
            "history": history.label}
    if model.kind is ModelKind.NONLOCAL:
        meta.update(alpha=model.spec.alpha, delta=model.spec.delta, family=model.spec.family.value)
    elif model.kind is ModelKind.FRACTIONAL:
        meta.update(alpha=model.alpha, scale=model.scale)
    return Trajectory(times, fields, msd, peak, mass_series, meta)


def second_moment(u: np.ndarray, grid: Grid, center: float) -> float:
    """Trapezoid rule for the integral of (x - center)^2 u over the interval.

    Boundary values are zero, so the rule reduces to h times the interior sum.
    """
    if grid.dim != 1:
        raise ConfigurationError("second moment is defined for 1D grids")
    x = grid.axis(0)
    return float(grid.h * np.sum((x - center) ** 2 * u))


def total_mass(u: np.ndarray, grid: Grid) -> float:
    return float(grid.h ** grid.dim * np.sum(u))


def total_variation(u: np.ndarray) -> float:
    """Discrete total variation of a 1D field including the zero boundary values."""
    padded = np.concatenate(([0.0], np.asarray(u).ravel(), [0.0]))
    return float(np.sum(np.abs(np.diff(padded))))
