"""Lattice random walk with trapping.

A particle that has just arrived at a site waits k tau with probability
p_{k-1} (k = 1..M) and then jumps to a neighbouring site, +h or -h with
equal probability. The waiting law is the normalized memory-weight table,
so the occupation density of the walk solves the discrete nonlocal
problem in the diffusive scaling h^2 ~ tau^alpha.

Random numbers come from Philox4x32-10 with counter (event, particle lo,
particle hi, 0) and the seed as key: every particle owns an independent
substream, so results do not depend on how particles are split across
workers.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .kernel import cell_mass_steps, normalized_fractional
from .memory_op import ConfigurationError, c_coefficient, memory_depth

__all__ = [
    "WaitPMF",
    "build_pmf",
    "WalkerConfig",
    "WalkResult",
    "calibrated_spacing",
    "simulate",
    "arrival_density_check",
    "philox4x32",
    "default_workers",
    "density_csv",
    "msd_csv",
]

_MASK = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_S32 = np.uint64(32)
_S5 = np.uint64(5)
_S6 = np.uint64(6)
_ONE = np.uint64(1)


@numba.njit(cache=True, inline="always")
def _philox(c0, c1, c2, c3, k0, k1):
    # operands are uint64 holding 32-bit words; 32x32 products fit exactly
    for _ in range(10):
        p0 = c0 * _M0
        p1 = c2 * _M1
        c0, c1, c2, c3 = ((p1 >> _S32) ^ c1 ^ k0), p1 & _MASK, ((p0 >> _S32) ^ c3 ^ k1), p0 & _MASK
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


@numba.njit(cache=True)
def _philox_block(ctr, key):
    out = np.empty(4, dtype=np.uint64)
    out[0], out[1], out[2], out[3] = _philox(ctr[0], ctr[1], ctr[2], ctr[3], key[0], key[1])
    return out


def philox4x32(counter, key) -> tuple:
    """One Philox4x32-10 block; counter has four and key two 32-bit words."""
    ctr = np.asarray(counter, dtype=np.uint64) & _MASK
    k = np.asarray(key, dtype=np.uint64) & _MASK
    return tuple(int(v) for v in _philox_block(ctr, k))


@dataclass(frozen=True)
class WaitPMF:
    """Waiting time k tau has probability p[k-1]; omega[k] = P(wait > k tau)."""

    tau: float
    p: np.ndarray
    omega: np.ndarray
    cdf: np.ndarray = field(repr=False)

    @property
    def M(self) -> int:
        return self.p.size

    def mean_wait(self) -> float:
        return float(self.tau * np.dot(np.arange(1, self.M + 1), self.p))


def build_pmf(alpha: float, delta: float, tau: float) -> WaitPMF:
    """Waiting-time law proportional to (1/(k tau)) * integral of s^-alpha over cell k."""
    M = memory_depth(delta, tau)
    spec = normalized_fractional(alpha, delta)
    step = delta / M
    k = np.arange(1, M + 1, dtype=float)
    raw = cell_mass_steps(spec, step, k) / (k * step)
    p = raw / math.fsum(raw)
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    omega = np.concatenate(([1.0], 1.0 - cdf))
    omega[-1] = 0.0
    for a in (p, omega, cdf):
        a.setflags(write=False)
    return WaitPMF(tau=step, p=p, omega=omega, cdf=cdf)


def calibrated_spacing(alpha: float, delta: float, tau: float, diffusivity: float = 1.0) -> float:
    """Lattice spacing with c_{delta,alpha} h^2 / (2 tau^alpha) equal to the diffusivity."""
    return math.sqrt(2.0 * diffusivity * tau ** alpha / c_coefficient(alpha, delta))


def default_workers() -> int:
    env = os.environ.get("MEMORYFLOW_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigurationError(f"MEMORYFLOW_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigurationError("MEMORYFLOW_THREADS must be at least 1")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class WalkerConfig:
    alpha: float
    delta: float
    tau: float
    N: int
    seed: int = 0
    record_times: tuple = (0.1, 0.2, 0.3, 0.4)
    msd_times: tuple = ()
    h: float | None = None
    track_arrivals: bool = False

    def __post_init__(self):
        if self.N < 1:
            raise ConfigurationError("particle count must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigurationError("seed must fit in 64 unsigned bits")
        if self.h is not None and not self.h > 0:
            raise ConfigurationError("lattice spacing must be positive")
        memory_depth(self.delta, self.tau)
        if not self.record_times and not self.msd_times:
            raise ConfigurationError("nothing to record")
        for t in tuple(self.record_times) + tuple(self.msd_times):
            n = round(t / self.tau)
            if n < 0 or abs(n * self.tau - t) > 1e-9 * max(t, self.tau):
                raise ConfigurationError(f"time {t} is not a nonnegative multiple of tau={self.tau}")

    @property
    def spacing(self) -> float:
        return self.h if self.h is not None else calibrated_spacing(self.alpha, self.delta, self.tau)


@numba.njit(cache=True, nogil=True)
def _walk_range(start, stop, key0, key1, cdf, obs_steps, arr_steps, M, half, occ, arr):
    """Simulate particles [start, stop) into the given count arrays.

    ``occ[r, half + j]`` counts particles at site j at step obs_steps[r].
    ``arr[r, lag, half + j]`` counts arrivals at site j at step
    arr_steps[r] - lag. Returns the number of site visits outside the window.
    """
    R = obs_steps.size
    RA = arr_steps.size
    last = obs_steps[R - 1] if R > 0 else 0
    if RA > 0 and arr_steps[RA - 1] > last:
        last = arr_steps[RA - 1]
    width = 2 * half + 1
    lost = 0
    for pid in range(start, stop):
        p = np.uint64(pid)
        plo = p & _MASK
        phi = p >> _S32
        site = 0
        now = 0
        r = 0
        event = 0
        # the particle has just arrived at the origin at step 0
        for q in range(RA):
            lag = arr_steps[q]
            if lag < M:
                arr[q, lag, half] += 1
        while True:
            c0, c1, c2, c3 = _philox(np.uint64(event), plo, phi, np.uint64(0), key0, key1)
            u = ((c0 >> _S5) * np.uint64(67108864) + (c1 >> _S6)) * (1.0 / 9007199254740992.0)
            wait = np.searchsorted(cdf, u, side="right") + 1
            nxt = now + wait
            while r < R and obs_steps[r] < nxt:
                idx = half + site
                if 0 <= idx < width:
                    occ[r, idx] += 1
                else:
                    lost += 1
                r += 1
            if nxt > last:
                break
            site += 1 if (c2 & _ONE) else -1
            now = nxt
            event += 1
            for q in range(RA):
                lag = arr_steps[q] - now
                if 0 <= lag < M:
                    idx = half + site
                    if 0 <= idx < width:
                        arr[q, lag, idx] += 1
                    else:
                        lost += 1
    return lost


@dataclass
class WalkResult:
    config: WalkerConfig
    h: float
    times: np.ndarray
    counts: np.ndarray  # (len(times), 2*half+1) occupation counts
    half: int
    msd_times: np.ndarray
    msd: np.ndarray
    msd_stderr: np.ndarray
    arrivals: np.ndarray | None = None  # (len(times), M, 2*half+1)
    outside: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def sites(self) -> np.ndarray:
        return self.h * np.arange(-self.half, self.half + 1)

    def density(self, i: int) -> np.ndarray:
        return self.counts[i] / (self.config.N * self.h)

    def mean_position(self, i: int) -> tuple:
        """Sample mean and its standard error at record time i."""
        x = self.sites
        c = self.counts[i]
        N = c.sum()
        m1 = np.dot(c, x) / N
        m2 = np.dot(c, x * x) / N
        return float(m1), float(math.sqrt(max(m2 - m1 * m1, 0.0) / N))


def _moments(counts, sites):
    N = counts.sum(axis=1)
    x2 = sites ** 2
    m2 = counts @ x2 / N
    m4 = counts @ (x2 * x2) / N
    return m2, np.sqrt(np.maximum(m4 - m2 * m2, 0.0) / N)


def simulate(config: WalkerConfig, pmf: WaitPMF | None = None, workers: int | None = None,
             chunk: int | None = None) -> WalkResult:
    """Run the walk and collect occupation histograms and MSD statistics.

    Particles are split into contiguous chunks handled by a thread pool;
    per-chunk integer histograms are summed, so the merged output is
    identical for any worker count or chunk size.
    """
    if pmf is None:
        pmf = build_pmf(config.alpha, config.delta, config.tau)
    tau = config.tau
    h = config.spacing
    rec = np.array([round(t / tau) for t in config.record_times], dtype=np.int64)
    msd_steps = np.array([round(t / tau) for t in config.msd_times], dtype=np.int64)
    obs_steps = np.unique(np.concatenate((rec, msd_steps)))
    last = int(obs_steps[-1])
    # a particle jumps at most once per step; 12 sigma of the jump count is ample
    half = int(min(last, math.ceil(12 * math.sqrt(last * tau / pmf.mean_wait())) + 16))
    arr_steps = rec if config.track_arrivals else np.zeros(0, dtype=np.int64)
    width = 2 * half + 1
    workers = default_workers() if workers is None else max(1, int(workers))
    if chunk is None:
        chunk = max(1, -(-config.N // (4 * workers)))
    key0 = np.uint64(config.seed & 0xFFFFFFFF)
    key1 = np.uint64(config.seed >> 32)
    cdf = np.ascontiguousarray(pmf.cdf)

    def run(bounds):
        a, b = bounds
        occ = np.zeros((obs_steps.size, width), dtype=np.int64)
        arr = np.zeros((arr_steps.size, pmf.M if arr_steps.size else 0, width), dtype=np.int64)
        lost = _walk_range(a, b, key0, key1, cdf, obs_steps, arr_steps, pmf.M, half, occ, arr)
        return occ, arr, lost

    ranges = [(a, min(a + chunk, config.N)) for a in range(0, config.N, chunk)]
    occ = np.zeros((obs_steps.size, width), dtype=np.int64)
    arr = np.zeros((arr_steps.size, pmf.M if arr_steps.size else 0, width), dtype=np.int64)
    outside = 0
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for o, a, lost in pool.map(run, ranges):
            occ += o
            arr += a
            outside += lost
    sites = h * np.arange(-half, half + 1)
    pick = np.searchsorted(obs_steps, rec)
    counts = occ[pick]
    if msd_steps.size:
        m2, se = _moments(occ[np.searchsorted(obs_steps, msd_steps)], sites)
    else:
        m2 = se = np.zeros(0)
    return WalkResult(
        config=config, h=h, times=np.asarray(config.record_times, dtype=float), counts=counts,
        half=half, msd_times=np.asarray(config.msd_times, dtype=float), msd=m2, msd_stderr=se,
        arrivals=arr if config.track_arrivals else None, outside=outside,
        metadata={"M": pmf.M, "half_width": half})


def arrival_density_check(result: WalkResult, pmf: WaitPMF) -> float:
    """Largest L1 gap between occupation and its arrival reconstruction.

    The occupation at (x, t) is rebuilt as sum_j omega_j eta(x, t - j tau)
    from the logged arrival counts; the gap is measured in density units,
    i.e. the sum over sites of |difference| / N.
    """
    if result.arrivals is None:
        raise ValueError("simulation was run without arrival tracking")
    N = result.config.N
    rebuilt = np.tensordot(pmf.omega[: pmf.M], result.arrivals, axes=(0, 1))
    gaps = np.abs(rebuilt - result.counts).sum(axis=1) / N
    return float(gaps.max())


def density_csv(result: WalkResult) -> str:
    """Rows ``t,x,density`` over the sites occupied at any record time."""
    nz = np.flatnonzero(result.counts.sum(axis=0))
    lines = ["t,x,density"]
    if nz.size:
        lo, hi = nz[0], nz[-1] + 1
        sites = result.sites
        for i, t in enumerate(result.times):
            dens = result.density(i)
            lines += [f"{t:.17g},{sites[j]:.17g},{dens[j]:.17g}" for j in range(lo, hi)]
    return "\n".join(lines) + "\n"


def msd_csv(result: WalkResult) -> str:
    lines = ["t,msd,stderr"]
    lines += [f"{t:.17g},{m:.17g},{s:.17g}"
              for t, m, s in zip(result.msd_times, result.msd, result.msd_stderr)]
    return "\n".join(lines) + "\n"
