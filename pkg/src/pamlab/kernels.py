"""Transition kernels of the simple symmetric random walk on Z^d.

Discrete time: q_n^y by nearest-neighbor convolution dynamic programming,
exact-rational for small n (integer path counts over (2d)^n) and floating
point otherwise.

Continuous time (rate-1 jumps, uniform over the 2d neighbors): the Poisson
mixture over discrete kernels.  Because the total jump process thins into d
independent per-coordinate processes of rate 1/d, the mixture factorizes over
coordinates; each factor is itself a Poisson(t/d)-weighted series of 1-d
discrete kernels, truncated with an explicit remainder.  Tests validate this
construction against a direct high-precision evaluation of the d-dimensional
series.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import stats

from .box import Box, DEFAULT_MEMORY_BUDGET
from .errors import CoverageError

EXACT_N_MAX = 24  # exact-rational discrete kernels up to this step count


@dataclass(frozen=True)
class DiscreteKernel:
    """n-step transition probabilities q_n^y, supported on ||y||_1 <= n."""

    dim: int
    n: int
    values: dict  # lattice offset tuple -> Fraction (exact) or float

    @property
    def exact(self) -> bool:
        return bool(self.values) and isinstance(next(iter(self.values.values())), Fraction)

    def prob(self, y):
        y = tuple(int(c) for c in y)
        return self.values.get(y, Fraction(0) if self.exact else 0.0)

    def total(self):
        return sum(self.values.values())


def discrete_kernel(dim: int, n: int, exact: bool | None = None,
                    memory_budget: int = DEFAULT_MEMORY_BUDGET) -> DiscreteKernel:
    """Exact dynamic-programming kernel; q_0 is the point mass at the origin."""
    if n < 0:
        raise ValueError("step count must be >= 0")
    Box(dim, max(n, 0)).check_budget(memory_budget)
    if exact is None:
        exact = n <= EXACT_N_MAX
    if exact:
        counts = {(0,) * dim: 1}
        for _ in range(n):
            nxt = {}
            for site, c in counts.items():
                for k in range(dim):
                    for step in (-1, 1):
                        nb = site[:k] + (site[k] + step,) + site[k + 1:]
                        nxt[nb] = nxt.get(nb, 0) + c
            counts = nxt
        denom = (2 * dim) ** n
        values = {site: Fraction(c, denom) for site, c in counts.items()}
        return DiscreteKernel(dim, n, values)
    box = Box(dim, n) if n > 0 else Box(dim, 0)
    arr = box.delta()
    w = 1.0 / (2 * dim)
    for _ in range(n):
        nxt = np.zeros_like(arr)
        for k in range(dim):
            lo = [slice(None)] * dim
            hi = [slice(None)] * dim
            lo[k] = slice(0, -1)
            hi[k] = slice(1, None)
            nxt[tuple(lo)] += w * arr[tuple(hi)]
            nxt[tuple(hi)] += w * arr[tuple(lo)]
        arr = nxt
    nz = np.argwhere(arr > 0.0)
    values = {tuple(int(c) - n for c in idx): float(arr[tuple(idx)]) for idx in nz}
    return DiscreteKernel(dim, n, values)


def poisson_tail(n_trunc: int, rate: float) -> float:
    """Upper bound on sum_{m > n_trunc} e^{-rate} rate^m / m!."""
    return float(stats.poisson.sf(n_trunc, rate)) if rate > 0 else 0.0


@lru_cache(maxsize=64)
def coordinate_kernel(dim: int, t: float, radius: int, series_tol: float):
    """One-coordinate factor of the continuous-time kernel.

    Returns (g, remainder): g[k + radius] approximates the rate-(1/dim)
    continuous-time 1-d walk at offset k, as a Poisson(t/dim)-weighted sum of
    1-d discrete kernels truncated so the Poisson tail is below
    series_tol / dim; remainder is that certified tail.
    """
    if t < 0:
        raise ValueError("time must be >= 0")
    side = 2 * radius + 1
    rate = t / dim
    if rate == 0.0:
        g = np.zeros(side)
        g[radius] = 1.0
        return g, 0.0
    tol = series_tol / dim
    n_max = int(math.ceil(rate)) + 2
    while poisson_tail(n_max, rate) >= tol:
        n_max += max(2, n_max // 4)
    ks = np.arange(-radius, radius + 1)
    ms = np.arange(0, n_max + 1)
    pois = stats.poisson.pmf(ms, rate)
    # b_m(k) = C(m, (m+k)/2) 2^{-m} on matching parity
    heads = (ms[:, None] + ks[None, :]) / 2.0
    b = stats.binom.pmf(heads, ms[:, None], 0.5)
    parity_ok = (ms[:, None] + ks[None, :]) % 2 == 0
    b = np.where(parity_ok & (np.abs(ks)[None, :] <= ms[:, None]), b, 0.0)
    g = pois @ b
    g = 0.5 * (g + g[::-1])  # enforce bit-exact reflection symmetry
    return g, poisson_tail(n_max, rate)


@dataclass(frozen=True)
class KernelTable:
    """Continuous-time kernel p_t^y tabulated on ||y||_inf <= radius.

    tail_bound certifies (total mass outside the box) + (series truncation
    deficit inside the box): tabulated values are lower bounds on the true
    probabilities, so 1 - sum(values) dominates both error sources.
    """

    dim: int
    t: float
    radius: int
    values: np.ndarray
    tail_bound: float
    series_remainder: float

    @property
    def box(self) -> Box:
        return Box(self.dim, self.radius)

    def prob(self, y) -> float:
        return float(self.values[self.box.index(y)])

    def total(self) -> float:
        return float(self.values.sum())


def kernel_table(dim: int, t: float, radius: int, series_tol: float = 1e-14,
                 memory_budget: int = DEFAULT_MEMORY_BUDGET) -> KernelTable:
    if t < 0:
        raise ValueError("time must be >= 0")
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if series_tol <= 0:
        raise ValueError("series tolerance must be positive")
    box = Box(dim, radius)
    box.check_budget(memory_budget)
    g, rem = coordinate_kernel(dim, float(t), radius, series_tol)
    values = g
    for _ in range(dim - 1):
        values = np.multiply.outer(values, g)
    total = float(values.sum())
    tail = max(0.0, 1.0 - total) + 4.0 * np.finfo(float).eps
    return KernelTable(dim, float(t), radius, values, tail, dim * rem)


@dataclass(frozen=True)
class RatioExtremes:
    inf_ratio: float
    sup_ratio: float
    arg_inf: tuple
    arg_sup: tuple


def ratio_extremes(dim: int, t: float, sigma: float, y1, y2, radius: int,
                   series_tol: float = 1e-14, table: KernelTable | None = None) -> RatioExtremes:
    """Extremes of p_t^{y1-x} / p_t^{y2-x} over the ball ||x|| <= t^sigma.

    Ties at the extremes resolve to the lexicographically smallest site.
    """
    if not 0.0 < sigma < 1.0:
        raise ValueError("sigma must lie in (0, 1)")
    if t <= 0:
        raise ValueError("time must be positive")
    y1 = tuple(int(c) for c in y1)
    y2 = tuple(int(c) for c in y2)
    ball = t ** sigma
    reach = math.ceil(ball) + max(max(abs(c) for c in y1), max(abs(c) for c in y2))
    if reach > radius:
        raise CoverageError(
            f"need coverage t^sigma + max(||y1||,||y2||) = {reach} > radius {radius}")
    if table is None:
        table = kernel_table(dim, t, radius, series_tol)
    xs = Box(dim, math.ceil(ball)).sites_in_ball(ball)  # lexicographic order
    num_idx = tuple((np.asarray(y1)[k] - xs[:, k] + radius for k in range(dim)))
    den_idx = tuple((np.asarray(y2)[k] - xs[:, k] + radius for k in range(dim)))
    num = table.values[num_idx]
    den = table.values[den_idx]
    ratios = num / den
    i_min = int(np.argmin(ratios))
    i_max = int(np.argmax(ratios))
    return RatioExtremes(float(ratios[i_min]), float(ratios[i_max]),
                         tuple(int(c) for c in xs[i_min]),
                         tuple(int(c) for c in xs[i_max]))


def subgaussian_offbox_mass(dim: int, n: float, radius: float) -> float:
    """Certified bound on n-step walk mass outside ||y||_inf <= radius.

    Conservative per-coordinate Hoeffding constants: c_hat = 2d, kappa = 1/(2d).
    """
    if n <= 0:
        return 0.0
    return min(1.0, 2 * dim * math.exp(-radius * radius / (2 * dim * n)))
