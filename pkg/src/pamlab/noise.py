"""Reproducible per-site two-sided Wiener environment on a time grid.

Every increment is a pure function of (seed, realization_index, site, step
index): a counter-based hash of the coordinates feeds an inverse-CDF Gaussian
transform.  Enlarging the spatial box or the time window therefore never
changes previously generated values, which is what lets one environment be
shared between solvers with different horizons.

Step index j covers the interval [j*dt, (j+1)*dt); indices are signed, and
cumulative path values are anchored so that omega(x, 0) = 0.
"""

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.special import ndtri

from .box import Box
from .errors import CoverageError

_U = np.uint64
_GOLD = _U(0x9E3779B97F4A7C15)
_SALT_HI = _U(0xD6E8FEB86659FD93)
_SALT_LO = _U(0xA5CB3A1ED85E9F2B)
_INV53 = 2.0 ** -53
_INV106 = 2.0 ** -106


def _mix(h):
    h = (h ^ (h >> _U(30))) * _U(0xBF58476D1CE4E5B9)
    h = (h ^ (h >> _U(27))) * _U(0x94D049BB133111EB)
    return h ^ (h >> _U(31))


def _absorb(h, v):
    return _mix(h + _GOLD + v)


def _standard_gaussian(state):
    """Two 64-bit words -> a (0,1) uniform -> a standard normal variate."""
    hi = _mix(state ^ _SALT_HI)
    lo = _mix(state ^ _SALT_LO)
    u = (hi >> _U(11)).astype(float) * _INV53 \
        + ((lo >> _U(11)).astype(float) + 1.0) * _INV106
    return ndtri(u)


def _as_counter(values):
    return np.asarray(values, dtype=np.int64).astype(np.uint64)


@lru_cache(maxsize=8)
def _site_state(seed, realization_index, dim, radius):
    """Hash state after absorbing (seed, realization, site), per box cell."""
    with np.errstate(over="ignore"):
        h = _mix(_U(np.uint64(np.int64(seed))))
        h = _absorb(h, _U(np.uint64(np.int64(realization_index))))
        coords = Box(dim, radius).coords
        state = np.broadcast_to(h, coords.shape[:-1]).copy()
        for k in range(dim):
            state = _absorb(state, _as_counter(coords[..., k]))
    return state


@dataclass(frozen=True)
class NoiseField:
    """Discretized environment omega on [t_start, t_end] x box(noise_radius)."""

    dim: int
    noise_radius: int
    t_start: float
    t_end: float
    dt: float
    seed: int
    realization_index: int = 0
    shift_steps: int = 0  # Wiener-shift offset, in grid steps

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not (self.t_start <= 0.0 <= self.t_end):
            raise ValueError("time window must contain 0")
        for name in ("t_start", "t_end"):
            v = getattr(self, name)
            if abs(round(v / self.dt) * self.dt - v) > 1e-9 * max(1.0, abs(v)):
                raise ValueError(f"{name}={v} is not a multiple of dt={self.dt}")

    @property
    def j_min(self) -> int:
        return round(self.t_start / self.dt)

    @property
    def j_max(self) -> int:
        return round(self.t_end / self.dt)

    def _check_step(self, j):
        if np.any(j < self.j_min) or np.any(j >= self.j_max):
            raise CoverageError(
                f"step index outside [{self.j_min}, {self.j_max})")

    def grid_index(self, t: float) -> int:
        j = round(t / self.dt)
        if abs(j * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise CoverageError(f"time {t} is off the grid (dt={self.dt})")
        if not self.j_min <= j <= self.j_max:
            raise CoverageError(f"time {t} outside window")
        return j

    def increment_block(self, j: int, radius: int | None = None) -> np.ndarray:
        """N(0, dt) increments of step j for every site of the box, at once."""
        radius = self.noise_radius if radius is None else radius
        if radius > self.noise_radius:
            raise CoverageError("requested box exceeds the noise radius")
        self._check_step(j)
        with np.errstate(over="ignore"):
            state = _site_state(self.seed, self.realization_index, self.dim, radius)
            state = _absorb(state, _as_counter(j + self.shift_steps))
            g = _standard_gaussian(state)
        return g * np.sqrt(self.dt)

    def increments_at(self, sites, j) -> np.ndarray:
        """Increments for arbitrary site rows (N, dim) and step index/indices."""
        sites = np.asarray(sites, dtype=np.int64)
        if sites.ndim == 1:
            sites = sites[None, :]
        if np.abs(sites).max(initial=0) > self.noise_radius:
            raise CoverageError("site outside the noise box")
        self._check_step(np.asarray(j))
        with np.errstate(over="ignore"):
            h = _mix(_U(np.uint64(np.int64(self.seed))))
            h = _absorb(h, _U(np.uint64(np.int64(self.realization_index))))
            state = np.broadcast_to(h, sites.shape[:-1]).copy()
            for k in range(self.dim):
                state = _absorb(state, _as_counter(sites[..., k]))
            state = _absorb(state, _as_counter(np.asarray(j) + self.shift_steps))
            g = _standard_gaussian(state)
        return g * np.sqrt(self.dt)

    def increment(self, x, j: int) -> float:
        return float(self.increments_at(np.asarray([x]), j)[0])

    def path_value(self, x, t: float) -> float:
        """omega(x, t) for a grid time t; cumulative sum anchored at 0."""
        j = self.grid_index(t)
        if j == 0:
            return 0.0
        if j > 0:
            steps = np.arange(0, j)
            sign = 1.0
        else:
            steps = np.arange(j, 0)
            sign = -1.0
        sites = np.broadcast_to(np.asarray(x, dtype=np.int64), (len(steps), self.dim))
        return sign * float(self.increments_at(sites, steps).sum())

    def wiener_shift(self, s: float) -> "NoiseField":
        """View with all paths shifted by s and re-anchored to vanish at 0."""
        k = round(s / self.dt)
        if abs(k * self.dt - s) > 1e-9 * max(1.0, abs(s)):
            raise CoverageError(f"shift {s} is off the grid (dt={self.dt})")
        return replace(self,
                       t_start=(self.j_min - k) * self.dt,
                       t_end=(self.j_max - k) * self.dt,
                       shift_steps=self.shift_steps + k)


def moment_selftest(field: NoiseField, n_samples: int = 10 ** 6) -> dict:
    """Moment and Kolmogorov-Smirnov statistics of standardized increments."""
    from scipy import stats

    rng = np.random.default_rng(field.seed ^ 0x5EED)
    n_steps = field.j_max - field.j_min
    sites = rng.integers(-field.noise_radius, field.noise_radius + 1,
                         size=(n_samples, field.dim))
    steps = rng.integers(field.j_min, field.j_max if n_steps > 0 else 1,
                         size=n_samples)
    vals = field.increments_at(sites, steps)
    std = vals / np.sqrt(field.dt)
    ks = stats.kstest(std[:10 ** 5], "norm")
    return {
        "n_samples": n_samples,
        "mean": float(vals.mean()),
        "variance": float(vals.var()),
        "ks_statistic": float(ks.statistic),
        "ks_pvalue": float(ks.pvalue),
    }
