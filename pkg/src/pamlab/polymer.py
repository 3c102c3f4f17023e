"""Continuous-time polymer paths and Feynman-Kac Monte Carlo estimators.

Paths are rate-1 continuous-time simple random walks: a Poisson(t-s) number
of jumps, jump times distributed as sorted uniforms, steps uniform over the
2d nearest neighbors.  The polymer action along a path sums the increments of
the site-attached Brownian paths over the occupation intervals; occupation is
snapped to the noise grid (the site charged for step j is the path position
just after j*dt), so both estimator backends see the identical discretized
environment.

The point-to-point estimator is free-path sampling with an endpoint
indicator: averaging 1{endpoint=y} e^{beta A - beta^2 (t-s)/2} over
unconditioned paths is an unbiased estimate of Z_{x,s}^{y,t}.
"""

import math
from dataclasses import dataclass

import numpy as np

from .noise import NoiseField


@dataclass(frozen=True)
class PolymerPath:
    """One sampled path on [s, t): jump times and visited sites."""

    x: tuple
    s: float
    t: float
    jump_times: np.ndarray  # strictly increasing, inside (s, t)
    sites: np.ndarray       # (n_jumps + 1, dim); sites[0] == x

    def __post_init__(self):
        if self.s >= self.t:
            raise ValueError("need s < t")
        if len(self.jump_times) + 1 != len(self.sites):
            raise ValueError("jump times and sites are inconsistent")
        if len(self.jump_times) > 0:
            if not np.all(np.diff(self.jump_times) > 0):
                raise ValueError("jump times must be strictly increasing")
            if self.jump_times[0] <= self.s or self.jump_times[-1] >= self.t:
                raise ValueError("jump times must lie inside (s, t)")
            steps = np.abs(np.diff(self.sites, axis=0)).sum(axis=1)
            if not np.all(steps == 1):
                raise ValueError("steps must be nearest-neighbor")

    @property
    def n_jumps(self) -> int:
        return len(self.jump_times)

    def site_at(self, time: float) -> np.ndarray:
        """Path position just after `time` (cadlag)."""
        k = int(np.searchsorted(self.jump_times, time, side="right"))
        return self.sites[k]


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int
    estimand: str
    n_effective: int | None = None  # paths that hit the endpoint, if applicable

    @property
    def degenerate(self) -> bool:
        return not math.isfinite(self.std_error)


def sample_path(rng: np.random.Generator, x, s: float, t: float,
                dim: int | None = None) -> PolymerPath:
    x = tuple(int(c) for c in x)
    dim = len(x) if dim is None else dim
    if s >= t:
        raise ValueError("need s < t")
    n = int(rng.poisson(t - s))
    times = np.sort(rng.uniform(s, t, size=n))
    sites = np.empty((n + 1, dim), dtype=np.int64)
    sites[0] = x
    if n > 0:
        axes = rng.integers(0, dim, size=n)
        signs = rng.integers(0, 2, size=n) * 2 - 1
        steps = np.zeros((n, dim), dtype=np.int64)
        steps[np.arange(n), axes] = signs
        sites[1:] = x + np.cumsum(steps, axis=0)
    return PolymerPath(x, float(s), float(t), times, sites)


def action(path: PolymerPath, noise: NoiseField) -> float:
    """Sum of site-path increments over grid-snapped occupation intervals."""
    j0 = noise.grid_index(path.s)
    j1 = noise.grid_index(path.t)
    steps = np.arange(j0, j1)
    occ = np.empty((len(steps), len(path.x)), dtype=np.int64)
    for i, j in enumerate(steps):
        occ[i] = path.site_at(j * noise.dt)
    return float(noise.increments_at(occ, steps).sum())


def _batch_occupations(rng: np.random.Generator, n_steps: int, dt: float,
                       dim: int, n_paths: int):
    """Grid-skeleton sampler for a batch of paths started at the origin.

    Per-step jump counts are independent Poisson(dt) (Poisson process
    restriction); jump directions are uniform over the 2d neighbors.
    Returns (occ, endpoints): occ[p, j] is the displacement entering grid
    step j, endpoints[p] the displacement after all jumps.
    """
    counts = rng.poisson(dt, size=(n_paths, n_steps))
    totals = counts.sum(axis=1)
    grand = int(totals.sum())
    axes = rng.integers(0, dim, size=grand)
    signs = rng.integers(0, 2, size=grand) * 2 - 1
    jumps = np.zeros((grand, dim), dtype=np.int64)
    jumps[np.arange(grand), axes] = signs
    cum = np.vstack([np.zeros((1, dim), dtype=np.int64),
                     np.cumsum(jumps, axis=0)])
    offsets = np.concatenate(([0], np.cumsum(totals)))  # path p owns [off_p, off_{p+1})
    ends = offsets[:-1, None] + np.cumsum(counts, axis=1)  # jumps done through step j
    disp = cum[ends] - cum[offsets[:-1]][:, None, :]  # (P, S, dim), after step j
    endpoints = disp[:, -1, :]
    occ = np.concatenate([np.zeros((n_paths, 1, dim), dtype=np.int64),
                          disp[:, :-1, :]], axis=1)
    return occ, endpoints


def _mc_weights(noise: NoiseField, x, s: float, t: float, n_samples: int,
                beta: float, rng: np.random.Generator):
    """Sampled weights e^{beta A - beta^2 (t-s)/2} and endpoints."""
    j0 = noise.grid_index(s)
    j1 = noise.grid_index(t)
    n_steps = j1 - j0
    x = np.asarray(x, dtype=np.int64)
    occ, endpoints = _batch_occupations(rng, n_steps, noise.dt, noise.dim,
                                        n_samples)
    occ = occ + x
    endpoints = endpoints + x
    steps = np.arange(j0, j1)
    if beta != 0.0:
        inc = noise.increments_at(occ.reshape(-1, noise.dim),
                                  np.tile(steps, n_samples))
        actions = inc.reshape(n_samples, n_steps).sum(axis=1)
        weights = np.exp(beta * actions - 0.5 * beta ** 2 * (t - s))
    else:
        weights = np.ones(n_samples)
    return weights, endpoints


def _estimate(samples: np.ndarray, estimand: str,
              n_effective: int | None = None) -> McEstimate:
    n = len(samples)
    mean = float(samples.mean())
    if n > 1:
        se = float(samples.std(ddof=1) / math.sqrt(n))
    else:
        se = math.inf
    if n_effective == 0:
        se = math.inf
    return McEstimate(mean, se, n, estimand, n_effective)


def mc_point_to_point(noise: NoiseField, x, s: float, y, t: float,
                      n_samples: int, beta: float,
                      rng: np.random.Generator | None = None,
                      seed_parts: tuple = (0,)) -> McEstimate:
    """Unbiased Monte Carlo estimate of Z_{x,s}^{y,t}."""
    tag = f"p2p x={tuple(x)} s={s} y={tuple(y)} t={t}"
    if s == t:
        hit = 1.0 if tuple(x) == tuple(y) else 0.0
        return McEstimate(hit, 0.0, n_samples, tag, n_samples)
    if rng is None:
        rng = np.random.default_rng((noise.seed, noise.realization_index,
                                     *seed_parts))
    weights, endpoints = _mc_weights(noise, x, s, t, n_samples, beta, rng)
    hits = np.all(endpoints == np.asarray(y, dtype=np.int64), axis=1)
    samples = np.where(hits, weights, 0.0)
    return _estimate(samples, tag, n_effective=int(hits.sum()))


def mc_point_to_line(noise: NoiseField, x, s: float, t: float,
                     n_samples: int, beta: float,
                     rng: np.random.Generator | None = None,
                     seed_parts: tuple = (1,)) -> McEstimate:
    """Unbiased Monte Carlo estimate of Z_{x,s}^t (free endpoint)."""
    tag = f"p2l x={tuple(x)} s={s} t={t}"
    if s == t:
        return McEstimate(1.0, 0.0, n_samples, tag, n_samples)
    if rng is None:
        rng = np.random.default_rng((noise.seed, noise.realization_index,
                                     *seed_parts))
    weights, _ = _mc_weights(noise, x, s, t, n_samples, beta, rng)
    return _estimate(weights, tag, n_effective=n_samples)
