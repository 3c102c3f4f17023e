"""Exponential splitting scheme for the lattice stochastic heat equation.

One step of size dt from time j*dt: multiply each site by
exp(beta * w(x, j) - beta^2 dt / 2), where w(x, j) is the Brownian increment
of step j, then convolve with the dt-time walk kernel.  The compensator keeps
the per-step noise factor mean-one, so field expectations evolve by pure
kernel convolution.  The per-step kernel factorizes over coordinates; the
convolution is separable with per-coordinate half-width plan.kernel_halfwidth
and the truncation remainder is folded into the leakage monitor.

Boundary policy is absorbing: mass reaching the box edge is lost and tracked.
"""

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.ndimage import correlate1d

from .box import Box
from .errors import InvariantError
from .kernels import coordinate_kernel
from .noise import NoiseField


@dataclass(frozen=True)
class LatticeField:
    """Nonnegative function on a sup-norm box at a grid time stamp."""

    dim: int
    radius: int
    time: float
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        if self.values.shape != Box(self.dim, self.radius).shape:
            raise ValueError("values shape does not match the box")
        if not np.all(np.isfinite(self.values)):
            raise InvariantError("field has non-finite values")
        if np.any(self.values < 0.0):
            raise InvariantError("field has negative values")
        if self.normalized:
            if not np.all(self.values > 0.0):
                raise InvariantError("normalized profile must be strictly positive")
            if self.values[self.origin_index] != 1.0:
                raise InvariantError("normalized profile must equal 1 at the origin")

    @property
    def box(self) -> Box:
        return Box(self.dim, self.radius)

    @property
    def origin_index(self) -> tuple:
        return (self.radius,) * self.dim

    def at(self, site) -> float:
        return float(self.values[self.box.index(site)])

    def total(self) -> float:
        return float(self.values.sum())

    def normalize(self) -> "LatticeField":
        v0 = self.values[self.origin_index]
        if v0 <= 0.0:
            raise InvariantError("cannot normalize: origin value not positive")
        return LatticeField(self.dim, self.radius, self.time,
                            self.values / v0, normalized=True)


@dataclass(frozen=True)
class EvolutionPlan:
    dim: int
    dt: float
    beta: float
    radius: int
    kernel_halfwidth: int = 5
    series_tol: float = 1e-16
    boundary: str = "monitor"  # "monitor" or "strict"
    leak_tol: float = 1e-8
    step_kernel: np.ndarray = dc_field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.boundary not in ("monitor", "strict"):
            raise ValueError("boundary policy must be 'monitor' or 'strict'")
        g, _ = coordinate_kernel(self.dim, self.dt, self.kernel_halfwidth,
                                 self.series_tol)
        object.__setattr__(self, "step_kernel", g)

    @property
    def kernel_deficit_per_step(self) -> float:
        """Mass the truncated separable kernel loses per step (off-boundary)."""
        return 1.0 - float(self.step_kernel.sum()) ** self.dim


def make_plan(dim: int, dt: float, beta: float, radius: int, **kw) -> EvolutionPlan:
    return EvolutionPlan(dim=dim, dt=dt, beta=beta, radius=radius, **kw)


def suggested_radius(t: float, max_y_norm: float = 0.0) -> int:
    """Ballistic-plus-diffusive box suggestion for a horizon-t evolution."""
    return math.ceil(t + 4.0 * math.sqrt(max(t, 0.0)) + max_y_norm)


def coverage_radius(total_time: float, probe_radius: float, dim: int = 3,
                    z: float = 6.0) -> int:
    """Box radius keeping edge contamination at the probe sites below ~Phi(-z).

    Cheaper than suggested_radius for long burn-in sweeps where only sites
    with ||x|| <= probe_radius are read off.
    """
    return math.ceil(probe_radius + z * math.sqrt(max(total_time, 0.0) / dim)) + 2


def _convolve(values: np.ndarray, g: np.ndarray, dim: int) -> np.ndarray:
    out = values
    for k in range(dim):
        out = correlate1d(out, g, axis=k, mode="constant", cval=0.0)
    return out


def new_health() -> dict:
    return {"steps": 0, "min_value": math.inf, "edge_mass_fraction": 0.0,
            "kernel_deficit": 0.0}


def evolve_step(field: LatticeField, noise: NoiseField, plan: EvolutionPlan,
                j: int | None = None, health: dict | None = None) -> LatticeField:
    """One splitting step; returns the field at time (j+1)*dt."""
    if j is None:
        j = noise.grid_index(field.time)
    elif abs(j * plan.dt - field.time) > 1e-9 * max(1.0, abs(field.time)):
        raise ValueError("field time stamp does not match step index")
    w = noise.increment_block(j, field.radius)
    if plan.beta != 0.0:
        factor = np.exp(plan.beta * w - 0.5 * plan.beta ** 2 * plan.dt)
        values = field.values * factor
    else:
        values = field.values.copy()
    values = _convolve(values, plan.step_kernel, field.dim)
    out = LatticeField(field.dim, field.radius, (j + 1) * plan.dt, values)
    if health is not None or plan.boundary == "strict":
        _update_health(health if health is not None else new_health(),
                       out, plan)
    return out


def _edge_mass_fraction(field: LatticeField, width: int = 2) -> float:
    total = field.total()
    if total <= 0.0:
        return 0.0
    interior = field.values[(slice(width, -width),) * field.dim].sum()
    return float(1.0 - interior / total)


def _update_health(health: dict, field: LatticeField, plan: EvolutionPlan) -> None:
    health["steps"] += 1
    health["min_value"] = min(health["min_value"], float(field.values.min()))
    health["kernel_deficit"] += plan.kernel_deficit_per_step
    frac = _edge_mass_fraction(field)
    health["edge_mass_fraction"] = max(health["edge_mass_fraction"], frac)
    if plan.boundary == "strict" and frac > plan.leak_tol:
        raise InvariantError(
            f"boundary policy violation: edge mass fraction {frac:.3e} "
            f"exceeds {plan.leak_tol:.1e}")


def evolve_interval(field: LatticeField, noise: NoiseField, plan: EvolutionPlan,
                    t_end: float, record=None,
                    health: dict | None = None) -> LatticeField:
    """Iterate evolve_step until t_end; optionally record(time, field) on grid."""
    j0 = noise.grid_index(field.time)
    j1 = noise.grid_index(t_end)
    if j1 < j0:
        raise ValueError("t_end must be >= the field time stamp")
    if record is not None:
        record(field.time, field)
    for j in range(j0, j1):
        field = evolve_step(field, noise, plan, j, health=health)
        if record is not None:
            record(field.time, field)
    return field


def solve_cauchy(f, s: float, t: float, noise: NoiseField, plan: EvolutionPlan,
                 record=None, health: dict | None = None) -> LatticeField:
    """Evolve initial data f from time s to time t."""
    if isinstance(f, LatticeField):
        init = LatticeField(f.dim, f.radius, s, np.array(f.values, dtype=float))
    else:
        values = np.asarray(f, dtype=float)
        init = LatticeField(plan.dim, plan.radius, s, values)
    return evolve_interval(init, noise, plan, t, record=record, health=health)


def point_to_point_field(x, s: float, t: float, noise: NoiseField,
                         plan: EvolutionPlan, record=None,
                         health: dict | None = None) -> LatticeField:
    """Field y -> Z_{x,s}^{y,t}: delta initial data at x, evolved to t."""
    box = Box(plan.dim, plan.radius)
    return solve_cauchy(box.delta(x), s, t, noise, plan, record=record,
                        health=health)


def backward_partition(S: float, t: float, noise: NoiseField,
                       plan: EvolutionPlan, record=None,
                       health: dict | None = None) -> LatticeField:
    """Field y -> Z_S^{y,t}: constant-1 data at S, evolved to t."""
    box = Box(plan.dim, plan.radius)
    return solve_cauchy(np.ones(box.shape), S, t, noise, plan, record=record,
                        health=health)


def adjoint_sweep(s: float, T: float, noise: NoiseField, plan: EvolutionPlan,
                  terminal=None, record=None,
                  health: dict | None = None) -> LatticeField:
    """One backward pass with the transposed per-step map.

    With the default terminal data 1 this returns the field x -> Z_{x,s}^T;
    with terminal data delta_y it returns x -> Z_{x,s}^{y,T}.  The forward
    step is v -> K (E_j v) with K the symmetric kernel convolution and E_j
    the per-step noise factor; its transpose is v -> E_j (K v).
    """
    j0 = noise.grid_index(s)
    j1 = noise.grid_index(T)
    if j1 < j0:
        raise ValueError("T must be >= s")
    box = Box(plan.dim, plan.radius)
    if terminal is None:
        values = np.ones(box.shape)
    else:
        values = np.array(terminal, dtype=float)
        if values.shape != box.shape:
            raise ValueError("terminal data shape does not match the box")
    if record is not None:
        record(T, LatticeField(plan.dim, plan.radius, T, values))
    comp = -0.5 * plan.beta ** 2 * plan.dt
    for j in range(j1 - 1, j0 - 1, -1):
        values = _convolve(values, plan.step_kernel, plan.dim)
        if plan.beta != 0.0:
            w = noise.increment_block(j, plan.radius)
            values = values * np.exp(plan.beta * w + comp)
        fld = LatticeField(plan.dim, plan.radius, j * plan.dt, values)
        if health is not None or plan.boundary == "strict":
            _update_health(health if health is not None else new_health(),
                           fld, plan)
        if record is not None:
            record(j * plan.dt, fld)
    return LatticeField(plan.dim, plan.radius, s, values)


def transfer_matrix(s: float, t: float, noise: NoiseField,
                    plan: EvolutionPlan) -> np.ndarray:
    """Dense matrix M[z, y] = Z_{z,s}^{y,t} by evolving a delta from every z.

    Brute force; intended for tiny boxes only.
    """
    box = Box(plan.dim, plan.radius)
    box.check_budget(budget=(1 << 30))
    m = np.empty((box.size, box.size))
    for i in range(box.size):
        values = np.zeros(box.size)
        values[i] = 1.0
        out = solve_cauchy(values.reshape(box.shape), s, t, noise, plan)
        m[i, :] = out.values.ravel()
    return m


def chapman_kolmogorov_check(x, s: float, r: float, t: float,
                             noise: NoiseField, plan: EvolutionPlan,
                             interior_width: int = 4) -> float:
    """Max abs defect of Z_{x,s}^{y,t} = sum_z Z_{x,s}^{z,r} Z_{z,r}^{y,t}.

    The right-hand side is assembled from an explicit brute-force transfer
    matrix for [r, t], so the check is independent of operator composition.
    Restricted to y in the interior (edge band of interior_width dropped).
    """
    if not s < r < t:
        raise ValueError("need s < r < t")
    direct = point_to_point_field(x, s, t, noise, plan)
    mid = point_to_point_field(x, s, r, noise, plan)
    m2 = transfer_matrix(r, t, noise, plan)
    composed = mid.values.ravel() @ m2
    defect = np.abs(direct.values.ravel() - composed)
    box = Box(plan.dim, plan.radius)
    w = min(interior_width, plan.radius)
    interior = box.sup_norm.ravel() <= plan.radius - w
    return float(defect[interior].max())
