"""Subexponential profile class, product-topology metric, initial-data families.

A positive lattice function f belongs to the class with parameters (c, eps)
when |ln f(x)| <= c ||x||^(1-eps) everywhere; this forces f(0) = 1.
"""

import math
from dataclasses import dataclass

import numpy as np

from .box import Box
from .evolution import LatticeField

_REL_TOL = 1e-12  # slack for boundary-case members under float rounding


@dataclass(frozen=True)
class FunctionClassSpec:
    c: float
    eps: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")
        if not 0.0 < self.eps <= 1.0:
            raise ValueError("eps must lie in (0, 1]")

    def log_bound(self, norms: np.ndarray) -> np.ndarray:
        return self.c * norms ** (1.0 - self.eps)


def class_check(f: LatticeField, spec: FunctionClassSpec) -> bool:
    """True iff |ln f(x)| <= c ||x||^(1-eps) holds on the whole box."""
    if np.any(f.values <= 0.0):
        return False
    logs = np.abs(np.log(f.values))
    bound = spec.log_bound(f.box.eucl_norm)
    return bool(np.all(logs <= bound * (1.0 + _REL_TOL) + _REL_TOL))


def metric_d(f: LatticeField, g: LatticeField) -> float:
    """sum_x e^{-||x||} |f-g| / (1 + |f-g|), in fixed lexicographic site order."""
    if (f.dim, f.radius) != (g.dim, g.radius):
        raise ValueError("fields must share a common box")
    diff = np.abs(f.values - g.values).ravel()
    w = np.exp(-f.box.eucl_norm).ravel()
    return float(np.sum(w * diff / (1.0 + diff)))


def metric_remainder(dim: int, radius: int, terms: int = 400) -> float:
    """Certified bound on sum of e^{-||x||} outside the box of given radius."""
    total = 0.0
    for m in range(radius + 1, radius + 1 + terms):
        shell = (2 * m + 1) ** dim - (2 * m - 1) ** dim
        total += shell * math.exp(-m)
    # geometric majorant for the rest of the series
    m = radius + terms + 1
    shell = (2 * m + 1) ** dim - (2 * m - 1) ** dim
    total += shell * math.exp(-m) / (1.0 - math.exp(-0.5))
    return total


def metric_upper_bound(dim: int, radius: int = 60) -> float:
    """sum over all of Z^d of e^{-||x||}, to truncation error metric_remainder."""
    box = Box(dim, radius)
    return float(np.exp(-box.eucl_norm).sum()) + metric_remainder(dim, radius)


def profile_constant(box: Box) -> LatticeField:
    return LatticeField(box.dim, box.radius, 0.0, np.ones(box.shape),
                        normalized=True)


def profile_exp_growth(box: Box, c: float, eps: float) -> LatticeField:
    values = np.exp(c * box.eucl_norm ** (1.0 - eps))
    values[(box.radius,) * box.dim] = 1.0
    return LatticeField(box.dim, box.radius, 0.0, values, normalized=True)


def profile_exp_decay(box: Box, c: float, eps: float) -> LatticeField:
    values = np.exp(-c * box.eucl_norm ** (1.0 - eps))
    values[(box.radius,) * box.dim] = 1.0
    return LatticeField(box.dim, box.radius, 0.0, values, normalized=True)


def profile_random_subexp(box: Box, c: float, eps: float,
                          seed: int) -> LatticeField:
    """Seeded random member of the class: ln f = c ||x||^(1-eps) * u(x),
    with u(x) deterministic uniform in [-1, 1]."""
    from .noise import _absorb, _as_counter, _mix, _U

    with np.errstate(over="ignore"):
        h = _mix(_U(np.uint64(np.int64(seed))))
        state = np.broadcast_to(h, box.shape).copy()
        for k in range(box.dim):
            state = _absorb(state, _as_counter(box.coords[..., k]))
    u = (state >> np.uint64(11)).astype(float) * 2.0 ** -52 - 1.0
    values = np.exp(c * box.eucl_norm ** (1.0 - eps) * u)
    values[(box.radius,) * box.dim] = 1.0
    return LatticeField(box.dim, box.radius, 0.0, values, normalized=True)


BUILTIN_PROFILES = ("constant", "exp-growth", "exp-decay", "random-subexp")


def builtin_profile(name: str, box: Box, c: float, eps: float,
                    seed: int = 0) -> LatticeField:
    if name == "constant":
        return profile_constant(box)
    if name == "exp-growth":
        return profile_exp_growth(box, c, eps)
    if name == "exp-decay":
        return profile_exp_decay(box, c, eps)
    if name == "random-subexp":
        return profile_random_subexp(box, c, eps, seed)
    raise ValueError(f"unknown profile family {name!r}; "
                     f"choose one of {BUILTIN_PROFILES}")
