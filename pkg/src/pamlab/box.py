"""Finite sup-norm boxes on Z^d and site indexing helpers.

All lattice tables in this package are stored as dense arrays over the box
{x : ||x||_inf <= radius}, with axis k indexing coordinate x_k + radius.
Ball predicates (Euclidean or l1) are applied at query time.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import CoverageError, ResourceError

DEFAULT_MEMORY_BUDGET = 2 << 30  # bytes of float64 payload per table


@dataclass(frozen=True)
class Box:
    dim: int
    radius: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.radius < 0:
            raise ValueError("radius must be >= 0")

    @property
    def side(self) -> int:
        return 2 * self.radius + 1

    @property
    def shape(self) -> tuple:
        return (self.side,) * self.dim

    @property
    def size(self) -> int:
        return self.side ** self.dim

    def check_budget(self, budget: int = DEFAULT_MEMORY_BUDGET) -> None:
        if self.size * 8 > budget:
            raise ResourceError(
                f"box (2*{self.radius}+1)^{self.dim} needs {self.size * 8} bytes, "
                f"budget is {budget}"
            )

    def index(self, site) -> tuple:
        site = tuple(int(c) for c in site)
        if len(site) != self.dim:
            raise CoverageError(f"site {site} has wrong dimension for d={self.dim}")
        if any(abs(c) > self.radius for c in site):
            raise CoverageError(f"site {site} outside box of radius {self.radius}")
        return tuple(c + self.radius for c in site)

    def contains(self, site) -> bool:
        return all(abs(int(c)) <= self.radius for c in site)

    @cached_property
    def coords(self) -> np.ndarray:
        """Array of shape (*shape, dim) with the lattice coordinates of every cell."""
        axes = np.meshgrid(*[np.arange(-self.radius, self.radius + 1)] * self.dim,
                           indexing="ij")
        return np.stack(axes, axis=-1)

    @cached_property
    def eucl_norm(self) -> np.ndarray:
        return np.sqrt((self.coords.astype(float) ** 2).sum(axis=-1))

    @cached_property
    def l1_norm(self) -> np.ndarray:
        return np.abs(self.coords).sum(axis=-1)

    @cached_property
    def sup_norm(self) -> np.ndarray:
        return np.abs(self.coords).max(axis=-1)

    def sites_in_ball(self, r: float) -> np.ndarray:
        """Sites with Euclidean norm <= r, in lexicographic order, shape (m, dim)."""
        if r > self.radius:
            raise CoverageError(f"ball radius {r} exceeds box radius {self.radius}")
        mask = self.eucl_norm <= r
        return self.coords[mask].reshape(-1, self.dim)

    def delta(self, site=None) -> np.ndarray:
        values = np.zeros(self.shape)
        values[self.index(site if site is not None else (0,) * self.dim)] = 1.0
        return values


def unit(dim: int, axis: int = 0) -> tuple:
    e = [0] * dim
    e[axis] = 1
    return tuple(e)
