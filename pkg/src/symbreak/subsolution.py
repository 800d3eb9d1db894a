"""Subsolution triplets ``(v, u, q)`` and the residual of their linear system.

The linear system is ``d_t v + div u + grad q = 0``, ``div v = 0``. Spatial
terms are spectral; the time derivative comes from two snapshots. The
residual is evaluated at the midpoint (difference quotient plus the average
of the spatial terms), which makes it second order in the snapshot spacing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, InvalidTime
from .field_core import GridField, divergence, gradient


@dataclass(frozen=True, eq=False)
class SubsolutionTriplet:
    v: GridField
    u: GridField
    q: GridField

    def __post_init__(self):
        g = self.v.grid
        if self.u.grid != g or self.q.grid != g:
            raise InputError("triplet fields live on different grids")
        d = g.dim
        if (self.v.ncomp, self.u.ncomp, self.q.ncomp) != (d, d * d, 1):
            raise InputError(
                f"triplet needs {d}/{d * d}/1 components, got "
                f"{self.v.ncomp}/{self.u.ncomp}/{self.q.ncomp}"
            )

    @property
    def grid(self):
        return self.v.grid

    @property
    def time(self) -> float:
        return self.v.time


@dataclass(frozen=True)
class Residual:
    """Max-norm residuals; ``momentum`` has one entry per velocity component."""

    momentum: tuple[float, ...]
    divergence: float
    worst_component: int
    worst_index: tuple[int, ...]
    time: float

    @property
    def total(self) -> float:
        return max(max(self.momentum), self.divergence)

    def __float__(self) -> float:
        return self.total


def spatial_terms(s: SubsolutionTriplet) -> np.ndarray:
    """``div u + grad q`` as an array of shape ``(d, N, ...)``."""
    return divergence(s.u.tensor(), s.grid) + gradient(s.q.data[0], s.grid)


def linear_system_residual(
    s: SubsolutionTriplet, s_next: SubsolutionTriplet, dt: float
) -> Residual:
    if not dt > 0:
        raise InvalidTime(f"dt must be positive, got {dt}")
    if s.grid != s_next.grid:
        raise InputError("snapshots live on different grids")
    mom = (s_next.v.data - s.v.data) / dt + 0.5 * (spatial_terms(s) + spatial_terms(s_next))
    absmom = np.abs(mom)
    per_comp = tuple(float(a.max()) for a in absmom)
    div = max(
        float(np.abs(divergence(s.v.data, s.grid)).max()),
        float(np.abs(divergence(s_next.v.data, s.grid)).max()),
    )
    flat = int(np.argmax(absmom))
    comp, *index = np.unravel_index(flat, absmom.shape)
    return Residual(
        per_comp, div, int(comp), tuple(int(i) for i in index), 0.5 * (s.time + s_next.time)
    )
