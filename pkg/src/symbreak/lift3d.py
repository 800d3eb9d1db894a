"""Lift a 2D subsolution to the 3D torus.

With ``e = e(v', u')`` the lifted triplet is ``vbar = (v', 0)``,

    ubar = [[u'11 + e/3, u'12,        0     ],
            [u'21,       u'22 + e/3,  0     ],
            [0,          0,          -2e/3  ]],

and ``qbar = q' - e/3``. The minus sign is what keeps the linear system
satisfied: the extra ``grad(e/3)`` coming out of ``div ubar`` has to be
cancelled by the pressure. Equivalently ``qbar = p + |v|^2/3`` for an exact
Euler triplet, the 3D counterpart of ``q' = p + |v|^2/2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy_density import FIELD_TRACE_TOL, energy_density_field
from .errors import DimError, InvalidTensorField
from .field_core import GridField
from .subsolution import Residual, SubsolutionTriplet, linear_system_residual


class Subsolution3D(SubsolutionTriplet):
    """Lifted triplet; all fields are replicated along ``x3``."""

    @property
    def source_time(self) -> float:
        return self.time


def replicate(f: GridField) -> GridField:
    """Copy a 2D field along a new trailing ``x3`` axis."""
    if f.grid.dim != 2:
        raise DimError("replicate expects a 2D field")
    n = f.grid.n
    data = np.broadcast_to(f.data[..., np.newaxis], f.data.shape + (n,))
    return GridField(f.grid.lifted(), data, f.time)


def lift(triplet2d: SubsolutionTriplet, e_field: GridField) -> Subsolution3D:
    g = triplet2d.grid
    if g.dim != 2 or e_field.grid != g:
        raise DimError("lift needs a 2D triplet and a matching 2D energy field")
    up = triplet2d.u.tensor()
    scale = max(1.0, float(np.max(np.abs(up))))
    trace = np.abs(up[0, 0] + up[1, 1])
    if trace.max() > FIELD_TRACE_TOL * scale:
        raise InvalidTensorField(
            f"trace of u' is {trace.max():.3e}", np.unravel_index(np.argmax(trace), trace.shape)
        )
    e = e_field.data[0]
    third = e / 3.0
    ub = np.zeros((3, 3) + g.shape)
    ub[:2, :2] = up
    ub[0, 0] += third
    ub[1, 1] += third
    ub[2, 2] = -(ub[0, 0] + ub[1, 1])
    vb = np.concatenate([triplet2d.v.data, np.zeros((1,) + g.shape)])
    qb = triplet2d.q.data[0] - third
    t = triplet2d.time
    return Subsolution3D(
        replicate(GridField(g, vb, t)),
        replicate(GridField(g, ub.reshape((9,) + g.shape), t)),
        replicate(GridField(g, qb, t)),
    )


def lift_energy_identity_check(s: Subsolution3D, e2d: GridField) -> float:
    """Max over the 3D grid of ``|e3(vbar, ubar) - e2(v', u')|``."""
    e3 = energy_density_field(s.v, s.u).data[0]
    return float(np.max(np.abs(e3 - e2d.data[0][..., np.newaxis])))


def residual_3d(s: Subsolution3D, s_next: Subsolution3D, dt: float) -> Residual:
    return linear_system_residual(s, s_next, dt)
