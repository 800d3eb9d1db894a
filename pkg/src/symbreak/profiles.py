"""Prescribed energy profiles on the 2D and 3D torus.

The base profile exceeds the smooth kinetic energy density by a decaying
constant, ``e0(t, x) = |v(t, x)|^2/2 + eta/(1+t)``. The lifted profile adds an
``x3``-dependent bump that is absent at ``t = 0`` and switches on afterwards:
``ebar(t, x) = e0(t, x1, x2) + eta * t/(1+t) * sin^2(2 pi x3)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimError, InvalidField, InvalidTime
from .field_core import Grid, GridField

DEFAULT_ETA = 0.1


@dataclass(frozen=True)
class ProfileParams:
    """``eta = 0`` is admitted as a degenerate boundary case so that
    certification can flag the lost strictness; see ``admissible``."""

    eta: float = DEFAULT_ETA
    epsilon: float = math.sqrt(2 * DEFAULT_ETA)

    def __post_init__(self):
        if not (math.isfinite(self.eta) and self.eta >= 0):
            raise ValueError(f"eta must be nonnegative, got {self.eta}")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def admissible(self) -> bool:
        return self.eta > 0

    @classmethod
    def from_epsilon(cls, epsilon: float) -> "ProfileParams":
        """Pick ``eta = epsilon^2/2`` so the pumped data sit at distance epsilon."""
        return cls(eta=0.5 * epsilon * epsilon, epsilon=epsilon)


def kinetic_density(v: GridField) -> GridField:
    """``|v|^2/2`` pointwise."""
    return GridField(v.grid, 0.5 * np.sum(v.data * v.data, axis=0), v.time)


def e0_at(t: float, v_energy: GridField, eta: float) -> GridField:
    if t < 0:
        raise InvalidTime(f"t must be nonnegative, got {t}")
    if v_energy.ncomp != 1:
        raise InvalidField("expected a scalar energy density")
    return GridField(v_energy.grid, v_energy.data + eta / (1.0 + t), t)


def x3_profile(t: float, n: int, eta: float) -> np.ndarray:
    """``eta t/(1+t) sin^2(2 pi x3)`` sampled on ``x3 = j/n``."""
    x3 = np.arange(n) / n
    return eta * t / (1.0 + t) * np.sin(2 * np.pi * x3) ** 2


def ebar_at(t: float, e0: GridField, eta: float) -> GridField:
    if t < 0:
        raise InvalidTime(f"t must be nonnegative, got {t}")
    if e0.grid.dim != 2 or e0.ncomp != 1:
        raise DimError("ebar_at expects a scalar field on the 2D torus")
    n = e0.grid.n
    data = e0.data[..., np.newaxis] + x3_profile(t, n, eta)
    return GridField(Grid(3, n), data, t)


def total_energy(profile_field: GridField) -> float:
    """``int 2 e dx`` over the unit torus.

    Twice the zero Fourier coefficient, i.e. twice the sample mean; exact for
    band-limited fields.
    """
    if profile_field.ncomp != 1:
        raise InvalidField("expected a scalar field")
    return 2.0 * float(np.mean(profile_field.data))
