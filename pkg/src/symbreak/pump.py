"""Single-wave energy pump for the initial data.

A divergence-free plane wave ``w = a cos(2 pi n_osc xi.x) xi_perp/|xi|`` with
``a = 2 sqrt(eta)`` is added to the smooth initial velocity. Its local mean
of ``|w|^2/2`` is ``eta``, the (spatially constant at ``t = 0``) gap between
the base profile and ``|v|^2/2``, so the initial energy is saturated in the
weak sense: the defect oscillates at frequency ``2 n_osc`` and its H^-1 norm
decays like ``1/n_osc``. Pointwise saturation is out of reach for one wave.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import AliasError, InvalidTime
from .field_core import GridField, fft, l2_norm
from .profiles import kinetic_density


@dataclass(frozen=True)
class PumpConfig:
    n_osc: int
    xi: tuple[int, int] = (1, 0)
    eta: float = 0.1
    t0: float = 0.1

    def __post_init__(self):
        if self.n_osc < 1:
            raise ValueError(f"n_osc must be a positive integer, got {self.n_osc}")
        if tuple(self.xi) == (0, 0):
            raise ValueError("xi must be nonzero")
        if self.eta < 0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")
        if not self.t0 > 0:
            raise ValueError(f"t0 must be positive, got {self.t0}")

    @property
    def amplitude(self) -> float:
        return 2.0 * math.sqrt(self.eta)

    @property
    def wavenumber(self) -> float:
        return self.n_osc * math.hypot(*self.xi)


def pump_wave(grid, cfg: PumpConfig) -> np.ndarray:
    if cfg.wavenumber > grid.n / 3:
        raise AliasError(
            f"n_osc*|xi| = {cfg.wavenumber:.3f} exceeds the resolved band N/3 = {grid.n / 3:.3f}"
        )
    x1, x2 = grid.coords()
    xi1, xi2 = cfg.xi
    norm = math.hypot(xi1, xi2)
    phase = np.cos(2 * np.pi * cfg.n_osc * (xi1 * x1 + xi2 * x2))
    return cfg.amplitude * np.stack([-xi2 / norm * phase, xi1 / norm * phase])


def pump_initial(v_tilde0: GridField, cfg: PumpConfig) -> GridField:
    w = pump_wave(v_tilde0.grid, cfg)
    return GridField(v_tilde0.grid, v_tilde0.data + w, v_tilde0.time)


def pump_window(t: float, cfg: PumpConfig) -> float:
    """``(1 - t/t0)^4 (1 + 4t/t0)`` on ``[0, t0]``, zero afterwards."""
    if t < 0:
        raise InvalidTime(f"t must be nonnegative, got {t}")
    s = min(t / cfg.t0, 1.0)
    return (1.0 - s) ** 4 * (1.0 + 4.0 * s)


def pumped_velocity(v_tilde_t: GridField, cfg: PumpConfig) -> GridField:
    """Smooth velocity plus the time-localised wave, ``v + chi(t) w``."""
    chi = pump_window(v_tilde_t.time, cfg)
    if chi == 0.0:
        return v_tilde_t
    return GridField(v_tilde_t.grid, v_tilde_t.data + chi * pump_wave(v_tilde_t.grid, cfg),
                     v_tilde_t.time)


def _defect(vprime0: GridField, e0_field: GridField) -> np.ndarray:
    if vprime0.grid != e0_field.grid:
        raise ValueError("velocity and profile grids differ")
    return kinetic_density(vprime0).data[0] - e0_field.data[0]


def hm1_norm(f: np.ndarray, grid) -> float:
    """``(sum_{k != 0} |fhat|^2 / (2 pi |k|)^2)^(1/2)``."""
    fh = fft(f, grid.dim)
    k2 = sum(k * k for k in grid.wavenumbers())
    nz = k2 > 0
    return float(np.sqrt(np.sum(np.abs(fh[nz]) ** 2 / (4 * np.pi**2 * k2[nz]))))


def saturation_defect(vprime0: GridField, e0_field: GridField, norm: str = "Hminus1") -> float:
    """Distance of ``|v'|^2/2`` from the base profile, in L2 or H^-1."""
    d = _defect(vprime0, e0_field)
    if norm == "L2":
        return l2_norm(d, vprime0.grid.dim)
    if norm == "Hminus1":
        return hm1_norm(d, vprime0.grid)
    raise ValueError(f"norm must be 'L2' or 'Hminus1', got {norm!r}")


def mean_defect(vprime0: GridField, e0_field: GridField) -> float:
    """The k = 0 part of the defect, left out of the H^-1 norm."""
    return float(np.mean(_defect(vprime0, e0_field)))


def sweep(v_tilde0: GridField, e0_field: GridField, n_values, xi=(1, 0), eta=0.1):
    """Defect records for each resolvable ``n_osc``; unresolved values are skipped."""
    records = []
    for n_osc in n_values:
        cfg = PumpConfig(int(n_osc), tuple(xi), eta)
        try:
            vp = pump_initial(v_tilde0, cfg)
        except AliasError:
            continue
        records.append(
            {
                "n_osc": int(n_osc),
                "defect_l2": saturation_defect(vp, e0_field, "L2"),
                "defect_hm1": saturation_defect(vp, e0_field, "Hminus1"),
                "mean_defect": mean_defect(vp, e0_field),
            }
        )
    return records


def write_sweep(records, path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
