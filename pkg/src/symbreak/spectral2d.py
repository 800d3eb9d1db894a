"""Smooth 2D incompressible Euler on the unit torus, vorticity-streamfunction form.

``d_t w + v . grad w = 0`` with ``v = perp-grad psi``, ``lap psi = w``. The
state holds the vorticity coefficients (kept inside the 2/3-rule band) plus
the spatially constant part of the velocity, which the vorticity does not
determine and which the Euler flow conserves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CFLError, InputError, InvalidState
from .field_core import Grid, GridField, SpectralField, fft, ifft
from .subsolution import SubsolutionTriplet

CFL_LIMIT = 0.5
MEAN_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EulerState2D:
    grid: Grid
    time: float
    omega: SpectralField
    mean_velocity: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.grid.dim != 2:
            raise InvalidState("EulerState2D needs a 2D grid")
        w = self.omega.coeffs
        if w.shape != (1,) + self.grid.shape:
            raise InvalidState(f"vorticity coefficients have shape {w.shape}")
        if np.max(np.abs(_reflect(w[0]) - np.conj(w[0]))) > 1e-12 * max(
            1.0, float(np.max(np.abs(w)))
        ):
            raise InvalidState("vorticity coefficients are not Hermitian")

    @classmethod
    def from_vorticity(cls, omega: GridField, mean_velocity=(0.0, 0.0)) -> "EulerState2D":
        coeffs = fft(omega.data, 2)
        return cls(omega.grid, omega.time, SpectralField(omega.grid, coeffs, omega.time),
                   tuple(float(c) for c in mean_velocity))

    @classmethod
    def from_coefficients(cls, grid: Grid, coeffs: np.ndarray, time=0.0,
                          mean_velocity=(0.0, 0.0)) -> "EulerState2D":
        coeffs = np.asarray(coeffs, dtype=complex).reshape((1,) + grid.shape)
        return cls(grid, float(time), SpectralField(grid, coeffs, float(time)),
                   tuple(float(c) for c in mean_velocity))

    def vorticity(self) -> GridField:
        return GridField(self.grid, ifft(self.omega.coeffs, 2), self.time)


def _reflect(c: np.ndarray) -> np.ndarray:
    """Coefficients at ``-k``: index ``(-i) mod N`` along both axes."""
    return np.roll(c[::-1, ::-1], 1, axis=(0, 1))


def _inverse_laplacian_symbol(grid: Grid) -> np.ndarray:
    k1, k2 = grid.wavenumbers()
    k2sum = k1 * k1 + k2 * k2
    out = np.zeros(grid.shape)
    nz = k2sum > 0
    out[nz] = -1.0 / (4 * np.pi**2 * k2sum[nz])
    return out


def _velocity_coeffs(grid: Grid, w_hat: np.ndarray) -> np.ndarray:
    kd1, kd2 = grid.derivative_wavenumbers()
    psi = _inverse_laplacian_symbol(grid) * w_hat
    return np.stack([-2j * np.pi * kd2 * psi, 2j * np.pi * kd1 * psi])


def _check_mean(s: EulerState2D) -> None:
    w = s.omega.coeffs[0]
    if abs(w[0, 0]) > MEAN_TOL * max(1.0, float(np.max(np.abs(w)))):
        raise InvalidState(f"vorticity mean {w[0, 0].real:.3e} is not zero")


def velocity_from_vorticity(s: EulerState2D) -> GridField:
    """Biot-Savart inversion: ``v = (-d2 psi, d1 psi) + mean`` with ``lap psi = w``."""
    _check_mean(s)
    vh = _velocity_coeffs(s.grid, s.omega.coeffs[0])
    vh[:, 0, 0] = s.mean_velocity
    return GridField(s.grid, ifft(vh, 2), s.time)


def max_speed(s: EulerState2D) -> float:
    v = velocity_from_vorticity(s).data
    return float(np.sqrt(np.max(v[0] ** 2 + v[1] ** 2)))


def max_admissible_dt(s: EulerState2D) -> float:
    vmax = max_speed(s)
    return math.inf if vmax == 0 else CFL_LIMIT / (vmax * s.grid.n)


def _rhs(grid: Grid, w_hat: np.ndarray, mean_velocity) -> np.ndarray:
    mask = grid.dealias_mask()
    kd1, kd2 = grid.derivative_wavenumbers()
    w_hat = w_hat * mask
    v1, v2 = ifft(_velocity_coeffs(grid, w_hat), 2)
    wx = ifft(2j * np.pi * kd1 * w_hat, 2)
    wy = ifft(2j * np.pi * kd2 * w_hat, 2)
    out = -fft(v1 * wx + v2 * wy, 2) * mask
    out -= 2j * np.pi * (mean_velocity[0] * kd1 + mean_velocity[1] * kd2) * w_hat
    out[0, 0] = 0.0
    return out


def step(s: EulerState2D, dt: float) -> EulerState2D:
    """One classical RK4 step with the advection product dealiased (2/3 rule)."""
    _check_mean(s)
    limit = max_admissible_dt(s)
    if not dt > 0 or dt > limit * (1 + 1e-12):
        raise CFLError(dt, limit)
    g, U = s.grid, s.mean_velocity
    w0 = s.omega.coeffs[0] * g.dealias_mask()
    k1 = _rhs(g, w0, U)
    k2 = _rhs(g, w0 + 0.5 * dt * k1, U)
    k3 = _rhs(g, w0 + 0.5 * dt * k2, U)
    k4 = _rhs(g, w0 + dt * k3, U)
    w1 = w0 + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    w1[0, 0] = s.omega.coeffs[0, 0, 0]
    t = s.time + dt
    return EulerState2D(g, t, SpectralField(g, w1[np.newaxis], t), U)


def energy(s: EulerState2D) -> float:
    """``E2 = int |v|^2 dx`` (twice the kinetic energy), by Parseval."""
    w = s.omega.coeffs[0]
    psi_weight = -_inverse_laplacian_symbol(s.grid)
    return float(np.sum(np.abs(w) ** 2 * psi_weight) + sum(c * c for c in s.mean_velocity))


def enstrophy(s: EulerState2D) -> float:
    """``int w^2 dx``."""
    return float(np.sum(np.abs(s.omega.coeffs[0]) ** 2))


def resolution_indicator(s: EulerState2D) -> float:
    """Fraction of enstrophy in the outer half of the retained band.

    Small values mean the run is well resolved; this is reported, not enforced.
    """
    k1, k2 = s.grid.wavenumbers()
    kmax = np.maximum(np.abs(k1), np.abs(k2))
    w2 = np.abs(s.omega.coeffs[0]) ** 2
    total = w2.sum()
    return 0.0 if total == 0 else float(w2[kmax > s.grid.n / 6].sum() / total)


class ExactTriplet2D(SubsolutionTriplet):
    """``(v, v (x) v - |v|^2/2 I, q)`` built from a smooth Euler state."""


def pressure_from_stress(u: np.ndarray, grid: Grid) -> np.ndarray:
    """Zero-mean ``q`` with ``lap q = -div div u`` for a ``(d, d, N..)`` stress."""
    kd = grid.derivative_wavenumbers()
    uh = fft(u, grid.dim)
    num = sum(kd[i] * kd[j] * uh[i, j] for i in range(grid.dim) for j in range(grid.dim))
    k2 = sum(k * k for k in kd)
    qh = np.zeros_like(num)
    nz = k2 > 0
    qh[nz] = -num[nz] / k2[nz]
    return ifft(qh, grid.dim)


def exact_triplet(s: EulerState2D) -> ExactTriplet2D:
    v = velocity_from_vorticity(s)
    vv = v.data
    u = vv[:, None] * vv[None, :]
    half = 0.5 * (vv[0] ** 2 + vv[1] ** 2)
    u[0, 0] -= half
    u[1, 1] -= half
    # exact trace-free: rebalance the diagonal against roundoff
    mid = 0.5 * (u[0, 0] - u[1, 1])
    u[0, 0], u[1, 1] = mid, -mid
    q = pressure_from_stress(u, s.grid)
    return ExactTriplet2D(v, GridField(s.grid, u.reshape((4,) + s.grid.shape), s.time),
                          GridField(s.grid, q, s.time))


# --- initial conditions ------------------------------------------------------


def parse_modes(text: str) -> dict[tuple[int, int], complex]:
    """Parse ``k1 k2 re im`` lines; ``#`` starts a comment."""
    modes: dict[tuple[int, int], complex] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise InputError(f"line {lineno}: expected 'k1 k2 re im', got {raw!r}")
        try:
            k = (int(parts[0]), int(parts[1]))
            c = complex(float(parts[2]), float(parts[3]))
        except ValueError:
            raise InputError(f"line {lineno}: cannot parse {raw!r}") from None
        if k in modes:
            raise InputError(f"line {lineno}: duplicate mode {k}")
        modes[k] = c
    return modes


def hermitian_complete(modes: dict, complete_conjugates: bool = False) -> dict:
    """Check ``w(-k) = conj(w(k))``; optionally fill in missing partners."""
    out = dict(modes)
    for k, c in modes.items():
        mk = (-k[0], -k[1])
        if mk not in modes:
            if not complete_conjugates:
                raise InputError(f"mode {k} has no conjugate partner {mk}")
            out[mk] = c.conjugate()
        elif abs(modes[mk] - c.conjugate()) > 1e-12 * max(1.0, abs(c)):
            raise InputError(f"modes {k} and {mk} violate Hermitian symmetry")
    return out


def state_from_modes(grid: Grid, modes: dict, time: float = 0.0) -> tuple[EulerState2D, float]:
    """Build a state from vorticity modes, truncating to the 2/3 band.

    Returns the state and the L2 velocity distance to the untruncated data.
    """
    coeffs = np.zeros(grid.shape, dtype=complex)
    dropped = 0.0
    for (k1, k2), c in modes.items():
        if (k1, k2) == (0, 0):
            if c != 0:
                raise InvalidState("vorticity mode (0, 0) must vanish")
            continue
        if max(abs(k1), abs(k2)) > grid.n / 3:
            dropped += abs(c) ** 2 / (4 * np.pi**2 * (k1 * k1 + k2 * k2))
            continue
        coeffs[k1 % grid.n, k2 % grid.n] = c
    return EulerState2D.from_coefficients(grid, coeffs, time), math.sqrt(dropped)


def load_initial_condition(path, grid: Grid, complete_conjugates: bool = False):
    modes = hermitian_complete(parse_modes(Path(path).read_text()), complete_conjugates)
    return state_from_modes(grid, modes)
