"""Periodic grid fields on the unit torus, FFT conventions and FLD1 snapshots.

Samples live on ``x_j = j/N`` for ``j = 0..N-1`` along each axis of ``[0,1)^dim``.
Fourier coefficients follow ``f(x) = sum_k fhat(k) exp(2 pi i k.x)``, so
``fhat = fftn(f) / N**dim`` and every derivative carries a factor ``2 pi``.
Arrays are kept in numpy's FFT ordering (``k = 0, 1, .., N/2-1, -N/2, .., -1``).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidAxis, InvalidField, InvalidGrid

MAGIC = b"FLD1"
VERSION = 1
_HEADER = struct.Struct("<4sIIIId")


@dataclass(frozen=True)
class Grid:
    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise InvalidGrid(f"dim must be 2 or 3, got {self.dim}")
        if self.n < 8 or self.n % 2:
            raise InvalidGrid(f"N must be even and >= 8, got {self.n}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    def coords(self) -> tuple[np.ndarray, ...]:
        """Sample coordinates, one broadcastable array per axis."""
        x = np.arange(self.n) / self.n
        return tuple(np.meshgrid(*([x] * self.dim), indexing="ij"))

    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Integer wavevector components on the full spectral grid."""
        return _wavenumbers(self.dim, self.n)

    def derivative_wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Wavenumbers with the Nyquist entry -N/2 replaced by zero."""
        return _derivative_wavenumbers(self.dim, self.n)

    def dealias_mask(self) -> np.ndarray:
        return _dealias_mask(self.dim, self.n)

    def lifted(self) -> "Grid":
        return Grid(3, self.n)


@lru_cache(maxsize=None)
def _wavenumbers(dim, n):
    k = np.fft.fftfreq(n, 1.0 / n)
    ks = np.meshgrid(*([k] * dim), indexing="ij")
    for a in ks:
        a.flags.writeable = False
    return tuple(ks)


@lru_cache(maxsize=None)
def _derivative_wavenumbers(dim, n):
    k = np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = 0.0
    ks = np.meshgrid(*([k] * dim), indexing="ij")
    for a in ks:
        a.flags.writeable = False
    return tuple(ks)


@lru_cache(maxsize=None)
def _dealias_mask(dim, n):
    mask = np.ones((n,) * dim, dtype=bool)
    for k in _wavenumbers(dim, n):
        mask &= np.abs(k) <= n / 3
    mask.flags.writeable = False
    return mask


@dataclass(frozen=True, eq=False)
class GridField:
    """Real samples of shape ``(ncomp, N, ..., N)``.

    Tensor components are stored row-major: entry ``(i, j)`` of a ``d x d``
    field sits at component ``i*d + j``.
    """

    grid: Grid
    data: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, order="C")
        if data.ndim == self.grid.dim:
            data = data[np.newaxis]
        if data.ndim != self.grid.dim + 1 or data.shape[1:] != self.grid.shape:
            raise InvalidField(
                f"data shape {data.shape} does not fit grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise InvalidField("field contains non-finite samples")
        if not (np.isfinite(self.time) and self.time >= 0):
            raise InvalidField(f"time must be finite and nonnegative, got {self.time}")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "time", float(self.time))

    @property
    def ncomp(self) -> int:
        return self.data.shape[0]

    def component(self, i: int) -> np.ndarray:
        return self.data[i]

    def tensor(self) -> np.ndarray:
        """View a ``d*d`` component field as shape ``(d, d, N, ..., N)``."""
        d = self.grid.dim
        if self.ncomp != d * d:
            raise InvalidField(f"expected {d * d} tensor components, got {self.ncomp}")
        return self.data.reshape((d, d) + self.grid.shape)

    def with_time(self, time: float) -> "GridField":
        return GridField(self.grid, self.data, time)

    @classmethod
    def zeros(cls, grid: Grid, ncomp: int = 1, time: float = 0.0) -> "GridField":
        return cls(grid, np.zeros((ncomp,) + grid.shape), time)


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: Grid
    coeffs: np.ndarray
    time: float = 0.0

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[0]

    def coefficient(self, k, comp: int = 0) -> complex:
        """Coefficient at integer wavevector ``k`` (negative entries allowed)."""
        idx = tuple(int(kj) % self.grid.n for kj in k)
        return complex(self.coeffs[(comp,) + idx])

    def dealiased(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * self.grid.dealias_mask(), self.time)


def transform_forward(f: GridField) -> SpectralField:
    if not np.all(np.isfinite(f.data)):
        raise InvalidField("non-finite samples")
    axes = tuple(range(1, f.grid.dim + 1))
    coeffs = np.fft.fftn(f.data, axes=axes) / f.grid.size
    return SpectralField(f.grid, coeffs, f.time)


def transform_inverse(s: SpectralField) -> GridField:
    axes = tuple(range(1, s.grid.dim + 1))
    data = np.fft.ifftn(s.coeffs * s.grid.size, axes=axes).real
    return GridField(s.grid, data, s.time)


def spectral_derivative(f: SpectralField, axis: int) -> SpectralField:
    """Differentiate along ``axis`` (1-based), zeroing the Nyquist mode."""
    if not 1 <= axis <= f.grid.dim:
        raise InvalidAxis(f"axis must be in 1..{f.grid.dim}, got {axis}")
    k = f.grid.derivative_wavenumbers()[axis - 1]
    return SpectralField(f.grid, f.coeffs * (2j * np.pi * k), f.time)


# Array-level helpers used by the solvers; they skip the container overhead.


def fft(data: np.ndarray, dim: int) -> np.ndarray:
    axes = tuple(range(data.ndim - dim, data.ndim))
    n = data.shape[-1]
    return np.fft.fftn(data, axes=axes) / n**dim


def ifft(coeffs: np.ndarray, dim: int) -> np.ndarray:
    axes = tuple(range(coeffs.ndim - dim, coeffs.ndim))
    n = coeffs.shape[-1]
    return np.fft.ifftn(coeffs * n**dim, axes=axes).real


def gradient(data: np.ndarray, grid: Grid) -> np.ndarray:
    """Spectral gradient of a scalar array; returns shape ``(dim, N, ...)``."""
    fh = fft(data, grid.dim)
    return np.stack(
        [ifft(2j * np.pi * k * fh, grid.dim) for k in grid.derivative_wavenumbers()]
    )


def divergence(data: np.ndarray, grid: Grid) -> np.ndarray:
    """Spectral divergence over the last index of a vector or tensor array.

    For ``data`` of shape ``(d, N, ...)`` returns a scalar array; for shape
    ``(d, d, N, ...)`` returns the row divergence ``sum_j d_j T_ij``.
    """
    ks = grid.derivative_wavenumbers()
    d = grid.dim
    fh = fft(data, d)
    acc = sum(2j * np.pi * ks[j] * np.take(fh, j, axis=-d - 1) for j in range(d))
    return ifft(acc, d)


def l2_norm(data: np.ndarray, dim: int) -> float:
    """L2 norm over the unit torus, summed over any leading component axes."""
    n = data.shape[-1]
    return float(np.sqrt(np.sum(data * data) / n**dim))


# --- FLD1 snapshots -------------------------------------------------------


def snapshot_name(prefix: str, index: int) -> str:
    return f"{prefix}_t{index:04d}.fld"


def encode_snapshot(f: GridField) -> bytes:
    header = _HEADER.pack(MAGIC, VERSION, f.grid.dim, f.grid.n, f.ncomp, f.time)
    return header + f.data.astype("<f8").tobytes(order="C")


def decode_snapshot(buf: bytes) -> GridField:
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise FormatError(f"bad magic {bytes(buf[:4])!r}, expected {MAGIC!r}", 0)
    if len(buf) < _HEADER.size:
        raise FormatError("truncated header", len(buf))
    _, version, dim, n, ncomp, time = _HEADER.unpack_from(buf)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    try:
        grid = Grid(dim, n)
    except ValueError as exc:
        raise FormatError(str(exc), 8) from None
    if ncomp < 1:
        raise FormatError(f"ncomp must be positive, got {ncomp}", 16)
    expected = ncomp * grid.size * 8
    payload = len(buf) - _HEADER.size
    if payload < expected:
        raise FormatError(
            f"truncated payload: {payload} bytes, header declares {expected}", len(buf)
        )
    if payload > expected:
        raise FormatError(
            f"payload of {payload} bytes exceeds declared {expected}",
            _HEADER.size + expected,
        )
    data = np.frombuffer(buf, dtype="<f8", offset=_HEADER.size)
    try:
        return GridField(grid, data.reshape((ncomp,) + grid.shape), time)
    except InvalidField as exc:
        raise FormatError(str(exc), _HEADER.size) from None


def write_snapshot(f: GridField, path) -> None:
    Path(path).write_bytes(encode_snapshot(f))


def read_snapshot(path) -> GridField:
    return decode_snapshot(Path(path).read_bytes())
