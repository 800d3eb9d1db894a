"""Largest eigenvalues of small symmetric matrices and the generalised energy density.

``e(v, u) = (d/2) * lambda_max(v (x) v - u)`` for a d-vector ``v`` and a
symmetric trace-free ``d x d`` matrix ``u``. All kernels are vectorised over
leading axes so the same code handles a single matrix and an N^3 grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimError, InvalidMatrix, InvalidTensorField
from .field_core import GridField

SYMMETRY_TOL = 1e-12
FIELD_TRACE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SymTraceFree:
    """Symmetric trace-free matrix kept as its upper triangle."""

    dim: int
    upper: tuple[float, ...]

    @classmethod
    def from_matrix(cls, m) -> "SymTraceFree":
        m = np.asarray(m, dtype=float)
        d = m.shape[0]
        if m.shape != (d, d) or d not in (2, 3):
            raise DimError(f"expected a 2x2 or 3x3 matrix, got shape {m.shape}")
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m - m.T)) > SYMMETRY_TOL * scale:
            raise InvalidMatrix("matrix is not symmetric")
        if abs(np.trace(m)) > SYMMETRY_TOL * scale:
            raise InvalidMatrix(f"trace {np.trace(m):.3e} is not zero")
        iu = np.triu_indices(d)
        return cls(d, tuple(float(x) for x in m[iu]))

    def matrix(self) -> np.ndarray:
        m = np.zeros((self.dim, self.dim))
        m[np.triu_indices(self.dim)] = self.upper
        return m + np.triu(m, 1).T


def _check_symmetric(m: np.ndarray) -> None:
    scale = np.maximum(1.0, np.max(np.abs(m), axis=(-2, -1)))
    asym = np.max(np.abs(m - np.swapaxes(m, -1, -2)), axis=(-2, -1))
    if np.any(asym > SYMMETRY_TOL * scale):
        raise InvalidMatrix(f"matrix not symmetric (defect {np.max(asym):.3e})")


def _lmax2(a, b, c):
    # mean + radius; hypot keeps the radius free of cancellation
    return 0.5 * (a + c) + np.hypot(0.5 * (a - c), b)


def _lmax3(a11, a22, a33, a12, a13, a23):
    a11, a22, a33, a12, a13, a23 = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (a11, a22, a33, a12, a13, a23))
    )
    shape = a11.shape
    a11, a22, a33, a12, a13, a23 = (x.ravel() for x in (a11, a22, a33, a12, a13, a23))
    q = (a11 + a22 + a33) / 3.0
    b11, b22, b33 = a11 - q, a22 - q, a33 - q
    p1 = a12 * a12 + a13 * a13 + a23 * a23
    p = np.sqrt((b11 * b11 + b22 * b22 + b33 * b33 + 2.0 * p1) / 6.0)
    diagonal = p1 == 0
    degenerate = p == 0
    ps = np.where(degenerate, 1.0, p)
    c11, c22, c33 = b11 / ps, b22 / ps, b33 / ps
    c12, c13, c23 = a12 / ps, a13 / ps, a23 / ps
    det = (
        c11 * (c22 * c33 - c23 * c23)
        - c12 * (c12 * c33 - c23 * c13)
        + c13 * (c12 * c23 - c22 * c13)
    )
    r = np.clip(0.5 * det, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    top = q + 2.0 * p * np.cos(phi)

    # r < 0: the two largest eigenvalues may (nearly) coincide and the formula
    # for the top one loses half the digits. The smallest one is well separated
    # there, so deflate it and solve the remaining 2x2 Ritz problem instead.
    low = (r < 0) & ~degenerate & ~diagonal
    if np.any(low):
        # work with the scaled matrix c = (a - q I)/p, whose entries are O(1)
        s = 2.0 * np.cos(phi + 2.0 * np.pi / 3.0)
        m11, m22, m33 = c11[low], c22[low], c33[low]
        m12, m13, m23 = c12[low], c13[low], c23[low]
        sl = s[low]
        rows = (
            np.stack([m11 - sl, m12, m13], -1),
            np.stack([m12, m22 - sl, m23], -1),
            np.stack([m13, m23, m33 - sl], -1),
        )
        crosses = np.stack(
            [np.cross(rows[0], rows[1]), np.cross(rows[0], rows[2]), np.cross(rows[1], rows[2])]
        )
        norms = np.linalg.norm(crosses, axis=-1)
        best = np.argmax(norms, axis=0)
        idx = np.arange(best.size)
        nbest = norms[best, idx]
        # a vanishing cross product means the smallest eigenvalue is double, so
        # the top one is simple and the trigonometric value is already accurate
        ok = nbest > 1e-6
        x = crosses[best, idx] / np.where(ok, nbest, 1.0)[:, None]
        x = np.where(ok[:, None], x, np.array([0.0, 0.0, 1.0]))
        # orthonormal complement of x
        use0 = np.abs(x[:, 0]) > np.abs(x[:, 1])
        w = np.where(use0, np.hypot(x[:, 0], x[:, 2]), np.hypot(x[:, 1], x[:, 2]))
        zeros = np.zeros_like(w)
        u1 = np.where(
            use0[:, None],
            np.stack([-x[:, 2], zeros, x[:, 0]], -1),
            np.stack([zeros, x[:, 2], -x[:, 1]], -1),
        ) / w[:, None]
        u2 = np.cross(x, u1)
        mat = np.stack(
            [np.stack([m11, m12, m13], -1), np.stack([m12, m22, m23], -1), np.stack([m13, m23, m33], -1)],
            -2,
        )
        mu1 = np.einsum("nij,nj->ni", mat, u1)
        mu2 = np.einsum("nij,nj->ni", mat, u2)
        ra = np.einsum("ni,ni->n", u1, mu1)
        rc = np.einsum("ni,ni->n", u2, mu2)
        rb = np.einsum("ni,ni->n", u1, mu2)
        refined = q[low] + p[low] * _lmax2(ra, rb, rc)
        top[low] = np.where(ok, refined, top[low])

    top = np.where(degenerate, q, top)
    top = np.where(diagonal, np.maximum(np.maximum(a11, a22), a33), top)
    return top.reshape(shape)


def _lmax_batch(m: np.ndarray) -> np.ndarray:
    d = m.shape[-1]
    if d == 2:
        return _lmax2(m[..., 0, 0], 0.5 * (m[..., 0, 1] + m[..., 1, 0]), m[..., 1, 1])
    sym = 0.5 * (m + np.swapaxes(m, -1, -2))
    return _lmax3(
        sym[..., 0, 0], sym[..., 1, 1], sym[..., 2, 2], sym[..., 0, 1], sym[..., 0, 2], sym[..., 1, 2]
    )


def lambda_max_sym(m) -> float | np.ndarray:
    """Largest eigenvalue of a symmetric 2x2 or 3x3 matrix.

    Accepts a single matrix or a stack of shape ``(..., d, d)``. Closed forms
    only: mean plus radius in 2D, the trigonometric method in 3D.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2] or m.shape[-1] not in (2, 3):
        raise DimError(f"expected (..., d, d) with d in (2, 3), got shape {m.shape}")
    _check_symmetric(m)
    out = _lmax_batch(m)
    return float(out) if out.ndim == 0 else out


def energy_density(v, u) -> float:
    """``(d/2) lambda_max(v (x) v - u)`` for one point."""
    if isinstance(u, SymTraceFree):
        u = u.matrix()
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    d = v.shape[0]
    if v.ndim != 1 or u.shape != (d, d):
        raise DimError(f"vector of length {v.shape} does not match matrix {u.shape}")
    return 0.5 * d * float(lambda_max_sym(np.outer(v, v) - u))


def energy_density_field(v: GridField, u: GridField) -> GridField:
    """Pointwise generalised energy density on a grid.

    ``u`` must be symmetric and trace-free at every sample; the worst offending
    grid index is reported otherwise.
    """
    d = v.grid.dim
    if u.grid != v.grid:
        raise DimError(f"grids differ: {v.grid} vs {u.grid}")
    if v.ncomp != d or u.ncomp != d * d:
        raise DimError(f"need {d} velocity and {d * d} tensor components, got {v.ncomp}, {u.ncomp}")
    ut = u.tensor()
    scale = max(1.0, float(np.max(np.abs(ut))))
    trace = np.abs(np.einsum("ii...->...", ut))
    if trace.max() > FIELD_TRACE_TOL * scale:
        loc = np.unravel_index(np.argmax(trace), trace.shape)
        raise InvalidTensorField(f"trace {trace.max():.3e} exceeds tolerance", loc)
    asym = np.abs(ut - np.swapaxes(ut, 0, 1)).max(axis=(0, 1))
    if asym.max() > FIELD_TRACE_TOL * scale:
        loc = np.unravel_index(np.argmax(asym), asym.shape)
        raise InvalidTensorField(f"asymmetry {asym.max():.3e} exceeds tolerance", loc)
    vv = v.data
    m = vv[:, None] * vv[None, :] - ut
    m = np.moveaxis(m, (0, 1), (-2, -1))
    e = 0.5 * d * _lmax_batch(m)
    return GridField(v.grid, e[np.newaxis], v.time)
