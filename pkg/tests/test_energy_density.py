import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from symbreak import spectral2d as s2
from symbreak.energy_density import (
    SymTraceFree,
    energy_density,
    energy_density_field,
    lambda_max_sym,
)
from symbreak.errors import DimError, InvalidMatrix, InvalidTensorField
from symbreak.field_core import Grid, GridField

from conftest import smooth_state, tg_state


def power_lmax(m, squarings=60):
    """Independent oracle: power iteration on the shifted PSD matrix m + c I.

    Repeated squaring runs 2**squarings iterations, so even nearly degenerate
    top pairs converge; the Rayleigh quotient of the dominant column follows.
    """
    m = np.asarray(m, dtype=float)
    c = np.linalg.norm(m)
    a = m + c * np.eye(len(m))
    for _ in range(squarings):
        a = a @ a
        nrm = np.linalg.norm(a)
        if nrm == 0:
            return 0.0
        a /= nrm
    x = a[:, np.argmax(np.linalg.norm(a, axis=0))]
    return float(x @ m @ x / (x @ x))


entries = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def sym(d):
    return arrays(float, (d, d), elements=entries).map(lambda a: 0.5 * (a + a.T))


def traceless(m):
    return m - np.trace(m) / len(m) * np.eye(len(m))


class TestLambdaMax:
    def test_diag(self):
        assert lambda_max_sym(np.diag([1.0, 0.0])) == 1.0

    def test_offdiag(self):
        assert abs(lambda_max_sym([[0.0, 1.0], [1.0, 0.0]]) - 1.0) < 1e-15

    def test_block(self):
        m = np.array([[2.0, 0, 0], [0, -1, 1], [0, 1, -1]])
        assert abs(lambda_max_sym(m) - 2.0) < 1e-14
        assert abs(power_lmax(m) - 2.0) < 1e-12

    def test_asymmetric(self):
        with pytest.raises(InvalidMatrix):
            lambda_max_sym([[0.0, 1.0], [0.5, 0.0]])

    def test_shape(self):
        with pytest.raises(DimError):
            lambda_max_sym(np.eye(4))

    @settings(max_examples=200, deadline=None)
    @given(m=st.one_of(sym(2), sym(3)))
    def test_matches_power_iteration(self, m):
        scale = max(1.0, np.max(np.abs(m)))
        ref = np.linalg.eigvalsh(m)[-1]
        got = lambda_max_sym(m)
        assert abs(got - ref) <= 1e-12 * scale
        assert abs(got - power_lmax(m)) <= 1e-12 * scale

    def test_degenerate_top_pair(self):
        # the trigonometric formula alone loses ~8 digits here
        rng = np.random.default_rng(3)
        q = np.linalg.qr(rng.normal(size=(2000, 3, 3)))[0]
        lam = np.empty((2000, 3))
        lam[:, 0] = lam[:, 1] = rng.normal(size=2000)
        lam[:, 2] = lam[:, 0] - np.abs(rng.normal(size=2000))
        m = np.einsum("nij,nj,nkj->nik", q, lam, q)
        m = 0.5 * (m + np.swapaxes(m, 1, 2))
        assert np.max(np.abs(lambda_max_sym(m) - lam[:, 0])) < 1e-13 * np.max(np.abs(lam))

    def test_batch_shape(self):
        m = np.zeros((4, 5, 3, 3))
        assert lambda_max_sym(m).shape == (4, 5)


class TestEnergyDensity:
    def test_zero(self):
        assert energy_density([0.0, 0.0], np.zeros((2, 2))) == 0.0

    def test_kinetic_identity(self):
        v = np.array([3.0, 4.0])
        u = np.outer(v, v) - 0.5 * (v @ v) * np.eye(2)
        assert abs(energy_density(v, u) - 12.5) < 1e-13

    def test_unit_vector(self):
        assert energy_density([1.0, 0.0], np.zeros((2, 2))) == 1.0

    def test_dim_mismatch(self):
        with pytest.raises(DimError):
            energy_density([1.0, 0.0, 0.0], np.zeros((2, 2)))

    def test_symtracefree(self):
        u = SymTraceFree.from_matrix([[0.5, 0.2], [0.2, -0.5]])
        assert np.allclose(u.matrix(), [[0.5, 0.2], [0.2, -0.5]])
        assert energy_density([1.0, 0.0], u) == pytest.approx(power_lmax(np.diag([1.0, 0]) - u.matrix()))
        with pytest.raises(InvalidMatrix):
            SymTraceFree.from_matrix(np.eye(2))

    @settings(max_examples=200, deadline=None)
    @given(d=st.sampled_from([2, 3]), data=st.data())
    def test_lower_bound_and_equality(self, d, data):
        v = data.draw(arrays(float, (d,), elements=entries))
        u = traceless(data.draw(sym(d)))
        half = 0.5 * v @ v
        assert energy_density(v, u) >= half - 1e-12 * max(1.0, half, np.max(np.abs(u)))
        u_eq = traceless(np.outer(v, v))
        assert abs(energy_density(v, u_eq) - half) < 1e-12 * max(1.0, half)

    @settings(max_examples=100, deadline=None)
    @given(d=st.sampled_from([2, 3]), s=st.floats(0.1, 10), data=st.data())
    def test_homogeneity(self, d, s, data):
        v = data.draw(arrays(float, (d,), elements=st.floats(-3, 3)))
        u = traceless(data.draw(sym(d)))
        e = energy_density(v, u)
        assert abs(energy_density(s * v, s * s * u) - s * s * e) <= 1e-12 * max(1.0, s * s * abs(e)) * 100


class TestEnergyDensityField:
    def test_exact_triplet_is_kinetic(self):
        trip = s2.exact_triplet(smooth_state(64, speed=1.0))
        e = energy_density_field(trip.v, trip.u)
        half = 0.5 * np.sum(trip.v.data**2, axis=0)
        assert np.max(np.abs(e.data[0] - half)) < 1e-12

    def test_zero(self):
        g = Grid(2, 8)
        e = energy_density_field(GridField.zeros(g, 2), GridField.zeros(g, 4))
        assert np.all(e.data == 0)

    def test_trace_violation_located(self):
        g = Grid(2, 8)
        u = np.zeros((4, 8, 8))
        u[0, 3, 5] = 1e-6
        with pytest.raises(InvalidTensorField) as exc:
            energy_density_field(GridField.zeros(g, 2), GridField(g, u))
        assert tuple(exc.value.location) == (3, 5)

    def test_grid_mismatch(self):
        with pytest.raises(DimError):
            energy_density_field(GridField.zeros(Grid(2, 8), 2), GridField.zeros(Grid(2, 16), 4))

    def test_matches_pointwise(self):
        trip = s2.exact_triplet(tg_state(16))
        rng = np.random.default_rng(0)
        u = trip.u.tensor() + 0.3 * traceless(np.eye(2))[:, :, None, None] * rng.normal(size=(16, 16))
        e = energy_density_field(trip.v, GridField(trip.grid, u.reshape(4, 16, 16)))
        for idx in [(0, 0), (3, 7), (15, 2)]:
            v = trip.v.data[(slice(None),) + idx]
            ref = power_lmax(np.outer(v, v) - u[(slice(None), slice(None)) + idx])
            assert abs(e.data[(0,) + idx] - ref) < 1e-12
