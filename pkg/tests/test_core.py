import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lovsim.core import (
    Grid,
    SPIN_DOWN,
    SPIN_UP,
    Spinor,
    SU2Map,
    apply,
    inner,
    make_grid,
    rotation_matrices,
    uniform_state,
)
from lovsim.errors import ConfigurationError, NormalizationError, ShapeError


class TestMakeGrid:
    def test_camera_grid(self):
        g = make_grid(25.0, 25.0, 0.1)
        assert (g.nx, g.ny) == (250, 250)
        assert g.dx == g.dy == 0.1

    def test_smallest_grid_coordinates(self):
        g = make_grid(1.0, 1.0, 0.5)
        assert (g.nx, g.ny) == (2, 2)
        assert set(np.round(g.x_coords(), 12)) == {-0.25, 0.25}

    def test_centering_convention(self):
        g = make_grid(10.0, 10.0, 0.1)
        x, y = g.index_to_coord(0, 0)
        assert x == pytest.approx(-4.95)
        assert y == pytest.approx(-4.95)

    @pytest.mark.parametrize("args", [(0.0, 1.0, 0.1), (1.0, 1.0, -0.1), (1e6, 1.0, 0.1)])
    def test_bad_dimensions(self, args):
        with pytest.raises(ConfigurationError):
            make_grid(*args)

    @given(
        st.integers(min_value=0, max_value=249),
        st.integers(min_value=0, max_value=249),
    )
    def test_index_coordinate_round_trip(self, i, j):
        g = make_grid(25.0, 25.0, 0.1)
        x, y = g.index_to_coord(i, j)
        assert g.coord_to_index(x, y) == (i, j)


class TestUniformState:
    def test_spin_up_everywhere(self):
        g = make_grid(2.0, 2.0, 0.5)
        f = uniform_state(g, SPIN_UP)
        assert np.all(f.up == 1.0)
        assert np.all(f.down == 0.0)

    def test_spin_down_everywhere(self):
        g = make_grid(2.0, 2.0, 0.5)
        f = uniform_state(g, SPIN_DOWN)
        assert np.all(f.up == 0.0)
        assert np.all(f.down == 1.0)

    def test_transverse_state(self):
        g = make_grid(2.0, 2.0, 0.5)
        s = Spinor(1 / np.sqrt(2), 1j / np.sqrt(2))
        f = uniform_state(g, s)
        assert np.allclose(f.cell_norms(), 1.0)

    def test_non_unit_spinor_rejected(self):
        g = make_grid(2.0, 2.0, 0.5)
        with pytest.raises(NormalizationError):
            uniform_state(g, Spinor(1.0, 1.0))


class TestApply:
    def test_identity(self):
        g = make_grid(5.0, 5.0, 0.5)
        f = uniform_state(g, SPIN_UP)
        out = apply(SU2Map.identity(), f)
        assert np.allclose(out.up, f.up, atol=1e-15)
        assert np.allclose(out.down, f.down, atol=1e-15)

    def test_pi_rotation_about_x(self):
        # exp(-i pi sigma_x / 2) = -i sigma_x, so |up> -> -i |down>
        g = make_grid(5.0, 5.0, 0.5)
        f = uniform_state(g, SPIN_UP)
        out = apply(SU2Map.rotation((1, 0, 0), np.pi), f)
        assert np.allclose(out.up, 0.0, atol=1e-15)
        assert np.allclose(out.down, -1j, atol=1e-15)

    def test_grid_mismatch(self):
        g1 = make_grid(5.0, 5.0, 0.5)
        g2 = make_grid(4.0, 4.0, 0.5)
        f2 = uniform_state(g2, SPIN_UP)

        def matrix_fn(x, y):
            return np.broadcast_to(np.eye(2, dtype=complex), g1.shape + (2, 2))

        with pytest.raises(ShapeError):
            apply(SU2Map(matrix_fn), f2)


unit_axes = st.tuples(
    st.floats(-1, 1, allow_nan=False), st.floats(-1, 1, allow_nan=False),
    st.floats(-1, 1, allow_nan=False),
).filter(lambda v: np.linalg.norm(v) > 1e-3).map(
    lambda v: tuple(np.asarray(v) / np.linalg.norm(v))
)


class TestSU2Properties:
    @settings(max_examples=30, deadline=None)
    @given(unit_axes, st.floats(-10, 10, allow_nan=False))
    def test_unitarity_and_determinant(self, axis, angle):
        u = rotation_matrices(axis, np.array([angle]))[0]
        assert np.allclose(u @ u.conj().T, np.eye(2), atol=1e-12)
        assert abs(np.linalg.det(u) - 1) < 1e-12

    @settings(max_examples=15, deadline=None)
    @given(unit_axes, unit_axes, st.floats(-5, 5), st.floats(-5, 5))
    def test_composition_matches_matrix_product(self, ax1, ax2, t1, t2):
        g = make_grid(3.0, 3.0, 0.5)
        rng = np.random.default_rng(0)
        f = _random_field(g, rng)
        m1 = SU2Map.rotation(ax1, lambda x, y, t=t1: t * x)
        m2 = SU2Map.rotation(ax2, lambda x, y, t=t2: t * y)
        sequential = apply(m2, apply(m1, f))
        composed = apply(m2.after(m1), f)
        assert np.allclose(sequential.up, composed.up, atol=1e-12)
        assert np.allclose(sequential.down, composed.down, atol=1e-12)

    def test_per_cell_norm_preserved(self):
        g = make_grid(10.0, 10.0, 0.5)
        f = uniform_state(g, Spinor(0.6, 0.8j))
        m = SU2Map.rotation((0, 1, 0), lambda x, y: 1.3 * x - 0.2 * y)
        out = apply(m, f)
        assert np.max(np.abs(out.cell_norms() - f.cell_norms())) < 1e-12

    def test_non_commutativity_witness(self):
        from lovsim.beamline import ideal_lov_state
        from lovsim.core import SPIN_UP

        a = 5.0
        g = make_grid(25.0, 25.0, 0.1)
        u_y = SU2Map.rotation((1, 0, 0), lambda x, y: 2 * np.pi * y / a)
        u_x = SU2Map.rotation((0, 1, 0), lambda x, y: 2 * np.pi * x / a)
        f = uniform_state(g, SPIN_UP)
        xy = apply(u_x, apply(u_y, f))
        yx = apply(u_y, apply(u_x, f))
        diff = np.maximum(np.abs(xy.up - yx.up), np.abs(xy.down - yx.down))
        assert diff.max() > 0.1


def _random_field(grid, rng):
    up = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    down = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    norm = np.sqrt(np.abs(up) ** 2 + np.abs(down) ** 2)
    from lovsim.core import SpinorField

    return SpinorField(grid, up / norm, down / norm)


class TestInner:
    def test_self_inner_of_global_normalization(self):
        g = make_grid(5.0, 5.0, 0.5)
        f = uniform_state(g, SPIN_UP).globally_normalized()
        assert inner(f, f) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonality(self):
        g = make_grid(5.0, 5.0, 0.5)
        assert inner(uniform_state(g, SPIN_UP), uniform_state(g, SPIN_DOWN)) == 0

    def test_conjugate_symmetry(self):
        g = make_grid(4.0, 4.0, 0.5)
        rng = np.random.default_rng(42)
        f, h = _random_field(g, rng), _random_field(g, rng)
        assert inner(f, h) == pytest.approx(np.conj(inner(h, f)), abs=1e-12)

    def test_grid_mismatch(self):
        f = uniform_state(make_grid(5.0, 5.0, 0.5), SPIN_UP)
        h = uniform_state(make_grid(4.0, 4.0, 0.5), SPIN_UP)
        with pytest.raises(ShapeError):
            inner(f, h)
