import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acousticlab import (
    CellField,
    FaceField,
    State,
    build_grid,
    div,
    energy,
    grad,
    inner,
    pack,
    stream_velocity,
    unpack,
    zero_state,
)
from acousticlab.grid import gradient_matrix, pack_face

from oracles import loop_div, loop_grad, loop_inner


def random_state(g, rng, dtype=float):
    u = FaceField(
        rng.standard_normal((g.nx - 1, g.ny)).astype(dtype),
        rng.standard_normal((g.nx, g.ny - 1)).astype(dtype),
    )
    return State(u, CellField(rng.standard_normal((g.nx, g.ny)).astype(dtype)))


class TestBuildGrid:
    def test_counts_2x2(self):
        g = build_grid(2, 2, 1, 1)
        assert (g.ncells, g.nxfaces, g.nyfaces) == (4, 2, 2)

    def test_counts_4x3(self):
        g = build_grid(4, 3, 1, 1)
        assert (g.ncells, g.nxfaces, g.nyfaces) == (12, 9, 8)

    def test_rejects_small(self):
        with pytest.raises(ValueError):
            build_grid(1, 4, 1, 1)

    def test_rejects_nonpositive_length(self):
        with pytest.raises(ValueError):
            build_grid(4, 4, -1.0, 1.0)

    def test_index_maps_bijective(self):
        g = build_grid(5, 3)
        vec = np.arange(g.nstate, dtype=float)
        assert np.array_equal(pack(unpack(vec, g), g), vec)


class TestGrad:
    def test_constant_field(self):
        g = build_grid(6, 4)
        out = grad(CellField(np.full((6, 4), 3.7)), g)
        assert np.all(out.x == 0) and np.all(out.y == 0)

    def test_linear_exact(self):
        g = build_grid(8, 5)
        x, y = g.cell_xy()
        out = grad(CellField(x + 0 * y), g)
        assert np.allclose(out.x, 1.0, atol=1e-14)
        assert np.allclose(out.y, 0.0, atol=1e-14)

    def test_matches_loop_oracle(self):
        g = build_grid(7, 5, 2.0, 0.7)
        rng = np.random.default_rng(3)
        r = rng.standard_normal((7, 5))
        out = grad(CellField(r), g)
        gx, gy = loop_grad(r, g.hx, g.hy)
        assert np.allclose(out.x, gx, rtol=1e-14, atol=0)
        assert np.allclose(out.y, gy, rtol=1e-14, atol=0)

    def test_shape_mismatch(self):
        g = build_grid(4, 4)
        with pytest.raises(ValueError):
            grad(CellField(np.zeros((3, 4))), g)


class TestDiv:
    def test_zero(self):
        g = build_grid(4, 4)
        assert np.all(div(zero_state(g).u, g).values == 0)

    def test_grad_of_linear_3x3(self):
        # one-sided closure: interior cells see zero, the boundary layer not
        g = build_grid(3, 3)
        x, _ = g.cell_xy()
        u = grad(CellField(x + np.zeros((3, 3))), g)
        d = div(u, g).values
        dref = loop_div(u.x, u.y, g.hx, g.hy)
        assert np.allclose(d, dref, atol=1e-14)
        assert abs(d[1, 1]) < 1e-14
        assert abs(d[0, 1]) > 0.1 and abs(d[2, 1]) > 0.1

    def test_matches_loop_oracle(self):
        g = build_grid(6, 9, 1.3, 0.4)
        rng = np.random.default_rng(4)
        u = FaceField(rng.standard_normal((5, 9)), rng.standard_normal((6, 8)))
        assert np.allclose(div(u, g).values, loop_div(u.x, u.y, g.hx, g.hy), atol=1e-13)

    def test_total_flux_vanishes(self):
        g = build_grid(11, 7)
        rng = np.random.default_rng(5)
        u = FaceField(rng.standard_normal((10, 7)), rng.standard_normal((11, 6)))
        total = div(u, g).values.sum() * g.cell_area
        unorm = np.sqrt(np.sum(u.x**2) + np.sum(u.y**2))
        assert abs(total) <= 1e-13 * unorm


class TestInner:
    def test_zero_state(self):
        g = build_grid(4, 4)
        assert inner(zero_state(g), zero_state(g), g) == 0

    def test_unit_impulse(self):
        g = build_grid(5, 4, 2.0, 3.0)
        z = zero_state(g)
        z.r.values[2, 1] = 1.0
        assert inner(z, z, g) == pytest.approx(g.cell_area, rel=1e-15)

    def test_matches_loop_oracle(self):
        g = build_grid(5, 6, 0.9, 1.7)
        rng = np.random.default_rng(6)
        a, b = random_state(g, rng), random_state(g, rng)
        ref = loop_inner(a.u.x, a.u.y, a.r.values, b.u.x, b.u.y, b.r.values, g.hx, g.hy)
        assert inner(a, b, g) == pytest.approx(ref, rel=1e-13)

    def test_conjugate_symmetry(self):
        g = build_grid(4, 5)
        rng = np.random.default_rng(7)
        a = random_state(g, rng)
        b = random_state(g, rng)
        az = State(
            FaceField(a.u.x + 1j * rng.standard_normal(a.u.x.shape), a.u.y),
            CellField(a.r.values),
        )
        assert inner(az, b, g) == pytest.approx(np.conj(inner(b, az, g)), rel=1e-13)


class TestEnergy:
    def test_zero(self):
        g = build_grid(3, 3)
        assert energy(zero_state(g), g) == 0.0

    def test_constant_pressure(self):
        g = build_grid(16, 16)
        z = zero_state(g)
        z.r.values[:] = 1.0
        assert energy(z, g) == pytest.approx(0.5, rel=1e-14)

    def test_half_inner(self):
        g = build_grid(5, 5)
        z = random_state(g, np.random.default_rng(8))
        assert energy(z, g) == 0.5 * inner(z, z, g).real


@settings(max_examples=40, deadline=None)
@given(
    nx=st.integers(min_value=2, max_value=32),
    ny=st.integers(min_value=2, max_value=32),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_summation_by_parts_property(nx, ny, seed):
    g = build_grid(nx, ny)
    rng = np.random.default_rng(seed)
    u = FaceField(rng.standard_normal((nx - 1, ny)), rng.standard_normal((nx, ny - 1)))
    r = rng.standard_normal((nx, ny))
    s1 = g.cell_area * np.sum(div(u, g).values * r)
    gr = grad(CellField(r), g)
    s2 = g.cell_area * (np.sum(u.x * gr.x) + np.sum(u.y * gr.y))
    scale = max(abs(s1), abs(s2), 1e-30)
    assert abs(s1 + s2) <= 1e-12 * scale


def test_gradient_matrix_matches_operators():
    g = build_grid(6, 5, 1.4, 0.8)
    G = gradient_matrix(g)
    rng = np.random.default_rng(9)
    r = rng.standard_normal((6, 5))
    gr = grad(CellField(r), g)
    assert np.allclose(G @ r.ravel(), pack_face(gr, g), atol=1e-14)
    u = FaceField(rng.standard_normal((5, 5)), rng.standard_normal((6, 4)))
    assert np.allclose(-(G.T @ pack_face(u, g)), div(u, g).values.ravel(), atol=1e-14)


def test_stream_velocity_exactly_divergence_free():
    g = build_grid(9, 7)
    rng = np.random.default_rng(10)
    u = stream_velocity(rng.standard_normal((8, 6)), g)
    d = div(u, g).values
    unorm = np.sqrt(np.sum(u.x**2) + np.sum(u.y**2))
    assert np.abs(d).max() <= 1e-13 * unorm
