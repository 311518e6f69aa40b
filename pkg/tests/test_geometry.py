import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lsnn.fields import VelocityField
from lsnn.geometry import ConfigurationError, Domain, build_mesh, build_uniform_mesh, diameter


def test_vline_mesh_counts():
    mesh = build_uniform_mesh(Domain(0, 2, 0, 1), 0.01)
    assert mesh.n_cells == 20000
    assert np.allclose(mesh.cell_measures, 1e-4)
    # row-major, x fastest
    assert np.allclose(mesh.cell_centroids[:2], [[0.005, 0.005], [0.015, 0.005]])
    assert mesh.cell_centroids[200, 1] == pytest.approx(0.015)


def test_vline_inflow_edges():
    mesh = build_mesh(Domain(0, 2, 0, 1), 0.01, VelocityField.constant(0, 1))
    assert mesh.n_edges == 200
    assert np.all(mesh.edge_centroids[:, 1] == 0.0)
    assert np.allclose(mesh.edge_weights, 1.0)
    assert np.allclose(mesh.edge_normals, [0.0, -1.0])


def test_diagonal_inflow_is_bottom_and_left():
    b = 1 / math.sqrt(2)
    mesh = build_mesh(Domain(-1, 1, -1, 1), 0.01, VelocityField.constant(b, b))
    assert mesh.n_edges == 400
    on_bottom = mesh.edge_centroids[:, 1] == -1.0
    on_left = mesh.edge_centroids[:, 0] == -1.0
    assert np.all(on_bottom | on_left)
    assert on_bottom.sum() == 200
    assert np.allclose(mesh.edge_weights, b)


def test_rotational_inflow_is_bottom_and_right():
    mesh = build_mesh(Domain(0, 1, 0, 1), 0.01, VelocityField.rotational())
    c = mesh.edge_centroids
    assert np.all((c[:, 1] == 0.0) | (c[:, 0] == 1.0))
    assert mesh.n_edges == 200
    assert np.all(mesh.edge_weights > 0)


def test_mesh_arrays_are_read_only():
    mesh = build_uniform_mesh(Domain(0, 1, 0, 1), 0.1)
    with pytest.raises(ValueError):
        mesh.cell_centroids[0, 0] = 3.0


def test_non_divisible_h_names_dimension():
    with pytest.raises(ConfigurationError, match="x side"):
        build_uniform_mesh(Domain(0, 1.005, 0, 1), 0.01)
    with pytest.raises(ConfigurationError, match="y side"):
        build_uniform_mesh(Domain(0, 1, 0, 0.333), 0.01)


def test_invalid_domain():
    with pytest.raises(ValueError):
        Domain(1, 0, 0, 1)


def test_diameter():
    assert diameter(Domain(0, 2, 0, 1)) == pytest.approx(math.sqrt(5))


@given(nx=st.integers(1, 40), ny=st.integers(1, 40), x0=st.integers(-5, 5), y0=st.integers(-5, 5),
       k=st.sampled_from([0.5, 0.25, 0.125]))
def test_partition_measures_sum_to_area(nx, ny, x0, y0, k):
    dom = Domain(x0, x0 + nx * k, y0, y0 + ny * k)
    mesh = build_uniform_mesh(dom, k)
    assert mesh.n_cells == nx * ny
    assert mesh.cell_measures.sum() == pytest.approx(dom.area)
    assert np.all(dom.contains(mesh.cell_centroids, closed=False))


@given(angle=st.floats(0.01, 2 * math.pi - 0.01))
def test_inflow_measure_matches_flux(angle):
    # for a constant field the weighted inflow length equals the inflow flux |beta.n| integrated
    bx, by = math.cos(angle), math.sin(angle)
    mesh = build_mesh(Domain(0, 1, 0, 1), 0.05, VelocityField.constant(bx, by))
    flux = float(np.sum(mesh.edge_weights * mesh.edge_measures))
    assert flux == pytest.approx(abs(bx) + abs(by), rel=1e-12)
