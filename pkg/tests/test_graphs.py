"""Geometric graphs: Delaunay, grids, swiss roll, radius graphs, file IO."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gncalab.graphs import (
    DegenerateInputError,
    EdgeListError,
    Graph,
    GraphSchemaError,
    NodeIndexError,
    PointCloud,
    _circumcircle,
    delaunay,
    grid2d,
    load_geometric_graph,
    radius_graph,
    save_geometric_graph,
    swiss_roll,
    uniform_square,
)
from gncalab.rng import Stream


# -- Graph container ----------------------------------------------------------


def test_graph_stores_both_orientations_sorted():
    g = Graph.from_pairs(3, np.array([[0, 1], [1, 2]]))
    assert g.n == 3
    assert len(g.src) == 4
    # edges arrive sorted by destination: neighbours of each node contiguous
    assert np.all(np.diff(g.dst) >= 0)
    assert set(map(tuple, np.stack([g.src, g.dst], 1).tolist())) == {
        (1, 0), (0, 1), (2, 1), (1, 2),
    }


def test_graph_rejects_self_loop():
    with pytest.raises(EdgeListError):
        Graph.from_pairs(2, np.array([[0, 0]]))


def test_graph_rejects_out_of_range():
    with pytest.raises(NodeIndexError):
        Graph.from_pairs(2, np.array([[0, 2]]))


def test_graph_rejects_duplicate_edge():
    with pytest.raises(EdgeListError):
        Graph.from_pairs(3, np.array([[0, 1], [0, 1]]))


def test_neighbors_and_degree():
    g = Graph.from_pairs(4, np.array([[0, 1], [0, 2], [0, 3]]))
    assert set(g.neighbors(0).tolist()) == {1, 2, 3}
    assert g.degree.tolist() == [3, 1, 1, 1]


def test_undirected_pairs_lexsorted():
    g = Graph.from_pairs(4, np.array([[2, 3], [0, 1], [1, 3]]))
    assert g.undirected_pairs().tolist() == [[0, 1], [1, 3], [2, 3]]


# -- Delaunay -----------------------------------------------------------------


def test_circumcircle_oracle():
    # circle through (0,0), (2,0), (0,2): centre (1,1), r^2 = 2
    cx, cy, rr = _circumcircle(0.0, 0.0, 2.0, 0.0, 0.0, 2.0)
    assert abs(cx - 1.0) < 1e-12 and abs(cy - 1.0) < 1e-12
    assert abs(rr - 2.0) < 1e-12


def test_circumcircle_degenerate_raises():
    with pytest.raises(DegenerateInputError):
        _circumcircle(0.0, 0.0, 1.0, 1.0, 2.0, 2.0)


def test_delaunay_triangle():
    g = delaunay(PointCloud(np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 1.0]])))
    assert g.num_edges_undirected == 3


def test_delaunay_unit_square_has_five_edges():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    g = delaunay(PointCloud(pts))
    assert g.num_edges_undirected == 5
    pairs = set(map(tuple, g.undirected_pairs().tolist()))
    # all four box sides plus exactly one diagonal
    for side in [(0, 1), (0, 2), (1, 3), (2, 3)]:
        assert side in pairs
    assert ((0, 3) in pairs) != ((1, 2) in pairs)


def test_delaunay_collinear_raises():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
    with pytest.raises(DegenerateInputError):
        delaunay(PointCloud(pts))


def test_delaunay_needs_three_points():
    with pytest.raises(ValueError):
        delaunay(PointCloud(np.array([[0.0, 0.0], [1.0, 1.0]])))


def brute_force_delaunay_edges(pts):
    """All pairs (i, j) that share a triangle whose open circumdisk is empty.

    O(n^4) reference used to pin the fast implementation on small clouds."""
    n = len(pts)
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                try:
                    cx, cy, rr = _circumcircle(*pts[i], *pts[j], *pts[k])
                except DegenerateInputError:
                    continue
                d2 = np.sum((pts - np.array([cx, cy])) ** 2, axis=1)
                inside = d2 < rr - 1e-12 * max(rr, 1.0)
                inside[[i, j, k]] = False
                if not inside.any():
                    edges.update([(i, j), (i, k), (j, k)])
    return edges


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_delaunay_matches_brute_force(seed):
    cloud = uniform_square(25, seed)
    g = delaunay(cloud)
    got = set(map(tuple, g.undirected_pairs().tolist()))
    expect = brute_force_delaunay_edges(cloud.points)
    assert got == expect


def test_delaunay_edge_count_is_planar():
    for seed in range(3):
        cloud = uniform_square(120, seed)
        g = delaunay(cloud)
        assert g.num_edges_undirected <= 3 * cloud.points.shape[0] - 6
        # triangulations of points in general position are connected
        assert np.all(g.degree >= 2)


def test_delaunay_deterministic():
    a = delaunay(uniform_square(60, 5)).undirected_pairs()
    b = delaunay(uniform_square(60, 5)).undirected_pairs()
    assert np.array_equal(a, b)


# -- point clouds -------------------------------------------------------------


def test_uniform_square_bounds_and_determinism():
    c = uniform_square(100, 9)
    assert c.points.shape == (100, 2)
    assert c.points.min() >= 0.0 and c.points.max() < 1.0
    assert np.array_equal(c.points, uniform_square(100, 9).points)


def test_grid2d_shape_and_edges():
    g = grid2d(3, 4)
    assert g.n == 12
    # 3 rows of 3 horizontal edges plus 4 columns of 2 vertical edges
    assert g.num_edges_undirected == 3 * 3 + 4 * 2
    corner_degrees = sorted(g.degree.tolist())
    assert corner_degrees[:4] == [2, 2, 2, 2]
    assert max(corner_degrees) == 4


def test_grid2d_coords_are_lattice():
    g = grid2d(2, 3)
    assert g.coords.shape == (6, 2)
    assert set(map(tuple, g.coords.tolist())) == {
        (0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (0.0, 1.0), (1.0, 1.0), (2.0, 1.0),
    }


def test_swiss_roll_bounds_and_shape():
    c = swiss_roll(200, 3)
    assert c.points.shape == (200, 3)
    assert np.abs(c.points).max() <= 1.0 + 1e-12
    assert np.array_equal(c.points, swiss_roll(200, 3).points)


def test_swiss_roll_radius_matches_angle_before_rescale():
    # with rescaling off, each point obeys x = t cos t, z = t sin t
    c = swiss_roll(300, 7, rescale=False)
    t = np.hypot(c.points[:, 0], c.points[:, 2])
    assert np.all(t >= 1.5 * math.pi - 1e-9)
    assert np.all(t <= 4.5 * math.pi + 1e-9)
    angle = np.arctan2(c.points[:, 2], c.points[:, 0])
    assert np.allclose(np.cos(t), np.cos(angle), atol=1e-9)
    assert np.allclose(np.sin(t), np.sin(angle), atol=1e-9)


# -- radius graph -------------------------------------------------------------


def brute_force_radius_pairs(pts, r):
    n = len(pts)
    out = set()
    for i in range(n):
        for j in range(i + 1, n):
            if np.linalg.norm(pts[i] - pts[j]) < r:
                out.add((i, j))
    return out


@pytest.mark.parametrize("r", [0.05, 0.15, 0.4])
def test_radius_graph_matches_brute_force(r):
    pts = Stream(31).uniform((200, 2), -1.0, 1.0)
    g = radius_graph(pts, r)
    got = set(map(tuple, g.undirected_pairs().tolist()))
    assert got == brute_force_radius_pairs(pts, r)


def test_radius_graph_3d_matches_brute_force():
    pts = Stream(32).uniform((150, 3), -1.0, 1.0)
    g = radius_graph(pts, 0.5)
    got = set(map(tuple, g.undirected_pairs().tolist()))
    assert got == brute_force_radius_pairs(pts, 0.5)


def test_radius_graph_strict_inequality():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.5]])
    g = radius_graph(pts, 1.0)
    pairs = set(map(tuple, g.undirected_pairs().tolist()))
    assert (0, 1) not in pairs  # distance exactly r is excluded
    assert (0, 2) in pairs


def test_radius_graph_monotone_in_radius():
    pts = Stream(33).uniform((100, 2))
    small = set(map(tuple, radius_graph(pts, 0.1).undirected_pairs().tolist()))
    large = set(map(tuple, radius_graph(pts, 0.3).undirected_pairs().tolist()))
    assert small <= large


def test_radius_graph_tiny_inputs():
    assert radius_graph(np.zeros((1, 2)), 0.5).num_edges_undirected == 0
    assert radius_graph(np.zeros((0, 2)).reshape(0, 2), 0.5).n == 0


@given(st.integers(min_value=0, max_value=10**6))
@settings(max_examples=10, deadline=None)
def test_radius_graph_property(seed):
    pts = Stream(seed).uniform((60, 2))
    g = radius_graph(pts, 0.2)
    got = set(map(tuple, g.undirected_pairs().tolist()))
    assert got == brute_force_radius_pairs(pts, 0.2)


# -- file round trip ----------------------------------------------------------


def test_save_load_round_trip(tmp_path):
    g = delaunay(uniform_square(40, 2))
    path = tmp_path / "g.json"
    save_geometric_graph(g, str(path))
    g2 = load_geometric_graph(str(path))
    assert g2.n == g.n
    assert np.array_equal(g2.undirected_pairs(), g.undirected_pairs())
    assert np.allclose(g2.coords, g.coords)


def _write(tmp_path, payload):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(payload))
    return str(path)


def _valid_payload():
    return {
        "n": 3,
        "dim": 2,
        "coords": [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        "edges": [[0, 1], [1, 2]],
    }


def test_load_rejects_missing_key(tmp_path):
    payload = _valid_payload()
    del payload["dim"]
    with pytest.raises(GraphSchemaError):
        load_geometric_graph(_write(tmp_path, payload))


def test_load_rejects_extra_key(tmp_path):
    payload = _valid_payload()
    payload["comment"] = "hi"
    with pytest.raises(GraphSchemaError):
        load_geometric_graph(_write(tmp_path, payload))


def test_load_rejects_bad_coord_shape(tmp_path):
    payload = _valid_payload()
    payload["coords"] = [[0.0], [1.0], [2.0]]
    with pytest.raises(GraphSchemaError):
        load_geometric_graph(_write(tmp_path, payload))


def test_load_rejects_unordered_edge(tmp_path):
    payload = _valid_payload()
    payload["edges"] = [[1, 0]]
    with pytest.raises(EdgeListError):
        load_geometric_graph(_write(tmp_path, payload))


def test_load_rejects_duplicate_edge(tmp_path):
    payload = _valid_payload()
    payload["edges"] = [[0, 1], [0, 1]]
    with pytest.raises(EdgeListError):
        load_geometric_graph(_write(tmp_path, payload))


def test_load_rejects_out_of_range_edge(tmp_path):
    payload = _valid_payload()
    payload["edges"] = [[0, 3]]
    with pytest.raises(NodeIndexError):
        load_geometric_graph(_write(tmp_path, payload))


def test_error_types_are_distinct():
    assert not issubclass(GraphSchemaError, EdgeListError)
    assert not issubclass(EdgeListError, GraphSchemaError)
    assert not issubclass(NodeIndexError, (GraphSchemaError, EdgeListError))
