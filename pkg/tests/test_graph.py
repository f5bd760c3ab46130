from __future__ import annotations

import numpy as np
import pytest

from oracles import TETRA_B, TRI_CYCLIC_B, mp_rank, mp_rigidity, mp_tetrahedron, mp_triangle
from rigidform import graph as gr
from rigidform.errors import InvalidInputError
from rigidform.graph import FormationGraph, ShapeSpec


def test_incidence_roundtrip_and_splits(tetra_graph):
    G = tetra_graph
    assert np.array_equal(G.B, TETRA_B)
    assert np.allclose(G.S1 + G.S2, G.B)
    assert np.all(G.S1.sum(axis=0) == 1)
    assert np.all(G.S2.sum(axis=0) == -1)
    assert np.allclose(np.ones(G.n) @ G.B, 0.0)
    assert G.edges[0] == (1, 0)


def test_graph_rejects_bad_edges():
    with pytest.raises(InvalidInputError):
        FormationGraph(3, ((0, 0),))
    with pytest.raises(InvalidInputError):
        FormationGraph(3, ((0, 1), (1, 0)))
    with pytest.raises(InvalidInputError):
        FormationGraph(3, ((0, 3),))
    with pytest.raises(InvalidInputError):
        FormationGraph.from_incidence([[1, 1], [0, -1], [0, 0]])


def test_neighbors(tetra_graph):
    assert sorted(tetra_graph.neighbors(3)) == [0, 1, 2]


def test_relative_positions_two_agents():
    G = FormationGraph(2, ((0, 1),))
    assert np.allclose(gr.relative_positions(G, [0, 0, 1, 0], 2), [-1, 0])
    assert np.allclose(gr.relative_positions(G, [3, 3, 3, 3], 2), 0.0)
    with pytest.raises(InvalidInputError):
        gr.relative_positions(G, [0, 0, 1], 2)


def test_relative_positions_cyclic_triangle():
    G = FormationGraph.from_incidence(TRI_CYCLIC_B)
    P = gr.equilateral_triangle(1.0)
    Z = gr.relative_positions(G, P.ravel(), 2).reshape(3, 2)
    assert np.allclose(np.linalg.norm(Z, axis=1), 1.0)
    assert np.allclose(Z.sum(axis=0), 0.0, atol=1e-15)
    # direct arithmetic: edge k runs from the +1 row to the -1 row of column k
    for k in range(3):
        t = int(np.flatnonzero(TRI_CYCLIC_B[:, k] == 1)[0])
        h = int(np.flatnonzero(TRI_CYCLIC_B[:, k] == -1)[0])
        assert np.allclose(Z[k], P[t] - P[h])


def test_rigidity_matrix_examples():
    G = FormationGraph(2, ((0, 1),))
    assert np.allclose(gr.rigidity_matrix(G, [1.0, 0.0], 2), [[1, 0, -1, 0]])
    assert np.allclose(gr.rigidity_matrix(G, [0.0, 0.0], 2), 0.0)
    with pytest.raises(InvalidInputError):
        gr.rigidity_matrix(G, [1.0], 2)


def test_rigidity_matrix_matches_oracle(tetra_graph, tetra70):
    R = gr.rigidity_matrix(tetra_graph, tetra70.zstar, 3)
    oracle = mp_rigidity(TETRA_B, mp_tetrahedron(70))
    assert np.allclose(R, np.array(oracle.tolist(), dtype=float), atol=1e-11)
    assert np.linalg.matrix_rank(R) == mp_rank(oracle) == 6


def test_unit_triangle_rank(tri_graph, unit_triangle):
    R = gr.rigidity_matrix(tri_graph, unit_triangle.zstar, 2)
    assert mp_rank(mp_rigidity(TRI_CYCLIC_B, mp_triangle(1))) == 3
    rep = gr.is_inf_min_rigid(tri_graph, unit_triangle.zstar, 2)
    assert rep.ok and rep.rank == 3 == np.linalg.matrix_rank(R)


def _square(edges):
    G = FormationGraph(4, edges)
    P = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    return G, gr.relative_positions(G, P.ravel(), 2)


def test_square_without_diagonal_not_rigid():
    G, z = _square(((0, 1), (1, 2), (2, 3), (3, 0)))
    rep = gr.is_inf_min_rigid(G, z, 2)
    assert not rep
    assert "not minimally rigid (|E|=4, need 5)" in rep.reason


def test_square_with_diagonal_rigid():
    G, z = _square(((0, 1), (1, 2), (2, 3), (3, 0), (0, 2)))
    assert gr.is_inf_min_rigid(G, z, 2).ok


def test_tetrahedron_rigid(tetra_graph, tetra70):
    assert gr.is_inf_min_rigid(tetra_graph, tetra70.zstar, 3).ok


def test_collinear_triangle_flagged(tri_graph):
    P = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    z = gr.relative_positions(tri_graph, P.ravel(), 2)
    rep = gr.is_inf_min_rigid(tri_graph, z, 2)
    assert not rep and "infinitesimally" in rep.reason


def test_distance_errors():
    z = np.array([3.0, 4.0, 1.0, 0.0])
    d = np.array([5.0, 1.0])
    assert np.allclose(gr.distance_errors(z, d), 0.0)
    assert np.allclose(gr.distance_errors(2 * z, d), 3 * d**2)


def test_distance_errors_tetra_at_shape(tetra_graph, tetra70):
    z = gr.relative_positions(tetra_graph, tetra70.positions.ravel(), 3)
    assert np.abs(gr.distance_errors(z, tetra70.d)).max() < 1e-12 * 70**2


def test_q_matrix_examples(unit_triangle, tri_graph):
    G = FormationGraph(2, ((0, 1),))
    assert np.allclose(gr.q_matrix(G, [1.0, 0.0], 2), [[2.0]])
    assert np.allclose(gr.q_matrix(G, [0.0, 0.0], 2), 0.0)
    Q = gr.q_matrix(tri_graph, unit_triangle.zstar, 2)
    assert np.linalg.eigvalsh(Q).min() > 0.1


def test_shape_spec_validation(tri_graph):
    with pytest.raises(InvalidInputError):
        ShapeSpec(2, np.array([1.0, 0.0]), np.array([2.0]))
    with pytest.raises(InvalidInputError):
        ShapeSpec(4, np.zeros(4), np.ones(1))
    with pytest.raises(InvalidInputError):
        ShapeSpec(2, np.zeros(2), np.zeros(1))


def test_shape_from_relative_recovers_placement(tetra_graph, tetra70):
    s = ShapeSpec.from_relative(tetra_graph, tetra70.zstar, 3)
    assert s.positions is not None
    assert np.allclose(s.positions, tetra70.positions, atol=1e-9)


def test_canonical_shapes():
    T = gr.regular_tetrahedron(25.0)
    D = np.linalg.norm(T[:, None] - T[None], axis=2)
    assert np.allclose(D[np.triu_indices(4, 1)], 25.0)
    assert np.allclose(T.mean(axis=0), 0.0, atol=1e-12)
    H = gr.regular_hexagon(50.0)
    ring = [0, 1, 4, 5, 3, 2]
    for a, b in zip(ring, ring[1:] + ring[:1]):
        assert np.linalg.norm(H[a] - H[b]) == pytest.approx(50.0)


def test_rigid_edge_count():
    assert gr.rigid_edge_count(5, 2) == 7
    assert gr.rigid_edge_count(4, 3) == 6
    with pytest.raises(InvalidInputError):
        gr.rigid_edge_count(4, 4)
