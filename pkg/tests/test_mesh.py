import itertools

import numpy as np
import pytest

from chidenn.mesh import (
    ElementKind,
    Mesh,
    MeshError,
    characteristic_spacing,
    element_patch,
    format_mesh,
    node_patch,
    node_patch_metric,
    parse_mesh,
)
from chidenn.meshgen import box_tet_mesh, distort, line_mesh, notched_plate, rect_mesh, refine_quads

LINE5 = """
dimension 1
nodes 5
1 0.0
2 1.0
3 2.0
4 3.0
5 4.0
elements 4
1 line2 1 2
2 line2 2 3
3 line2 3 4
4 line2 4 5
"""


def ringed_grid():
    """4x4 nodes, unit spacing, numbered as in the 2D patch illustration.

    The central element has nodes 1-4 counterclockwise from (1, 1); the
    outer ring is numbered 5-16 counterclockwise starting at (3, 1).
    """
    inner = [(1, 1), (2, 1), (2, 2), (1, 2)]
    ring = [(3, 1), (3, 2), (3, 3), (2, 3), (1, 3), (0, 3), (0, 2), (0, 1), (0, 0), (1, 0), (2, 0), (3, 0)]
    label = {p: i + 1 for i, p in enumerate(inner + ring)}
    lines = ["dimension 2", "nodes 16"]
    lines += [f"{label[p]} {p[0]} {p[1]}" for p in sorted(label, key=label.get)]
    lines.append("elements 9")
    e = 1
    for j in range(3):
        for i in range(3):
            q = [label[(i, j)], label[(i + 1, j)], label[(i + 1, j + 1)], label[(i, j + 1)]]
            lines.append(f"{e} quad4 " + " ".join(map(str, q)))
            e += 1
    return parse_mesh("\n".join(lines))


def test_parse_line_mesh():
    m = parse_mesh(LINE5)
    assert m.dimension == 1
    assert m.n_nodes == 5 and m.n_elements == 4
    np.testing.assert_array_equal(m.nodes[:, 0], [0, 1, 2, 3, 4])


def test_clockwise_quad_is_inverted():
    text = "dimension 2\nnodes 4\n1 0 0\n2 1 0\n3 1 1\n4 0 1\nelements 1\n1 quad4 1 4 3 2\n"
    with pytest.raises(MeshError, match="inverted element"):
        parse_mesh(text)


def test_dangling_node_reference():
    nodes = "\n".join(f"{i} {float(i)}" for i in range(1, 11))
    text = f"dimension 1\nnodes 10\n{nodes}\nelements 1\n1 line2 1 99\n"
    with pytest.raises(MeshError, match="dangling node reference"):
        parse_mesh(text)


@pytest.mark.parametrize(
    "text, msg",
    [
        ("nodes 1\n1 0\n", "dimension"),
        ("dimension 2\nnodes 1\n1 0\n", "coordinates"),
        ("dimension 1\nnodes 2\n1 0\n2 1\nelements 1\n1 hex8 1 2\n", "unknown element kind"),
        ("dimension 1\nnodes 2\n1 0\n2 1\nbogus 3\n", "unknown section"),
        ("dimension 1\nnodes 2\n1 0\n1 1\n", "duplicate node id"),
    ],
)
def test_malformed(text, msg):
    with pytest.raises(MeshError, match=msg):
        parse_mesh(text)


def test_duplicate_node_in_element():
    with pytest.raises(MeshError, match="duplicate node"):
        Mesh(2, [[0, 0], [1, 0], [1, 1]], ["quad4"], [[0, 1, 2, 2]])


def test_round_trip_keeps_tags_and_sets():
    m = notched_plate()
    m2 = parse_mesh(format_mesh(m))
    np.testing.assert_array_equal(m2.nodes, m.nodes)
    assert m2.connectivity == m.connectivity
    assert m2.region_tags == m.region_tags
    assert [f.nodes for f in m2.facets] == [f.nodes for f in m.facets]
    for k in m.facetsets:
        np.testing.assert_array_equal(m2.facetsets[k], m.facetsets[k])
    np.testing.assert_array_equal(m2.nodesets["notch_tip"], m.nodesets["notch_tip"])


def test_facet_nodes_belong_to_element():
    m = box_tet_mesh(2, 2, 2)
    for f in m.facets:
        assert set(f.nodes) <= set(m.connectivity[f.element])


def test_1d_interior_patch():
    m = line_mesh(6)
    assert node_patch(m, 3, 1).members == (2, 3, 4)


def test_1d_boundary_patch_is_one_sided():
    m = line_mesh(6)
    assert node_patch(m, 0, 1).members == (0, 1)


def test_1d_element_patch():
    m = line_mesh(6)
    np.testing.assert_array_equal(element_patch(m, 3, 1), [2, 3, 4, 5])


def test_line_element_patch():
    m = line_mesh(3, 3.0)
    np.testing.assert_array_equal(element_patch(m, 1, 1), [0, 1, 2, 3])


def test_ringed_grid_patch_of_node_1():
    m = ringed_grid()
    i = m.index_of(1)
    members = {int(m.node_ids[k]) for k in node_patch(m, i, 1).members}
    assert members == {1, 2, 3, 4, 11, 12, 13, 14, 15}


def test_saturated_element_patch():
    m = rect_mesh(3, 2)
    np.testing.assert_array_equal(element_patch(m, 0, 10), np.arange(m.n_nodes))


@pytest.mark.parametrize("nx, ny", [(3, 3), (5, 4), (6, 2)])
@pytest.mark.parametrize("s", [1, 2, 3])
def test_ring_patch_equals_metric_patch_on_grids(nx, ny, s):
    m = rect_mesh(nx, ny, lx=nx * 0.5, ly=ny * 0.5)
    for n in range(m.n_nodes):
        assert node_patch(m, n, s).members == node_patch_metric(m, n, s, spacing=0.5).members


def test_ring_patch_equals_metric_patch_1d():
    m = line_mesh(7, 3.5)
    for n, s in itertools.product(range(m.n_nodes), [1, 2, 3]):
        assert node_patch(m, n, s).members == node_patch_metric(m, n, s, spacing=0.5).members


def test_patch_symmetry_and_monotonicity():
    m = rect_mesh(5, 4)
    for s in (1, 2):
        patches = [set(node_patch(m, n, s).members) for n in range(m.n_nodes)]
        for i, j in itertools.product(range(m.n_nodes), repeat=2):
            assert (j in patches[i]) == (i in patches[j])
        for n in range(m.n_nodes):
            assert patches[n] <= set(node_patch(m, n, s + 1).members)


def test_patch_invariants_on_distorted_mesh():
    m = distort(rect_mesh(5, 5), 0.2, seed=2)
    for n in range(m.n_nodes):
        p = node_patch(m, n, 2)
        assert n in p.members
        assert list(p.members) == sorted(set(p.members))
    for e in range(m.n_elements):
        assert set(m.connectivity[e]) <= set(element_patch(m, e, 1))


def test_characteristic_spacing():
    assert characteristic_spacing(line_mesh(4, 2.0), 2) == pytest.approx(0.5)
    assert characteristic_spacing(rect_mesh(4, 4, 4.0, 4.0), 6) == pytest.approx(1.0)
    m = Mesh(1, [[0.0], [1.0], [3.0]], ["line2", "line2"], [[0, 1], [1, 2]])
    assert characteristic_spacing(m, 1) == pytest.approx(1.5)


def test_isolated_node_has_no_spacing():
    m = Mesh(1, [[0.0], [1.0], [5.0]], ["line2"], [[0, 1]])
    with pytest.raises(MeshError, match="isolated"):
        characteristic_spacing(m, 2)


def test_element_kind_parent_domains():
    assert ElementKind.TET4.contains([0.2, 0.2, 0.2])
    assert not ElementKind.TET4.contains([0.5, 0.5, 0.5])
    assert not ElementKind.QUAD4.contains([1.2, 0.0])


def test_notched_plate_layout():
    m = notched_plate()
    assert m.n_elements == 448
    np.testing.assert_allclose(m.nodes[m.nodesets["notch_tip"][0]], [0.1, 0.15])
    assert m.volume() == pytest.approx(0.3 - np.pi * 0.1**2 / 2, rel=2e-3)
    assert len(m.elements_tagged("notch")) > 0


def test_refined_plate_is_nested():
    m = notched_plate()
    r = refine_quads(m, 2)
    assert r.n_elements == 4 * m.n_elements
    assert r.volume() == pytest.approx(m.volume(), rel=1e-12)
    for n in range(m.n_nodes):
        assert np.min(np.linalg.norm(r.nodes - m.nodes[n], axis=1)) < 1e-12
