import numpy as np
import pytest

from chidenn.interp import (
    ConvolutionConfig,
    InterpolationError,
    PatchTooSmall,
    SingularMomentMatrix,
    build_patch_bases,
    chidenn_shape,
    element_shapes,
    fe_shape,
    lagrange_conv_patch,
    rbf_assemble_patch,
    rbf_conv_patch,
)
from chidenn.mesh import ElementKind, Mesh, NodePatch, node_patch
from chidenn.meshgen import box_tet_mesh, distort, line_mesh, rect_mesh


def cubic_patch_polys(x):
    """Closed-form convolution shape functions of element 1, nodes at 0..3."""
    return np.array(
        [
            -0.5 * (x - 1) * (x - 2) ** 2,
            x * (x - 2) ** 2 + 0.5 * (x - 1) * (x - 2) * (x - 3),
            -((x - 1) ** 2) * (x - 3) - 0.5 * x * (x - 1) * (x - 2),
            0.5 * (x - 1) ** 2 * (x - 2),
        ]
    )


def rbf_dense_oracle(coords, X, c, q, p):
    """Radial point interpolation weights from a plain dense solve in raw coordinates."""
    from itertools import product

    dim = coords.shape[1]
    exps = [e for deg in range(p + 1) for e in product(range(deg + 1), repeat=dim) if sum(e) == deg]
    poly = lambda Y: np.array([[np.prod(y ** np.array(e)) for e in exps] for y in Y])
    r2 = lambda A, B: np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=2)
    R = (r2(coords, coords) + c * c) ** q
    P = poly(coords)
    m = P.shape[1]
    G = np.block([[R, P], [P.T, np.zeros((m, m))]])
    rhs = np.concatenate([(r2(coords, X[None]) + c * c) ** q, poly(X[None]).T])
    return np.linalg.solve(G, rhs)[: len(coords), 0]


# -- standard FE shapes ------------------------------------------------------


def test_fe_shape_examples():
    np.testing.assert_array_equal(fe_shape(ElementKind.LINE2, [-1.0])[0], [1.0, 0.0])
    np.testing.assert_array_equal(fe_shape(ElementKind.QUAD4, [0.0, 0.0])[0], [0.25] * 4)
    np.testing.assert_array_equal(fe_shape(ElementKind.TET4, [1.0, 0.0, 0.0])[0], [0, 1, 0, 0])


def test_fe_shape_outside_parent_domain():
    with pytest.raises(InterpolationError, match="outside"):
        fe_shape(ElementKind.QUAD4, [1.5, 0.0])


# -- Lagrange patch functions ------------------------------------------------


def test_lagrange_kronecker_at_node():
    W, _ = lagrange_conv_patch([0.0, 1.0, 2.0], 1.0, 2)
    np.testing.assert_allclose(W, [0, 1, 0], atol=1e-15)


def test_lagrange_midpoint_values_match_polyfit():
    W, dW = lagrange_conv_patch([0.0, 1.0, 2.0], 0.5, 2)
    np.testing.assert_allclose(W, [0.375, 0.75, -0.125], atol=1e-14)
    for k in range(3):
        coeff = np.polyfit([0.0, 1.0, 2.0], np.eye(3)[k], 2)
        assert W[k] == pytest.approx(np.polyval(coeff, 0.5), abs=1e-13)
        assert dW[k] == pytest.approx(np.polyval(np.polyder(coeff), 0.5), abs=1e-12)


def test_lagrange_duplicate_coordinates():
    with pytest.raises(InterpolationError, match="duplicate"):
        lagrange_conv_patch([0.0, 1.0, 1.0], 0.5, 2)


def test_four_node_patch_midpoint_values():
    m = line_mesh(3, 3.0)
    cfg = ConvolutionConfig(s=1, a=1.0, p=2, kernel="lagrange1d")
    sample = chidenn_shape(m, 1, [0.0], build_patch_bases(m, cfg))
    np.testing.assert_array_equal(sample.nodes, [0, 1, 2, 3])
    np.testing.assert_allclose(sample.values, [-0.0625, 0.5625, 0.5625, -0.0625], atol=1e-14)


def test_four_node_patch_closed_form_at_50_points():
    m = line_mesh(3, 3.0)
    cfg = ConvolutionConfig(s=1, p=2, kernel="lagrange1d")
    xi = np.linspace(-1, 1, 50)[:, None]
    nodes, values, grads, _, X = element_shapes(m, 1, xi, build_patch_bases(m, cfg))
    np.testing.assert_allclose(values, cubic_patch_polys(X[:, 0]).T, atol=1e-12)


def test_four_node_patch_kronecker_at_element_nodes():
    m = line_mesh(3, 3.0)
    bases = build_patch_bases(m, ConvolutionConfig(s=1, p=2, kernel="lagrange1d"))
    left = chidenn_shape(m, 1, [-1.0], bases).values
    right = chidenn_shape(m, 1, [1.0], bases).values
    np.testing.assert_allclose(left, [0, 1, 0, 0], atol=1e-14)
    np.testing.assert_allclose(right, [0, 0, 1, 0], atol=1e-14)


# -- radial point interpolation ----------------------------------------------


def grid_patch(mesh, center):
    return node_patch(mesh, center, 1)


def test_rbf_moment_matrix_layout():
    m = rect_mesh(2, 2, 2.0, 2.0)
    basis = rbf_assemble_patch(m, grid_patch(m, 4), ConvolutionConfig(s=1, p=1))
    assert basis.G.shape == (12, 12)
    np.testing.assert_array_equal(basis.G, basis.G.T)
    np.testing.assert_array_equal(basis.G[9:, 9:], 0.0)


def test_rbf_factorization_reproduces_identity():
    from scipy.linalg import lu_solve

    m = distort(rect_mesh(4, 4), 0.2, seed=0)
    basis = rbf_assemble_patch(m, node_patch(m, 12, 2), ConvolutionConfig(p=2))
    probe = np.random.default_rng(1).standard_normal((basis.G.shape[0], 5))
    np.testing.assert_allclose(basis.G @ lu_solve(basis.lu, probe), probe, atol=1e-10)


def test_rbf_patch_too_small():
    m = Mesh(2, [[0, 0], [1, 0], [1, 1], [0, 1]], ["quad4"], [[0, 1, 2, 3]])
    patch = NodePatch(0, (0, 1), 1.0)
    with pytest.raises(PatchTooSmall):
        rbf_assemble_patch(m, patch, ConvolutionConfig(p=1))


def test_rbf_collinear_patch_is_singular():
    m = rect_mesh(4, 1)
    patch = NodePatch(1, (0, 1, 2, 3), 1.0)
    with pytest.raises(SingularMomentMatrix):
        rbf_assemble_patch(m, patch, ConvolutionConfig(p=1))


def test_rbf_kronecker_at_center():
    m = rect_mesh(4, 4)
    basis = rbf_assemble_patch(m, grid_patch(m, 12), ConvolutionConfig())
    W, _ = rbf_conv_patch(basis, m.nodes[12])
    expected = np.zeros(basis.n)
    expected[basis.members.index(12)] = 1.0
    np.testing.assert_allclose(W[0], expected, atol=1e-12)


@pytest.mark.parametrize("a, p", [(0.5, 1), (1.0, 1), (2.0, 2)])
def test_rbf_matches_dense_oracle(a, p):
    m = distort(rect_mesh(5, 5), 0.2, seed=4)
    cfg = ConvolutionConfig(s=2, a=a, p=p)
    center = 14
    patch = node_patch(m, center, 2)
    basis = rbf_assemble_patch(m, patch, cfg)
    rng = np.random.default_rng(0)
    coords = m.nodes[list(patch.members)]
    for _ in range(5):
        X = m.nodes[center] + 0.3 * rng.uniform(-1, 1, 2)
        W, _ = rbf_conv_patch(basis, X)
        oracle = rbf_dense_oracle(coords, X, a * patch.spacing, cfg.rbf_exponent, p)
        np.testing.assert_allclose(W[0], oracle, atol=1e-9)
        assert W[0].sum() == pytest.approx(1.0, abs=1e-10)
        np.testing.assert_allclose(W[0] @ coords, X, atol=1e-10)


def test_rbf_derivative_matches_finite_differences():
    m = distort(rect_mesh(4, 4), 0.15, seed=3)
    basis = rbf_assemble_patch(m, node_patch(m, 6, 1), ConvolutionConfig(p=1))
    X = m.nodes[6] + np.array([0.11, -0.07])
    _, dW = rbf_conv_patch(basis, X)
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (rbf_conv_patch(basis, X + e)[0] - rbf_conv_patch(basis, X - e)[0]) / (2 * h)
        np.testing.assert_allclose(dW[0, :, j], fd[0], rtol=1e-5, atol=1e-8)


# -- assembled convolution shape functions -----------------------------------


def test_quad_patch_of_sixteen_has_partition_of_unity():
    m = rect_mesh(3, 3, 3.0, 3.0)
    bases = build_patch_bases(m, ConvolutionConfig(s=1, p=1))
    g = np.linspace(-1, 1, 7)
    xi = np.array([[x, y] for x in g for y in g])
    nodes, values, grads, _, _ = element_shapes(m, 4, xi, bases)
    assert nodes.size == 16
    np.testing.assert_allclose(values.sum(axis=1), 1.0, atol=1e-10)
    np.testing.assert_allclose(grads.sum(axis=1), 0.0, atol=1e-9)


def test_identity_kernel_degenerates_to_fe():
    m = distort(rect_mesh(3, 3), 0.2, seed=5)
    bases = build_patch_bases(m, ConvolutionConfig(kernel="identity"))
    rng = np.random.default_rng(2)
    for e in range(m.n_elements):
        xi = rng.uniform(-1, 1, 2)
        conv = chidenn_shape(m, e, xi, bases)
        fe = chidenn_shape(m, e, xi, None)
        np.testing.assert_array_equal(conv.nodes, fe.nodes)
        np.testing.assert_array_equal(conv.values, fe.values)
        np.testing.assert_allclose(conv.derivatives, fe.derivatives, atol=1e-12)


def test_b0_matches_finite_differences_of_shape_values():
    from chidenn.interp import parent_coordinates

    m = distort(rect_mesh(4, 4), 0.2, seed=6)
    bases = build_patch_bases(m, ConvolutionConfig(s=1, p=2))
    e = 5
    x_el = m.nodes[list(m.connectivity[e])]
    sample = chidenn_shape(m, e, [0.2, -0.3], bases)
    h = 1e-6 * 0.25
    for j in range(2):
        vals = []
        for sgn in (1, -1):
            X = sample.point.copy()
            X[j] += sgn * h
            xi = parent_coordinates(ElementKind.QUAD4, x_el, X)
            vals.append(chidenn_shape(m, e, xi, bases).values)
        fd = (vals[0] - vals[1]) / (2 * h)
        scale = np.abs(sample.derivatives[j]).max()
        np.testing.assert_allclose(sample.derivatives[j], fd, rtol=1e-5, atol=1e-5 * scale)


def test_missing_basis_is_reported():
    m = rect_mesh(3, 3)
    bases = build_patch_bases(m, ConvolutionConfig(), nodes=[0, 1])
    with pytest.raises(InterpolationError, match="missing patch basis"):
        chidenn_shape(m, 4, [0.0, 0.0], bases)


def test_boundary_patches_grow_for_quadratic_basis():
    m = rect_mesh(4, 4)
    bases = build_patch_bases(m, ConvolutionConfig(s=1, p=2))
    corner = bases[0]
    assert corner.n >= 6
    assert len(node_patch(m, 0, 1)) == 4


def test_tet_shapes_reproduce_linear_fields():
    m = box_tet_mesh(2, 2, 2)
    bases = build_patch_bases(m, ConvolutionConfig(s=1, p=1))
    xi = np.array([[0.1, 0.2, 0.3], [0.25, 0.25, 0.25]])
    for e in range(0, m.n_elements, 7):
        nodes, values, grads, _, X = element_shapes(m, e, xi, bases)
        np.testing.assert_allclose(values @ m.nodes[nodes], X, atol=1e-10)
        np.testing.assert_allclose(np.einsum("qkj,ki->qij", grads, m.nodes[nodes]), np.broadcast_to(np.eye(3), (2, 3, 3)), atol=1e-9)
