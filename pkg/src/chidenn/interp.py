"""Convolution-enhanced shape functions.

An element's shape functions are the standard FE shape functions of its own
nodes, each multiplied by a meshfree *patch function* built on the node's
patch and evaluated at the material point::

    u(xi) = sum_I N_I(xi) sum_{J in patch(I)} W^I_J(X(xi)) u_J
          = sum_K Ntilde_K(xi) u_K,      K in the element patch.

Two patch-function kernels are provided: Lagrange interpolation on a 1D
stencil of p+1 nodes and radial point interpolation (multiquadric radial
basis augmented with a complete polynomial basis of order p) in any
dimension.  A third, ``identity``, reproduces plain FE shape functions and
exists for degeneracy checks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .mesh import ElementKind, Mesh, MeshError, NodePatch, node_patch

__all__ = [
    "ConvolutionConfig",
    "InterpolationError",
    "PatchTooSmall",
    "SingularMomentMatrix",
    "PatchBasis",
    "ShapeSample",
    "fe_shape",
    "fe_shape_batch",
    "lagrange_conv_patch",
    "rbf_assemble_patch",
    "rbf_conv_patch",
    "build_patch_bases",
    "element_shapes",
    "chidenn_shape",
    "parent_coordinates",
]

KERNELS = ("lagrange1d", "rbf", "identity")


class InterpolationError(ValueError):
    pass


class PatchTooSmall(InterpolationError):
    pass


class SingularMomentMatrix(InterpolationError):
    pass


@dataclass(frozen=True)
class ConvolutionConfig:
    """Patch size ``s``, dilation ``a``, reproducing order ``p`` and kernel."""

    s: int = 1
    a: float = 1.0
    p: int = 1
    kernel: str = "rbf"
    rbf_exponent: float = 1.03

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise InterpolationError(f"unknown kernel {self.kernel!r}; expected one of {KERNELS}")
        if self.s < 1 or self.p < 1:
            raise InterpolationError("patch size s and order p must be >= 1")
        if self.a <= 0:
            raise InterpolationError("dilation a must be positive")

    def n_poly(self, dim: int) -> int:
        """Number of polynomial terms m of a complete order-p basis."""
        return comb(self.p + dim, dim)

    def min_patch_nodes(self, dim: int) -> int:
        if self.kernel == "lagrange1d":
            return self.p + 1
        if self.kernel == "identity":
            return 1
        return self.n_poly(dim)

    def as_dict(self) -> dict:
        return {"kernel": self.kernel, "s": self.s, "a": self.a, "p": self.p, "q": self.rbf_exponent}


# ---------------------------------------------------------------------------
# standard FE shape functions


def fe_shape_batch(kind: ElementKind, xi) -> tuple[np.ndarray, np.ndarray]:
    """FE shape values (npts, nn) and parent derivatives (npts, nn, dim)."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    npts = xi.shape[0]
    if kind is ElementKind.LINE2:
        x = xi[:, 0]
        N = np.column_stack([0.5 * (1 - x), 0.5 * (1 + x)])
        dN = np.broadcast_to(np.array([[-0.5], [0.5]]), (npts, 2, 1)).copy()
    elif kind is ElementKind.QUAD4:
        x, y = xi[:, 0], xi[:, 1]
        sx = np.array([-1.0, 1.0, 1.0, -1.0])
        sy = np.array([-1.0, -1.0, 1.0, 1.0])
        ax = 1 + np.outer(x, sx)
        ay = 1 + np.outer(y, sy)
        N = 0.25 * ax * ay
        dN = np.stack([0.25 * sx * ay, 0.25 * sy * ax], axis=-1)
    elif kind is ElementKind.TET4:
        N = np.column_stack([1 - xi.sum(axis=1), xi[:, 0], xi[:, 1], xi[:, 2]])
        g = np.array([[-1.0, -1.0, -1.0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
        dN = np.broadcast_to(g, (npts, 4, 3)).copy()
    else:  # pragma: no cover
        raise InterpolationError(f"unsupported element kind {kind}")
    return N, dN


def fe_shape(kind: ElementKind, xi) -> tuple[np.ndarray, np.ndarray]:
    """Shape values N_I and parent derivatives dN_I/dxi at one parent point."""
    xi = np.asarray(xi, dtype=float).reshape(kind.dim)
    if not kind.contains(xi):
        raise InterpolationError(f"parent coordinate {xi} outside the {kind.value} domain")
    N, dN = fe_shape_batch(kind, xi[None])
    return N[0], dN[0]


def parent_coordinates(kind: ElementKind, x_nodes: np.ndarray, X, tol=1e-12, max_iter=50) -> np.ndarray:
    """Invert the isoparametric map of one element (Newton)."""
    X = np.asarray(X, dtype=float)
    xi = kind.center.copy()
    for _ in range(max_iter):
        N, dN = fe_shape_batch(kind, xi[None])
        r = N[0] @ x_nodes - X
        if np.linalg.norm(r) <= tol * (1 + np.linalg.norm(X)):
            break
        J = x_nodes.T @ dN[0]
        xi = xi - np.linalg.solve(J, r)
    return xi


# ---------------------------------------------------------------------------
# patch functions


def lagrange_conv_patch(coords, X, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Lagrange patch weights and their material derivatives.

    The polynomials are built on a normalized stencil coordinate ``z``; the
    derivative with respect to X uses the stencil Jacobian
    ``dX/dz = sum_k dW_k/dz X_k``.

    Parameters
    ----------
    coords : array_like, shape (p+1,)
        Stencil node coordinates.
    X : float or array_like, shape (npts,)
        Evaluation points.

    Returns
    -------
    W, dW : ndarray
        Shape (p+1,) each for scalar ``X``, otherwise (npts, p+1).
    """
    coords = np.asarray(coords, dtype=float).ravel()
    if coords.size != p + 1:
        raise InterpolationError(f"order {p} Lagrange stencil needs {p + 1} nodes, got {coords.size}")
    if np.unique(coords).size != coords.size:
        raise InterpolationError("duplicate node coordinates in Lagrange stencil")
    scalar = np.ndim(X) == 0
    X = np.atleast_1d(np.asarray(X, dtype=float))
    origin = coords.mean()
    scale = np.ptp(coords) / p
    z_nodes = (coords - origin) / scale
    z = (X - origin) / scale
    n = coords.size
    W = np.ones((z.size, n))
    dW = np.zeros((z.size, n))
    for k in range(n):
        others = [m for m in range(n) if m != k]
        denom = np.prod(z_nodes[k] - z_nodes[others])
        factors = z[:, None] - z_nodes[others][None, :]
        W[:, k] = np.prod(factors, axis=1) / denom
        for j in range(len(others)):
            dW[:, k] += np.prod(np.delete(factors, j, axis=1), axis=1) / denom
    jac = dW @ coords  # dX/dz reproduced by the stencil
    dW = dW / jac[:, None]
    if scalar:
        return W[0], dW[0]
    return W, dW


def _monomial_exponents(p: int, dim: int) -> np.ndarray:
    exps = [e for deg in range(p + 1) for e in itertools.product(range(deg + 1), repeat=dim) if sum(e) == deg]
    return np.array(exps, dtype=int).reshape(-1, dim)


def _poly(z: np.ndarray, exps: np.ndarray):
    """Monomials (npts, m) and their z-derivatives (npts, m, dim)."""
    npts, dim = z.shape
    P = np.prod(z[:, None, :] ** exps[None, :, :], axis=2)
    dP = np.zeros((npts, len(exps), dim))
    for j in range(dim):
        e = exps[:, j]
        lowered = exps.copy()
        lowered[:, j] = np.maximum(e - 1, 0)
        dP[:, :, j] = e * np.prod(z[:, None, :] ** lowered[None, :, :], axis=2)
    return P, dP


@dataclass(eq=False)
class PatchBasis:
    """Precomputed patch function of one node.

    For the radial kernel this holds the LU factorization of the moment
    matrix ``G = [[R, P], [P^T, 0]]`` assembled in normalized coordinates
    ``z = (X - X_center) / spacing``.
    """

    patch: NodePatch
    kernel: str
    coords: np.ndarray
    origin: np.ndarray
    scale: float
    p: int
    shape_constant: float = 0.0
    exponent: float = 1.0
    exps: np.ndarray | None = None
    coords_z: np.ndarray | None = field(default=None, repr=False)
    lu: tuple | None = field(default=None, repr=False)
    G: np.ndarray | None = field(default=None, repr=False)

    @property
    def members(self) -> tuple[int, ...]:
        return self.patch.members

    @property
    def n(self) -> int:
        return len(self.patch.members)

    @property
    def m(self) -> int:
        return 0 if self.exps is None else len(self.exps)

    def evaluate(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Weights (npts, n) and material derivatives (npts, n, dim) at points X."""
        X = np.asarray(X, dtype=float).reshape(-1, self.coords.shape[1])
        if self.kernel == "identity":
            W = np.zeros((len(X), self.n))
            W[:, self.members.index(self.patch.center)] = 1.0
            return W, np.zeros(W.shape + (self.coords.shape[1],))
        if self.kernel == "lagrange1d":
            W, dW = lagrange_conv_patch(self.coords[:, 0], X[:, 0], self.p)
            return W, dW[:, :, None]
        return rbf_conv_patch(self, X)


def _rbf_terms(basis: PatchBasis, z: np.ndarray):
    diff = z[:, None, :] - basis.coords_z[None, :, :]
    r2 = np.sum(diff * diff, axis=2) + basis.shape_constant**2
    q = basis.exponent
    R = r2**q
    dR = 2.0 * q * (r2 ** (q - 1.0))[:, :, None] * diff
    return R, dR


def rbf_assemble_patch(mesh: Mesh, patch: NodePatch, config: ConvolutionConfig) -> PatchBasis:
    """Assemble and factorize the radial point interpolation moment matrix."""
    dim = mesh.dimension
    exps = _monomial_exponents(config.p, dim)
    n, m = len(patch.members), len(exps)
    if n < m:
        raise PatchTooSmall(
            f"patch of node {mesh.node_ids[patch.center]} has {n} nodes; order {config.p} basis needs {m}"
        )
    coords = mesh.nodes[list(patch.members)]
    origin = mesh.nodes[patch.center]
    scale = patch.spacing
    z = (coords - origin) / scale
    basis = PatchBasis(
        patch=patch,
        kernel="rbf",
        coords=coords,
        origin=origin,
        scale=scale,
        p=config.p,
        shape_constant=config.a,  # c = a * spacing, in normalized units
        exponent=config.rbf_exponent,
        exps=exps,
        coords_z=z,
    )
    R, _ = _rbf_terms(basis, z)
    P, _ = _poly(z, exps)
    if np.linalg.matrix_rank(P, tol=1e-10 * max(1.0, np.abs(P).max())) < m:
        raise SingularMomentMatrix(
            f"patch of node {mesh.node_ids[patch.center]} cannot support an order {config.p} basis"
            " (degenerate node geometry)"
        )
    G = np.block([[R, P], [P.T, np.zeros((m, m))]])
    if np.linalg.cond(G) > 1e14:
        raise SingularMomentMatrix(f"moment matrix of node {mesh.node_ids[patch.center]} is singular")
    basis.G = G
    basis.lu = lu_factor(G)
    return basis


def rbf_conv_patch(basis: PatchBasis, X) -> tuple[np.ndarray, np.ndarray]:
    """Radial point interpolation weights and derivatives at points X.

    Solves ``G w = [R(X); P(X)]``; G is symmetric so ``w^T`` is the row
    vector ``[R^T P^T] G^-1`` whose first n entries are the weights.
    """
    X = np.asarray(X, dtype=float).reshape(-1, basis.coords.shape[1])
    z = (X - basis.origin) / basis.scale
    R, dR = _rbf_terms(basis, z)
    P, dP = _poly(z, basis.exps)
    npts, n = R.shape
    dim = X.shape[1]
    rhs = np.concatenate([R, P], axis=1).T  # (n+m, npts)
    drhs = np.concatenate([dR, dP], axis=1)  # (npts, n+m, dim)
    drhs = drhs.transpose(1, 0, 2).reshape(n + basis.m, npts * dim)
    W = lu_solve(basis.lu, rhs)[:n].T
    dW = lu_solve(basis.lu, drhs)[:n].reshape(n, npts, dim).transpose(1, 0, 2) / basis.scale
    return W, dW


def _lagrange_basis(mesh: Mesh, patch: NodePatch, config: ConvolutionConfig) -> PatchBasis:
    if mesh.dimension != 1:
        raise InterpolationError("the Lagrange kernel is one-dimensional")
    need = config.p + 1
    members = np.array(patch.members)
    if members.size < need:
        raise PatchTooSmall(
            f"patch of node {mesh.node_ids[patch.center]} has {members.size} nodes; order {config.p} needs {need}"
        )
    if members.size > need:
        # nearest p+1 nodes, ties to the lower coordinate
        x = mesh.nodes[members, 0]
        d = np.abs(x - mesh.nodes[patch.center, 0])
        keep = np.lexsort((x, d))[:need]
        members = np.sort(members[keep])
        patch = NodePatch(patch.center, tuple(int(v) for v in members), patch.spacing)
    coords = mesh.nodes[list(patch.members)]
    if np.unique(coords[:, 0]).size != coords.shape[0]:
        raise InterpolationError("duplicate node coordinates in Lagrange stencil")
    return PatchBasis(
        patch=patch, kernel="lagrange1d", coords=coords, origin=mesh.nodes[patch.center],
        scale=patch.spacing, p=config.p,
    )


def _basis_for(mesh: Mesh, patch: NodePatch, config: ConvolutionConfig) -> PatchBasis:
    if config.kernel == "rbf":
        return rbf_assemble_patch(mesh, patch, config)
    if config.kernel == "lagrange1d":
        return _lagrange_basis(mesh, patch, config)
    single = NodePatch(patch.center, (patch.center,), patch.spacing)
    return PatchBasis(
        patch=single, kernel="identity", coords=mesh.nodes[[patch.center]],
        origin=mesh.nodes[patch.center], scale=patch.spacing, p=1,
    )


def build_patch_bases(mesh: Mesh, config: ConvolutionConfig, nodes=None) -> dict[int, PatchBasis]:
    """Patch functions for ``nodes`` (default: all nodes).

    A node whose s-ring patch is too small or geometrically degenerate for
    the requested order (typically a boundary or corner node) gets its patch
    grown ring by ring until the basis is well posed.
    """
    nodes = range(mesh.n_nodes) if nodes is None else nodes
    bases = {}
    for n in nodes:
        n = int(n)
        s = config.s
        previous = None
        while True:
            patch = node_patch(mesh, n, s)
            try:
                bases[n] = _basis_for(mesh, patch, config)
                break
            except (PatchTooSmall, SingularMomentMatrix) as exc:
                if previous is not None and len(patch) == len(previous):
                    raise type(exc)(f"{exc}; the whole connected mesh is too small") from None
                previous = patch
                s += 1
    return bases


# ---------------------------------------------------------------------------
# element shape functions


@dataclass
class ShapeSample:
    """Shape values and material derivatives at one parent point.

    ``derivatives`` has shape (dim, n_patch): row j holds dNtilde_K/dX_j.
    """

    element: int
    xi: np.ndarray
    nodes: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    jacobian_det: float
    point: np.ndarray


def element_shapes(mesh: Mesh, element: int, xi, bases: dict[int, PatchBasis] | None):
    """Shape tables of one element at many parent points.

    Parameters
    ----------
    xi : array_like, shape (npts, dim)
    bases : dict or None
        Patch functions of the element's nodes; ``None`` gives plain FE.

    Returns
    -------
    nodes : (n_patch,) element patch, ascending
    values : (npts, n_patch)
    grads : (npts, n_patch, dim)
    detj : (npts,)
    points : (npts, dim) material coordinates X(xi)
    """
    kind = mesh.kinds[element]
    conn = list(mesh.connectivity[element])
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    N, dN = fe_shape_batch(kind, xi)
    x_e = mesh.nodes[conn]
    J = np.einsum("ia,qib->qab", x_e, dN)
    detj = np.linalg.det(J)
    if np.any(detj <= 0.0):
        raise MeshError(f"inverted element {mesh.element_ids[element]}: non-positive Jacobian")
    dNdX = np.einsum("qib,qba->qia", dN, np.linalg.inv(J))
    X = N @ x_e
    if bases is None:
        order = np.argsort(conn)
        return np.array(conn)[order], N[:, order], dNdX[:, order, :], detj, X
    try:
        node_bases = [bases[n] for n in conn]
    except KeyError as exc:
        raise InterpolationError(f"missing patch basis for node {mesh.node_ids[exc.args[0]]}") from None
    patch = np.array(sorted(set().union(*(b.members for b in node_bases))), dtype=int)
    npts, dim = X.shape
    values = np.zeros((npts, patch.size))
    grads = np.zeros((npts, patch.size, dim))
    for i, b in enumerate(node_bases):
        W, dW = b.evaluate(X)
        pos = np.searchsorted(patch, b.members)
        values[:, pos] += N[:, i, None] * W
        grads[:, pos, :] += dNdX[:, i, None, :] * W[:, :, None] + N[:, i, None, None] * dW
    return patch, values, grads, detj, X


def chidenn_shape(mesh: Mesh, element: int, xi, bases: dict[int, PatchBasis] | None) -> ShapeSample:
    """Convolution shape functions over the element patch at one parent point."""
    kind = mesh.kinds[element]
    xi = np.asarray(xi, dtype=float).reshape(kind.dim)
    if not kind.contains(xi):
        raise InterpolationError(f"parent coordinate {xi} outside the {kind.value} domain")
    nodes, values, grads, detj, X = element_shapes(mesh, element, xi[None], bases)
    return ShapeSample(element, xi, nodes, values[0], grads[0].T.copy(), float(detj[0]), X[0])
