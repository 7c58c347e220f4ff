"""Small structured mesh generators used by tests, scenarios and studies."""

from __future__ import annotations

import itertools

import numpy as np

from .mesh import ElementKind, Mesh

__all__ = [
    "line_mesh",
    "rect_mesh",
    "box_tet_mesh",
    "distort",
    "notched_plate",
    "refine_quads",
]


def _boundary_facets(kinds, conn):
    seen = {}
    for e, (kind, c) in enumerate(zip(kinds, conn)):
        for f, face in enumerate(kind.faces):
            key = tuple(sorted(c[i] for i in face))
            seen.setdefault(key, []).append((e, f))
    return sorted(v[0] for v in seen.values() if len(v) == 1)


def _classify(nodes, kinds, conn, facets, predicates):
    """Group boundary facets by the first predicate their centroid satisfies."""
    sets = {name: [] for name in predicates}
    for i, (e, f) in enumerate(facets):
        centroid = nodes[[conn[e][j] for j in kinds[e].faces[f]]].mean(axis=0)
        for name, pred in predicates.items():
            if pred(centroid):
                sets[name].append(i)
                break
    return sets


def _assemble(nodes, kinds, conn, predicates, tags=None, extra_nodesets=None):
    facets = _boundary_facets(kinds, conn)
    fsets = _classify(nodes, kinds, conn, facets, predicates)
    nsets = {}
    for name, members in fsets.items():
        nsets[name] = sorted({conn[facets[i][0]][j] for i in members
                              for j in kinds[facets[i][0]].faces[facets[i][1]]})
    if extra_nodesets:
        nsets.update(extra_nodesets)
    return Mesh(
        dimension=nodes.shape[1],
        nodes=nodes,
        kinds=kinds,
        connectivity=conn,
        facets=facets,
        region_tags=tags or {},
        nodesets=nsets,
        facetsets=fsets,
    )


def line_mesh(n_elements: int, length: float = 1.0, x0: float = 0.0) -> Mesh:
    """Uniform line2 mesh with ``left``/``right`` end sets."""
    x = x0 + np.linspace(0.0, length, n_elements + 1)[:, None]
    conn = [(i, i + 1) for i in range(n_elements)]
    kinds = [ElementKind.LINE2] * n_elements
    tol = 1e-9 * length
    return _assemble(
        x, kinds, conn,
        {"left": lambda c: abs(c[0] - x0) < tol, "right": lambda c: abs(c[0] - x0 - length) < tol},
    )


def rect_mesh(nx: int, ny: int, lx: float = 1.0, ly: float = 1.0, origin=(0.0, 0.0)) -> Mesh:
    """Structured quad4 grid; node index = j * (nx + 1) + i.

    Facet and node sets ``bottom``, ``right``, ``top``, ``left``.
    """
    xs = origin[0] + np.linspace(0.0, lx, nx + 1)
    ys = origin[1] + np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    conn = []
    for j in range(ny):
        for i in range(nx):
            n0 = j * (nx + 1) + i
            conn.append((n0, n0 + 1, n0 + nx + 2, n0 + nx + 1))
    kinds = [ElementKind.QUAD4] * len(conn)
    tol = 1e-9 * max(lx, ly)
    x0, y0 = origin
    return _assemble(
        nodes, kinds, conn,
        {
            "bottom": lambda c: abs(c[1] - y0) < tol,
            "right": lambda c: abs(c[0] - x0 - lx) < tol,
            "top": lambda c: abs(c[1] - y0 - ly) < tol,
            "left": lambda c: abs(c[0] - x0) < tol,
        },
    )


def box_tet_mesh(nx: int, ny: int, nz: int, lx=1.0, ly=1.0, lz=1.0) -> Mesh:
    """Structured box of tet4 elements, six per hexahedral cell.

    Facet and node sets ``xmin``, ``xmax``, ``ymin``, ``ymax``, ``zmin``, ``zmax``.
    """
    xs, ys, zs = (np.linspace(0.0, L, n + 1) for L, n in ((lx, nx), (ly, ny), (lz, nz)))
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def idx(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    conn = []
    for i, j, k in itertools.product(range(nx), range(ny), range(nz)):
        base = np.array([i, j, k])
        for perm in itertools.permutations(range(3)):
            corner = base.copy()
            tet = [idx(*corner)]
            for axis in perm:
                corner[axis] += 1
                tet.append(idx(*corner))
            x = nodes[tet]
            if np.linalg.det((x[1:] - x[0]).T) < 0:
                tet[1], tet[2] = tet[2], tet[1]
            conn.append(tuple(tet))
    kinds = [ElementKind.TET4] * len(conn)
    tol = 1e-9 * max(lx, ly, lz)
    preds = {}
    for axis, name, L in ((0, "x", lx), (1, "y", ly), (2, "z", lz)):
        preds[name + "min"] = lambda c, a=axis: abs(c[a]) < tol
        preds[name + "max"] = lambda c, a=axis, L=L: abs(c[a] - L) < tol
    return _assemble(nodes, kinds, conn, preds)


def distort(mesh: Mesh, amount: float, seed: int = 0) -> Mesh:
    """Randomly perturb interior nodes by up to ``amount`` times the local spacing.

    Boundary nodes stay fixed, so straight edges remain straight.  Raises
    ``MeshError`` if the perturbation inverts an element.
    """
    from .mesh import characteristic_spacing

    rng = np.random.default_rng(seed)
    nodes = mesh.nodes.copy()
    boundary = set(mesh.boundary_nodes.tolist())
    for n in range(mesh.n_nodes):
        if n in boundary:
            continue
        h = characteristic_spacing(mesh, n)
        nodes[n] += amount * h * rng.uniform(-1.0, 1.0, mesh.dimension)
    return Mesh(
        dimension=mesh.dimension,
        nodes=nodes,
        kinds=mesh.kinds,
        connectivity=mesh.connectivity,
        facets=[(f.element, f.face) for f in mesh.facets],
        region_tags=mesh.region_tags,
        nodesets=mesh.nodesets,
        facetsets=mesh.facetsets,
    )


def _merge(points_list, quads_list):
    """Merge structured blocks that share coincident nodes."""
    pts = np.vstack(points_list)
    offsets = np.cumsum([0] + [len(p) for p in points_list])
    key = np.round(pts / 1e-9).astype(np.int64)
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    # keep the first-seen order so numbering follows block generation order
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    nodes = pts[first[order]]
    conn = []
    for off, quads in zip(offsets, quads_list):
        for q in quads:
            c = [int(rank[inverse[off + v]]) for v in q]
            x = nodes[c]
            area = 0.5 * (np.dot(x[:, 0], np.roll(x[:, 1], -1)) - np.dot(x[:, 1], np.roll(x[:, 0], -1)))
            if area < 0:
                c = c[::-1]
            conn.append(tuple(c))
    return nodes, conn


def _grid_quads(nu, nv):
    quads = []
    for j in range(nv):
        for i in range(nu):
            n0 = j * (nu + 1) + i
            quads.append((n0, n0 + 1, n0 + nu + 2, n0 + nu + 1))
    return quads


def notched_plate(
    width: float = 1.0,
    height: float = 0.3,
    radius: float = 0.1,
    n_arc: int = 4,
    n_radial: int = 8,
    n_x: int = 20,
    growth: float = 1.08,
    region_radius: float | None = None,
    refinement: int = 1,
) -> Mesh:
    """Plate with a semicircular edge notch centred on its left side.

    The notch centre is ``(0, height/2)``.  A square block of side
    ``height/2`` on either side of the notch is meshed with radial lines from
    the arc to the block edges (``n_arc`` elements per eighth of the arc,
    ``n_radial`` through the thickness); the remainder of the plate is a graded
    rectangular block with ``n_x`` columns.

    Sets: facets/nodes ``bottom``, ``top``, ``left``, ``right``, ``notch``;
    nodeset ``notch_tip`` (the deepest point of the notch).  Elements whose
    centroid lies within ``region_radius`` (default: the square blocks) of the
    notch centre are tagged ``notch``.

    ``refinement`` multiplies all element counts, keeping the grading, to
    give reference meshes of the exact circular geometry (the nested
    :func:`refine_quads` keeps the coarse polygonal notch instead).
    """
    if refinement < 1:
        raise ValueError("refinement must be >= 1")
    n_arc, n_radial, n_x = n_arc * refinement, n_radial * refinement, n_x * refinement
    growth = growth ** (1.0 / refinement)
    a = 0.5 * height
    if not radius < a:
        raise ValueError("notch radius must be smaller than half the plate height")
    c = np.array([0.0, a])
    blocks, quads = [], []
    t = np.linspace(0.0, 1.0, n_arc + 1)
    rho = np.linspace(0.0, 1.0, n_radial + 1)
    for sign in (1.0, -1.0):
        # eighth 1: arc angle 0..45 deg -> block right edge
        th = sign * t * np.pi / 4
        arc = c + radius * np.column_stack([np.cos(th), np.sin(th)])
        outer = np.column_stack([np.full_like(t, a), a + sign * t * a])
        blocks.append(_radial_block(arc, outer, rho))
        quads.append(_grid_quads(n_arc, n_radial))
        # eighth 2: 45..90 deg -> block top/bottom edge
        th = sign * (np.pi / 4 + t * np.pi / 4)
        arc = c + radius * np.column_stack([np.cos(th), np.sin(th)])
        outer = np.column_stack([a * (1 - t), np.full_like(t, a + sign * a)])
        blocks.append(_radial_block(arc, outer, rho))
        quads.append(_grid_quads(n_arc, n_radial))
    # graded rectangular remainder
    steps = growth ** np.arange(n_x)
    xs = a + (width - a) * np.concatenate([[0.0], np.cumsum(steps) / steps.sum()])
    ys = np.linspace(0.0, height, 4 * n_arc + 1)
    X, Y = np.meshgrid(xs, ys)
    blocks.append(np.column_stack([X.ravel(), Y.ravel()]))
    quads.append(_grid_quads(n_x, 4 * n_arc))
    nodes, conn = _merge(blocks, quads)

    kinds = [ElementKind.QUAD4] * len(conn)
    tol = 1e-9
    region_radius = a * np.sqrt(2.0) * 1.0001 if region_radius is None else region_radius
    tags = {}
    for e, q in enumerate(conn):
        if np.linalg.norm(nodes[list(q)].mean(axis=0) - c) <= region_radius and nodes[list(q)][:, 0].max() <= a + tol:
            tags[e] = "notch"
    tip = int(np.argmin(np.linalg.norm(nodes - (c + [radius, 0.0]), axis=1)))
    return _assemble(
        nodes, kinds, conn,
        {
            "bottom": lambda p: abs(p[1]) < tol,
            "top": lambda p: abs(p[1] - height) < tol,
            "right": lambda p: abs(p[0] - width) < tol,
            "left": lambda p: abs(p[0]) < tol,
            "notch": lambda p: True,
        },
        tags=tags,
        extra_nodesets={"notch_tip": [tip]},
    )


def _radial_block(arc, outer, rho):
    # rows: radial layers from arc (rho=0) to outer edge (rho=1)
    return np.vstack([arc + r * (outer - arc) for r in rho])


def refine_quads(mesh: Mesh, n: int) -> Mesh:
    """Split every quad4 into n x n quads through its bilinear map.

    The refined mesh is nested: coarse nodes, facet sets, node sets and region
    tags carry over (node sets keep only the coarse nodes plus new nodes on
    tagged facets for facet-derived sets).
    """
    if any(k is not ElementKind.QUAD4 for k in mesh.kinds):
        raise ValueError("refine_quads needs an all-quad4 mesh")
    u = np.linspace(-1.0, 1.0, n + 1)
    blocks, quads, parent = [], [], []
    for e, conn in enumerate(mesh.connectivity):
        x = mesh.nodes[list(conn)]
        U, V = np.meshgrid(u, u)
        U, V = U.ravel(), V.ravel()
        N = 0.25 * np.column_stack([(1 - U) * (1 - V), (1 + U) * (1 - V), (1 + U) * (1 + V), (1 - U) * (1 + V)])
        blocks.append(N @ x)
        quads.append(_grid_quads(n, n))
        parent.extend([e] * n * n)
    nodes, conn = _merge(blocks, quads)
    kinds = [ElementKind.QUAD4] * len(conn)
    tags = {i: mesh.region_tags[p] for i, p in enumerate(parent) if p in mesh.region_tags}

    # facet sets: a fine boundary facet inherits the set of the coarse facet it lies on
    coarse_segments = {}
    for name, members in mesh.facetsets.items():
        for f in members:
            a_, b_ = mesh.nodes[list(mesh.facets[int(f)].nodes)]
            coarse_segments.setdefault(name, []).append((a_, b_))

    def on_set(name):
        segs = coarse_segments.get(name, [])

        def pred(p):
            for a_, b_ in segs:
                d = b_ - a_
                s = np.dot(p - a_, d) / np.dot(d, d)
                if -1e-9 <= s <= 1 + 1e-9 and np.linalg.norm(a_ + s * d - p) < 1e-9 * (1 + np.linalg.norm(d)):
                    return True
            return False

        return pred

    extra = {}
    for name, members in mesh.nodesets.items():
        if name not in mesh.facetsets:
            extra[name] = [int(np.argmin(np.linalg.norm(nodes - mesh.nodes[m], axis=1))) for m in members]
    return _assemble(
        nodes, kinds, conn, {name: on_set(name) for name in mesh.facetsets}, tags=tags, extra_nodesets=extra
    )
