"""Lagrangian mesh, element kinds and the nodal/element patches built on it.

Nodes and elements are addressed by 0-based internal indices everywhere in
the library.  The external ids read from a mesh file are kept in
``Mesh.node_ids`` / ``Mesh.element_ids`` for output only; nodes are stored in
ascending id order so that index order and id order agree.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

__all__ = [
    "ElementKind",
    "Facet",
    "Mesh",
    "MeshError",
    "NodePatch",
    "parse_mesh",
    "format_mesh",
    "node_patch",
    "node_patch_metric",
    "element_patch",
    "characteristic_spacing",
]


class MeshError(ValueError):
    """Raised for malformed mesh files and invalid mesh topology."""


class ElementKind(enum.Enum):
    LINE2 = "line2"
    QUAD4 = "quad4"
    TET4 = "tet4"

    @property
    def n_nodes(self) -> int:
        return {"line2": 2, "quad4": 4, "tet4": 4}[self.value]

    @property
    def dim(self) -> int:
        return {"line2": 1, "quad4": 2, "tet4": 3}[self.value]

    @property
    def faces(self) -> tuple[tuple[int, ...], ...]:
        """Local node indices of each face, ordered so the normal points outward."""
        return _FACES[self]

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return _EDGES[self]

    @property
    def center(self) -> np.ndarray:
        """Parent coordinates of the element centroid."""
        if self is ElementKind.TET4:
            return np.full(3, 0.25)
        return np.zeros(self.dim)

    @property
    def parent_nodes(self) -> np.ndarray:
        """Parent coordinates of the element's own nodes."""
        return _PARENT_NODES[self]

    def contains(self, xi, tol: float = 1e-12) -> bool:
        xi = np.asarray(xi, dtype=float)
        if self is ElementKind.TET4:
            return bool(np.all(xi >= -tol) and xi.sum() <= 1.0 + tol)
        return bool(np.all(np.abs(xi) <= 1.0 + tol))


_FACES = {
    ElementKind.LINE2: ((0,), (1,)),
    ElementKind.QUAD4: ((0, 1), (1, 2), (2, 3), (3, 0)),
    ElementKind.TET4: ((0, 2, 1), (0, 1, 3), (0, 3, 2), (1, 2, 3)),
}
_EDGES = {
    ElementKind.LINE2: ((0, 1),),
    ElementKind.QUAD4: ((0, 1), (1, 2), (2, 3), (3, 0)),
    ElementKind.TET4: ((0, 1), (1, 2), (2, 0), (0, 3), (1, 3), (2, 3)),
}
_PARENT_NODES = {
    ElementKind.LINE2: np.array([[-1.0], [1.0]]),
    ElementKind.QUAD4: np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]),
    ElementKind.TET4: np.array(
        [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    ),
}


class Facet(NamedTuple):
    element: int
    face: int
    nodes: tuple[int, ...]


@dataclass(frozen=True)
class NodePatch:
    center: int
    members: tuple[int, ...]
    spacing: float

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, node) -> bool:
        return node in self.members


@dataclass(eq=False)
class Mesh:
    """Nodes, elements, boundary facets and region tags of a discretization.

    Parameters
    ----------
    dimension : int
        Spatial dimension (1, 2 or 3).
    nodes : array_like, shape (n_nodes, dimension)
        Material coordinates.
    kinds : sequence of ElementKind
        Kind of every element.
    connectivity : sequence of sequences of int
        Node indices of every element, in the kind's local order.
    facets : sequence of (element, face) pairs, optional
        Boundary facets; node tuples are derived from the owning element.
    region_tags : dict, optional
        Element index -> tag string.
    nodesets, facetsets : dict, optional
        Named groups of node / facet indices.
    node_ids, element_ids : array_like, optional
        External labels, defaulting to the indices themselves.
    """

    dimension: int
    nodes: np.ndarray
    kinds: list
    connectivity: list
    facets: list = field(default_factory=list)
    region_tags: dict = field(default_factory=dict)
    nodesets: dict = field(default_factory=dict)
    facetsets: dict = field(default_factory=dict)
    node_ids: np.ndarray | None = None
    element_ids: np.ndarray | None = None

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, self.dimension)
        self.kinds = [ElementKind(k) for k in self.kinds]
        self.connectivity = [tuple(int(n) for n in c) for c in self.connectivity]
        facets = []
        for f in self.facets:
            e, face = int(f[0]), int(f[1])
            if not 0 <= e < len(self.connectivity):
                raise MeshError(f"facet references unknown element {e}")
            kind = self.kinds[e]
            if not 0 <= face < len(kind.faces):
                raise MeshError(f"element {e} ({kind.value}) has no local face {face}")
            nodes = tuple(self.connectivity[e][i] for i in kind.faces[face])
            facets.append(Facet(e, face, nodes))
        self.facets = facets
        self.region_tags = {int(k): str(v) for k, v in self.region_tags.items()}
        self.nodesets = {k: np.asarray(v, dtype=int) for k, v in self.nodesets.items()}
        self.facetsets = {k: np.asarray(v, dtype=int) for k, v in self.facetsets.items()}
        if self.node_ids is None:
            self.node_ids = np.arange(len(self.nodes))
        if self.element_ids is None:
            self.element_ids = np.arange(len(self.connectivity))
        self.node_ids = np.asarray(self.node_ids, dtype=int)
        self.element_ids = np.asarray(self.element_ids, dtype=int)
        self.validate()

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.connectivity)

    @property
    def ndof(self) -> int:
        return self.dimension * self.n_nodes

    def validate(self):
        if self.dimension not in (1, 2, 3):
            raise MeshError(f"unsupported dimension {self.dimension}")
        n = self.n_nodes
        if len(self.kinds) != len(self.connectivity):
            raise MeshError("element kind and connectivity lists differ in length")
        for e, (kind, conn) in enumerate(zip(self.kinds, self.connectivity)):
            label = self.element_ids[e]
            if kind.dim != self.dimension:
                raise MeshError(
                    f"element {label}: {kind.value} in a {self.dimension}D mesh"
                )
            if len(conn) != kind.n_nodes:
                raise MeshError(
                    f"element {label}: {kind.value} needs {kind.n_nodes} nodes, got {len(conn)}"
                )
            if min(conn) < 0 or max(conn) >= n:
                raise MeshError(f"dangling node reference in element {label}")
            if len(set(conn)) != len(conn):
                raise MeshError(f"duplicate node in element {label}")
            if _center_jacobian_det(kind, self.nodes[list(conn)]) <= 0.0:
                raise MeshError(f"inverted element {label}")
        for name, members in self.nodesets.items():
            if members.size and (members.min() < 0 or members.max() >= n):
                raise MeshError(f"dangling node reference in nodeset {name!r}")
        for name, members in self.facetsets.items():
            if members.size and (members.min() < 0 or members.max() >= len(self.facets)):
                raise MeshError(f"facetset {name!r} references an unknown facet")
        for e in self.region_tags:
            if not 0 <= e < self.n_elements:
                raise MeshError(f"region tag on unknown element {e}")

    @cached_property
    def node_elements(self) -> list[tuple[int, ...]]:
        """Elements incident to each node."""
        incident = [[] for _ in range(self.n_nodes)]
        for e, conn in enumerate(self.connectivity):
            for n in conn:
                incident[n].append(e)
        return [tuple(x) for x in incident]

    @cached_property
    def node_neighbors(self) -> list[tuple[int, ...]]:
        """Edge-connected neighbors of each node."""
        nbrs = [set() for _ in range(self.n_nodes)]
        for kind, conn in zip(self.kinds, self.connectivity):
            for a, b in kind.edges:
                nbrs[conn[a]].add(conn[b])
                nbrs[conn[b]].add(conn[a])
        return [tuple(sorted(s)) for s in nbrs]

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        """Nodes lying on faces owned by exactly one element."""
        count = {}
        for kind, conn in zip(self.kinds, self.connectivity):
            for face in kind.faces:
                key = tuple(sorted(conn[i] for i in face))
                count[key] = count.get(key, 0) + 1
        nodes = {n for key, c in count.items() if c == 1 for n in key}
        return np.array(sorted(nodes), dtype=int)

    def index_of(self, node_id: int) -> int:
        hits = np.flatnonzero(self.node_ids == node_id)
        if hits.size == 0:
            raise MeshError(f"unknown node id {node_id}")
        return int(hits[0])

    def nearest_node(self, point) -> int:
        point = np.asarray(point, dtype=float)
        return int(np.argmin(np.linalg.norm(self.nodes - point, axis=1)))

    def element_volume(self, e: int) -> float:
        kind = self.kinds[e]
        x = self.nodes[list(self.connectivity[e])]
        if kind is ElementKind.LINE2:
            return float(x[1, 0] - x[0, 0])
        if kind is ElementKind.TET4:
            return float(np.linalg.det((x[1:] - x[0]).T) / 6.0)
        xs, ys = x[:, 0], x[:, 1]
        return float(0.5 * (np.dot(xs, np.roll(ys, -1)) - np.dot(ys, np.roll(xs, -1))))

    def volume(self) -> float:
        return sum(self.element_volume(e) for e in range(self.n_elements))

    def elements_tagged(self, tag: str) -> np.ndarray:
        return np.array(sorted(e for e, t in self.region_tags.items() if t == tag), dtype=int)

    def facet_nodes(self, facet_indices) -> np.ndarray:
        nodes = {n for f in facet_indices for n in self.facets[int(f)].nodes}
        return np.array(sorted(nodes), dtype=int)


def _center_jacobian_det(kind: ElementKind, x: np.ndarray) -> float:
    if kind is ElementKind.LINE2:
        return 0.5 * (x[1, 0] - x[0, 0])
    if kind is ElementKind.TET4:
        return float(np.linalg.det((x[1:] - x[0]).T))
    # bilinear map at xi = eta = 0
    dx_dxi = 0.25 * (-x[0] + x[1] + x[2] - x[3])
    dx_deta = 0.25 * (-x[0] - x[1] + x[2] + x[3])
    return float(dx_dxi[0] * dx_deta[1] - dx_dxi[1] * dx_deta[0])


# ---------------------------------------------------------------------------
# patches


def node_patch(mesh: Mesh, node: int, s: int) -> NodePatch:
    """Nodes within ``s`` element rings of ``node``.

    Ring 0 is the node itself; ring k+1 adds every node of every element
    touching ring k.  On uniform structured grids this coincides with the
    metric patch of :func:`node_patch_metric`.  Boundary nodes get smaller,
    one-sided patches.
    """
    if s < 1:
        raise ValueError("patch size s must be >= 1")
    if not 0 <= node < mesh.n_nodes:
        raise MeshError(f"unknown node index {node}")
    members = {node}
    frontier = {node}
    for _ in range(s):
        grown = set()
        for n in frontier:
            for e in mesh.node_elements[n]:
                grown.update(mesh.connectivity[e])
        frontier = grown - members
        members |= grown
        if not frontier:
            break
    return NodePatch(node, tuple(sorted(members)), characteristic_spacing(mesh, node))


def node_patch_metric(mesh: Mesh, node: int, s: int, spacing: float | None = None) -> NodePatch:
    """Nodes whose every coordinate lies within ``s * spacing`` of ``node``.

    Only meaningful on uniform grids, where ``spacing`` is the grid step.
    """
    if spacing is None:
        spacing = characteristic_spacing(mesh, node)
    dist = np.max(np.abs(mesh.nodes - mesh.nodes[node]), axis=1)
    members = np.flatnonzero(dist <= s * spacing * (1.0 + 1e-9))
    return NodePatch(node, tuple(int(m) for m in members), spacing)


def element_patch(mesh: Mesh, element: int, s: int) -> np.ndarray:
    """Union of the node patches of an element's own nodes, ascending."""
    members = set()
    for n in mesh.connectivity[element]:
        members.update(node_patch(mesh, n, s).members)
    return np.array(sorted(members), dtype=int)


def characteristic_spacing(mesh: Mesh, node: int) -> float:
    """Mean distance from ``node`` to its edge-connected neighbors."""
    nbrs = mesh.node_neighbors[node]
    if not nbrs:
        raise MeshError(f"isolated node {mesh.node_ids[node]}")
    return float(np.mean(np.linalg.norm(mesh.nodes[list(nbrs)] - mesh.nodes[node], axis=1)))


# ---------------------------------------------------------------------------
# text format
#
#   dimension <d>
#   nodes <n>
#   <id> <x> [<y> [<z>]]            (n lines)
#   elements <n>
#   <id> <kind> <node ids...> [<tag>]
#   facets <n>
#   <id> <element id> <local face>
#   nodeset <name> <n>
#   <node ids, whitespace separated, any line breaks>
#   facetset <name> <n>
#   <facet ids ...>
#
# '#' starts a comment.  Sections after 'nodes' may come in any order.


def _tokens(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def parse_mesh(text: str) -> Mesh:
    """Parse the mesh text format into a validated :class:`Mesh`."""
    lines = list(_tokens(text))
    pos = 0

    def fail(msg, lineno=None):
        where = f"line {lineno}: " if lineno is not None else ""
        raise MeshError(f"malformed mesh file: {where}{msg}")

    def take_count(parts, lineno, n_fields):
        if len(parts) != n_fields:
            fail(f"expected {n_fields} fields in section header", lineno)
        try:
            return int(parts[-1])
        except ValueError:
            fail(f"bad count {parts[-1]!r}", lineno)

    def take_ints(count, lineno):
        nonlocal pos
        out = []
        while len(out) < count:
            if pos >= len(lines):
                fail("unexpected end of file inside id list", lineno)
            ln, parts = lines[pos]
            try:
                out.extend(int(p) for p in parts)
            except ValueError:
                fail("non-integer id", ln)
            pos += 1
        if len(out) != count:
            fail(f"expected {count} ids, got {len(out)}", lineno)
        return out

    dimension = None
    node_rows, elem_rows, facet_rows = [], [], []
    nodesets, facetsets = {}, {}
    while pos < len(lines):
        lineno, parts = lines[pos]
        pos += 1
        key = parts[0].lower()
        if key == "dimension":
            if len(parts) != 2 or parts[1] not in ("1", "2", "3"):
                fail("dimension must be 1, 2 or 3", lineno)
            dimension = int(parts[1])
        elif key == "nodes":
            if dimension is None:
                fail("'dimension' must precede 'nodes'", lineno)
            count = take_count(parts, lineno, 2)
            for _ in range(count):
                if pos >= len(lines):
                    fail("unexpected end of file in nodes", lineno)
                ln, row = lines[pos]
                pos += 1
                if len(row) != 1 + dimension:
                    fail(f"node needs an id and {dimension} coordinates", ln)
                try:
                    node_rows.append((int(row[0]), [float(v) for v in row[1:]]))
                except ValueError:
                    fail("bad node record", ln)
        elif key == "elements":
            count = take_count(parts, lineno, 2)
            for _ in range(count):
                if pos >= len(lines):
                    fail("unexpected end of file in elements", lineno)
                ln, row = lines[pos]
                pos += 1
                if len(row) < 3:
                    fail("element needs an id, a kind and nodes", ln)
                try:
                    kind = ElementKind(row[1].lower())
                except ValueError:
                    fail(f"unknown element kind {row[1]!r}", ln)
                body = row[2:]
                tag = None
                if len(body) == kind.n_nodes + 1:
                    tag = body.pop()
                if len(body) != kind.n_nodes:
                    fail(f"{kind.value} needs {kind.n_nodes} node ids", ln)
                try:
                    elem_rows.append((int(row[0]), kind, [int(v) for v in body], tag, ln))
                except ValueError:
                    fail("bad element record", ln)
        elif key == "facets":
            count = take_count(parts, lineno, 2)
            for _ in range(count):
                if pos >= len(lines):
                    fail("unexpected end of file in facets", lineno)
                ln, row = lines[pos]
                pos += 1
                if len(row) != 3:
                    fail("facet needs an id, an element id and a local face", ln)
                try:
                    facet_rows.append(tuple(int(v) for v in row))
                except ValueError:
                    fail("bad facet record", ln)
        elif key in ("nodeset", "facetset"):
            count = take_count(parts, lineno, 3)
            ids = take_ints(count, lineno)
            (nodesets if key == "nodeset" else facetsets)[parts[1]] = ids
        else:
            fail(f"unknown section {parts[0]!r}", lineno)

    if dimension is None:
        fail("missing 'dimension'")
    if not node_rows:
        fail("no nodes")
    node_rows.sort(key=lambda r: r[0])
    node_ids = [r[0] for r in node_rows]
    if len(set(node_ids)) != len(node_ids):
        fail("duplicate node id")
    node_index = {nid: i for i, nid in enumerate(node_ids)}
    coords = np.array([r[1] for r in node_rows])

    element_ids, kinds, conn, tags = [], [], [], {}
    for e, (eid, kind, nids, tag, ln) in enumerate(elem_rows):
        try:
            conn.append([node_index[n] for n in nids])
        except KeyError as exc:
            raise MeshError(
                f"dangling node reference: element {eid} (line {ln}) uses node {exc.args[0]}"
            ) from None
        element_ids.append(eid)
        kinds.append(kind)
        if tag is not None:
            tags[e] = tag
    if len(set(element_ids)) != len(element_ids):
        fail("duplicate element id")
    elem_index = {eid: i for i, eid in enumerate(element_ids)}
    facet_index = {}
    facets = []
    for i, (fid, eid, face) in enumerate(facet_rows):
        if eid not in elem_index:
            fail(f"facet {fid} references unknown element {eid}")
        facet_index[fid] = i
        facets.append((elem_index[eid], face))

    def map_ids(ids, index, what, name):
        try:
            return [index[i] for i in ids]
        except KeyError as exc:
            raise MeshError(
                f"dangling node reference: {what} {name!r} uses id {exc.args[0]}"
                if what == "nodeset"
                else f"facetset {name!r} references unknown facet {exc.args[0]}"
            ) from None

    return Mesh(
        dimension=dimension,
        nodes=coords,
        kinds=kinds,
        connectivity=conn,
        facets=facets,
        region_tags=tags,
        nodesets={k: map_ids(v, node_index, "nodeset", k) for k, v in nodesets.items()},
        facetsets={k: map_ids(v, facet_index, "facetset", k) for k, v in facetsets.items()},
        node_ids=node_ids,
        element_ids=element_ids,
    )


def format_mesh(mesh: Mesh) -> str:
    """Inverse of :func:`parse_mesh` (facet ids are written 0-based)."""
    out = [f"dimension {mesh.dimension}", f"nodes {mesh.n_nodes}"]
    for nid, x in zip(mesh.node_ids, mesh.nodes):
        out.append(f"{nid} " + " ".join(repr(float(v)) for v in x))
    out.append(f"elements {mesh.n_elements}")
    for e, (kind, conn) in enumerate(zip(mesh.kinds, mesh.connectivity)):
        row = [str(mesh.element_ids[e]), kind.value] + [str(mesh.node_ids[n]) for n in conn]
        if e in mesh.region_tags:
            row.append(mesh.region_tags[e])
        out.append(" ".join(row))
    if mesh.facets:
        out.append(f"facets {len(mesh.facets)}")
        for i, f in enumerate(mesh.facets):
            out.append(f"{i} {mesh.element_ids[f.element]} {f.face}")
    for name, members in mesh.nodesets.items():
        out.append(f"nodeset {name} {len(members)}")
        ids = [str(mesh.node_ids[n]) for n in members]
        out.extend(" ".join(ids[i : i + 16]) for i in range(0, len(ids), 16))
    for name, members in mesh.facetsets.items():
        out.append(f"facetset {name} {len(members)}")
        ids = [str(int(f)) for f in members]
        out.extend(" ".join(ids[i : i + 16]) for i in range(0, len(ids), 16))
    return "\n".join(out) + "\n"
