"""Derived output fields: stresses and energy density at nodes and cells."""

from __future__ import annotations

import numpy as np

from .assembly import ShapeTables, deformation_gradients, nodal_tables
from .material import NeoHookean, strain_energy, von_mises

__all__ = ["nodal_field", "cell_field", "FIELDS"]

FIELDS = {
    "von_mises": von_mises,
    "energy_density": strain_energy,
}


def _nodal_tables(tables: ShapeTables) -> ShapeTables:
    cached = getattr(tables, "_nodal_tables", None)
    if cached is None:
        cached = nodal_tables(tables)
        tables._nodal_tables = cached
    return cached


def nodal_field(tables: ShapeTables, mat: NeoHookean, d, name: str = "von_mises") -> np.ndarray:
    """Node values averaged over the elements sharing the node.

    Each element contributes the field evaluated at the node's own parent
    coordinates, so smooth convolution fields are sampled exactly rather
    than extrapolated from quadrature points.
    """
    fn = FIELDS[name]
    nt = _nodal_tables(tables)
    mesh = tables.mesh
    u = np.asarray(d, dtype=float).reshape(mesh.n_nodes, mesh.dimension)
    total = np.zeros(mesh.n_nodes)
    count = np.zeros(mesh.n_nodes)
    for b in nt.blocks:
        vals = fn(mat, deformation_gradients(b, u))  # (ne, nn)
        own = np.array([mesh.connectivity[e] for e in b.elements])
        np.add.at(total, own, vals)
        np.add.at(count, own, 1.0)
    return total / np.maximum(count, 1.0)


def cell_field(tables: ShapeTables, mat: NeoHookean, d, name: str = "von_mises") -> np.ndarray:
    """Volume average of a field over each element."""
    fn = FIELDS[name]
    mesh = tables.mesh
    u = np.asarray(d, dtype=float).reshape(mesh.n_nodes, mesh.dimension)
    out = np.zeros(mesh.n_elements)
    for b in tables.blocks:
        vals = fn(mat, deformation_gradients(b, u))
        out[b.elements] = np.sum(vals * b.weights, axis=1) / np.sum(b.weights, axis=1)
    return out
