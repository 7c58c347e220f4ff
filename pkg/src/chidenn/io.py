"""Output writers: legacy VTK snapshots, CSV histories and the run record.

Every file carries the resolved run configuration: the CSV in a leading
``# config:`` comment line, the VTK file in its title line (a compact
key=value summary, the format allows 256 characters) and the JSON record in
full.  Floats are written with ``repr`` so identical runs give identical
bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .mesh import ElementKind, Mesh

__all__ = ["VTK_CELL_TYPES", "config_summary", "write_vtk", "CsvHistory", "write_run_record"]

VTK_CELL_TYPES = {ElementKind.LINE2: 3, ElementKind.QUAD4: 9, ElementKind.TET4: 10}
SUMMARY_KEYS = ("kernel", "q", "a", "s", "p", "dt", "quadrature_order", "mode")


def _fmt(x) -> str:
    return repr(float(x))


def config_summary(config: dict, limit: int = 255) -> str:
    """One-line key=value digest of the kernel, time step and quadrature settings."""
    flat = {}

    def walk(d):
        for k, v in d.items():
            if isinstance(v, dict):
                walk(v)
            elif isinstance(v, list) and v and all(isinstance(x, dict) for x in v):
                for x in v:
                    walk(x)
            elif k in SUMMARY_KEYS and k not in flat:
                flat[k] = v

    walk(config)
    text = "chidenn " + " ".join(f"{k}={flat[k]}" for k in SUMMARY_KEYS if k in flat)
    return text[:limit]


def write_vtk(path, mesh: Mesh, config: dict, t: float, displacement, point_fields=None, cell_fields=None) -> Path:
    """Legacy ASCII VTK 3.0 unstructured grid.

    ``displacement`` is per node (flat or (n, dim)); point and cell fields
    are dicts of name -> per-node or per-element scalars.
    """
    path = Path(path)
    n, dim = mesh.n_nodes, mesh.dimension
    pad = np.zeros((n, 3))
    pad[:, :dim] = mesh.nodes
    u = np.zeros((n, 3))
    u[:, :dim] = np.asarray(displacement, dtype=float).reshape(n, dim)
    lines = ["# vtk DataFile Version 3.0", f"{config_summary(config, 240)} t={_fmt(t)}", "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {n} double"]
    lines += [" ".join(_fmt(c) for c in row) for row in pad]
    size = sum(len(c) + 1 for c in mesh.connectivity)
    lines.append(f"CELLS {mesh.n_elements} {size}")
    lines += [" ".join(map(str, (len(c),) + tuple(c))) for c in mesh.connectivity]
    lines.append(f"CELL_TYPES {mesh.n_elements}")
    lines += [str(VTK_CELL_TYPES[k]) for k in mesh.kinds]
    lines += [f"POINT_DATA {n}", "VECTORS displacement double"]
    lines += [" ".join(_fmt(c) for c in row) for row in u]
    for name, vals in (point_fields or {}).items():
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"] + [_fmt(v) for v in np.ravel(vals)]
    if cell_fields:
        lines.append(f"CELL_DATA {mesh.n_elements}")
        for name, vals in cell_fields.items():
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"] + [_fmt(v) for v in np.ravel(vals)]
    path.write_text("\n".join(lines) + "\n")
    return path


class CsvHistory:
    """Per-step history file: config comment, one header row, then data rows.

    Each row is written with a single ``write`` and flushed, so a reader
    never sees a partial row.
    """

    def __init__(self, path, columns, config: dict):
        self.path = Path(path)
        self.columns = ["t"] + list(columns)
        self._fh = self.path.open("w", newline="")
        self._fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        self._fh.write(",".join(self.columns) + "\n")
        self._fh.flush()

    def append(self, t: float, values) -> None:
        values = list(values)
        if len(values) != len(self.columns) - 1:
            raise ValueError(f"expected {len(self.columns) - 1} values, got {len(values)}")
        self._fh.write(",".join(_fmt(v) for v in [t] + values) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_csv(path):
    """(config dict, column names, data array) of a history file."""
    with open(path) as fh:
        first = fh.readline()
        config = json.loads(first[len("# config: "):]) if first.startswith("# config: ") else {}
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return config, header, data


def write_run_record(path, config: dict, extra: dict | None = None) -> Path:
    path = Path(path)
    record = {"config": config}
    if extra:
        record.update(extra)
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return path
