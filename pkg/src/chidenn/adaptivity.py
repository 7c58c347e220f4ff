"""Region-wise enrichment: convolution shape functions on tagged regions only.

Elements of an enriched region use convolution shape functions over their
element patch; all other elements keep plain FE shapes on their own nodes.
Patches of enriched elements are built from the full mesh topology, so they
may reach into the plain region.  Along the interface the field is continuous
at shared nodes but not necessarily along shared edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import ShapeTables, build_shape_tables, default_quadrature_order
from .interp import ConvolutionConfig, InterpolationError, build_patch_bases
from .mesh import Mesh, MeshError

__all__ = ["PLAIN_FE", "EnrichmentMap", "classify_enrichment", "build_bases", "hybrid_shape_tables"]

PLAIN_FE = "plain_fe"


def _mode(value):
    if value is None or value == PLAIN_FE or value == "fem":
        return None
    if isinstance(value, ConvolutionConfig):
        return value
    if isinstance(value, dict):
        return ConvolutionConfig(**value)
    raise ValueError(f"unknown enrichment mode {value!r}")


@dataclass(frozen=True)
class EnrichmentMap:
    """Per element: ``None`` (plain FE) or the ConvolutionConfig in force."""

    modes: tuple

    def __len__(self) -> int:
        return len(self.modes)

    @property
    def configs(self) -> list:
        """Distinct convolution configurations in first-use order."""
        seen = []
        for m in self.modes:
            if m is not None and m not in seen:
                seen.append(m)
        return seen

    def enriched(self, config: ConvolutionConfig | None = None) -> np.ndarray:
        return np.array(
            [e for e, m in enumerate(self.modes) if m is not None and (config is None or m == config)], dtype=int
        )

    def plain(self) -> np.ndarray:
        return np.array([e for e, m in enumerate(self.modes) if m is None], dtype=int)

    def label(self, e: int) -> str:
        return PLAIN_FE if self.modes[e] is None else "chidenn"


def classify_enrichment(mesh: Mesh, regions: dict, default=PLAIN_FE) -> EnrichmentMap:
    """Assign every element the mode of its region tag, else ``default``.

    Modes are ``"plain_fe"`` or a :class:`ConvolutionConfig` (a dict of its
    fields is accepted too).
    """
    known = set(mesh.region_tags.values())
    for tag in regions:
        if tag not in known:
            raise MeshError(f"unknown region tag {tag!r}")
    resolved = {tag: _mode(m) for tag, m in regions.items()}
    default = _mode(default)
    modes = tuple(resolved.get(mesh.region_tags.get(e), default) for e in range(mesh.n_elements))
    return EnrichmentMap(modes)


def build_bases(mesh: Mesh, emap: EnrichmentMap) -> dict:
    """Patch bases per configuration for the nodes of enriched elements."""
    out = {}
    for cfg in emap.configs:
        nodes = sorted({n for e in emap.enriched(cfg) for n in mesh.connectivity[e]})
        out[cfg] = build_patch_bases(mesh, cfg, nodes)
    return out


def hybrid_shape_tables(mesh: Mesh, emap: EnrichmentMap, bases: dict | None = None, extra_order: int = 0,
                        order: int | None = None) -> ShapeTables:
    """Shape tables with plain FE and convolution elements side by side.

    Parameters
    ----------
    bases : dict, optional
        ConvolutionConfig -> {node: PatchBasis}.  Built when omitted.
    extra_order : int
        Added to every element's default quadrature order.
    order : int, optional
        Quadrature order used for all elements instead of the defaults.
    """
    if len(emap) != mesh.n_elements:
        raise ValueError("enrichment map does not match the mesh")
    if bases is None:
        bases = build_bases(mesh, emap)
    element_bases, orders = [], []
    for e, mode in enumerate(emap.modes):
        if mode is None:
            element_bases.append(None)
        else:
            if mode not in bases:
                raise InterpolationError(f"no patch bases for configuration {mode.as_dict()}")
            element_bases.append(bases[mode])
        orders.append(order if order is not None else default_quadrature_order(mode) + extra_order)
    return build_shape_tables(mesh, element_bases, orders)
