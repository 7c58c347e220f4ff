"""Scenario configuration files and the scenario runner.

A scenario is a YAML mapping::

    mesh: plate.mesh                # text mesh path, relative to the file;
                                    # or {path: plate.mesh, refine: 4} to split
                                    # every quad 4 x 4, or {generator: rect, ...}
    material: {C10: 1.0, D1: 0.5, rho0: 1.0}      # or {mu0, K0, rho0}
    convolution: {s: 2, a: 1.0, p: 2}              # defaults for "chidenn"
    enrichment: {default: plain_fe, regions: {notch: chidenn}}
    loads:
      essential:
        - {nodes: bottom, direction: 0}
        - {nodes: top, direction: 1, history: [[0, 0], [0.06, 0.02]]}
      tractions:
        - {facetset: right, vector: [1.0, 0.0], history: [[0, 0], [1, 1]]}
      body_force: {vector: [0.0, -9.81]}
    solver: {dt: 1e-4, t_end: 0.06, mode: explicit_cd, mass: auto}
    output:
      directory: out
      snapshot_interval: 100
      monitored:
        - {at: [0.1, 0.15], quantities: [u_x, u_y, von_mises]}

``enrichment`` values are ``plain_fe``, ``chidenn`` (the ``convolution``
block) or an inline convolution mapping.  Monitored nodes are given by
``node`` (mesh node id), ``nodeset`` (its first node) or ``at`` (nearest
node, recorded in the run record).  Validation errors name the offending
key and its line in the file.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .adaptivity import EnrichmentMap, build_bases, classify_enrichment, hybrid_shape_tables
from .assembly import NegativeLumpedMass, default_quadrature_order
from .dynamics import (
    BodyForce,
    Curve,
    EssentialBC,
    LoadCase,
    LoadError,
    SolverConfig,
    Traction,
    build_system,
    cd_step,
    energy_report,
    increment_step,
    initial_state,
    stable_time_step,
)
from .fields import cell_field, nodal_field
from .interp import ConvolutionConfig
from .io import CsvHistory, write_run_record, write_vtk
from .material import NeoHookean, from_moduli
from .mesh import Mesh, MeshError, parse_mesh
from .meshgen import box_tet_mesh, line_mesh, notched_plate, rect_mesh, refine_quads

__all__ = ["ConfigError", "Scenario", "load_scenario", "bundled_scenario", "run_scenario", "RunResult"]

GENERATORS = {"notched_plate": notched_plate, "rect": rect_mesh, "line": line_mesh, "box_tet": box_tet_mesh}
QUANTITIES = ("u_x", "u_y", "u_z", "v_x", "v_y", "v_z", "von_mises", "energy_density")
BUNDLED = Path(__file__).parent / "scenarios"


class ConfigError(ValueError):
    """Invalid scenario configuration (exit status 1)."""


class _Lines:
    """Key path -> line number lookup built from the YAML node tree."""

    def __init__(self, text: str, source: str):
        self.source = source
        try:
            self.root = yaml.compose(text, Loader=yaml.SafeLoader)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{source}: {exc}") from None

    def line(self, path) -> int | None:
        node = self.root
        best = None
        for key in path:
            if node is None:
                break
            best = node.start_mark.line + 1
            if isinstance(node, yaml.MappingNode):
                nxt = None
                for k, v in node.value:
                    if k.value == str(key):
                        nxt, best = v, k.start_mark.line + 1
                        break
                node = nxt
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
                node = node.value[key]
            else:
                node = None
        if node is not None:
            best = node.start_mark.line + 1
        return best

    def error(self, path, msg) -> ConfigError:
        line = self.line(path)
        where = ".".join(str(p) for p in path)
        loc = f"{self.source}:{line}" if line else self.source
        return ConfigError(f"{loc}: {where}: {msg}" if where else f"{loc}: {msg}")


@dataclass
class Monitor:
    node: int
    quantities: tuple
    label: str
    note: str = ""


@dataclass
class Scenario:
    """Resolved scenario: every reference checked against the mesh."""

    name: str
    source: str
    mesh: Mesh
    mesh_origin: str
    material: NeoHookean
    enrichment: EnrichmentMap
    loads: LoadCase
    solver: SolverConfig
    mass: str
    monitors: list
    output_dir: Path
    snapshot_interval: int
    resolved: dict = field(default_factory=dict)


def _get(d: dict, key, lines: _Lines, path, kind=None, default=...):
    if key not in d:
        if default is ...:
            raise lines.error(path, f"missing required key {key!r}")
        return default
    value = d[key]
    if kind is not None and not isinstance(value, kind):
        raise lines.error(path + [key], f"expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}")
    return value


def _number(value, lines, path) -> float:
    if isinstance(value, str):
        try:
            value = float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise lines.error(path, f"expected a finite number, got {value!r}")
    return float(value)


def _curve(value, lines, path) -> Curve:
    if value is None:
        return Curve.constant(1.0)
    try:
        if isinstance(value, (int, float, str)) and not isinstance(value, bool):
            return Curve.constant(_number(value, lines, path))
        pts = [[_number(x, lines, path) for x in p] for p in value]
        if any(len(p) != 2 for p in pts):
            raise ConfigError("history entries must be [t, value] pairs")
        return Curve.from_points(pts)
    except (ConfigError, LoadError, TypeError) as exc:
        raise lines.error(path, str(exc).split(": ")[-1]) from None


def _load_mesh(spec, base: Path, lines) -> tuple[Mesh, str]:
    refine = 1
    if isinstance(spec, dict) and "refine" in spec:
        spec = dict(spec)
        refine = spec.pop("refine")
        if isinstance(refine, bool) or not isinstance(refine, int) or refine < 1:
            raise lines.error(["mesh", "refine"], "expected a positive integer")
        if set(spec) == {"path"}:
            spec = spec["path"]
    mesh, origin = _read_mesh(spec, base, lines)
    if refine > 1:
        try:
            mesh = refine_quads(mesh, refine)
        except ValueError as exc:
            raise lines.error(["mesh", "refine"], str(exc)) from None
        origin += f", each element split {refine} x {refine}"
    return mesh, origin


def _read_mesh(spec, base: Path, lines) -> tuple[Mesh, str]:
    if isinstance(spec, dict) and set(spec) == {"path"}:
        spec = spec["path"]
    if isinstance(spec, str):
        path = (base / spec).resolve()
        if not path.is_file():
            raise lines.error(["mesh"], f"mesh file not found: {path}")
        try:
            return parse_mesh(path.read_text()), str(path)
        except MeshError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if isinstance(spec, dict) and "generator" in spec:
        gen = spec["generator"]
        if gen not in GENERATORS:
            raise lines.error(["mesh", "generator"], f"unknown generator {gen!r}; choose from {sorted(GENERATORS)}")
        args = {k: v for k, v in spec.items() if k != "generator"}
        try:
            return GENERATORS[gen](**args), f"generator {gen} {args}"
        except TypeError as exc:
            raise lines.error(["mesh"], str(exc)) from None
    raise lines.error(["mesh"], "expected a mesh file path, {path: ...} or a {generator: ...} mapping")


def _material(spec, lines) -> NeoHookean:
    path = ["material"]
    if not isinstance(spec, dict):
        raise lines.error(path, "expected a mapping")
    rho0 = _number(spec.get("rho0", 1.0), lines, path + ["rho0"])
    keys = set(spec) - {"rho0"}
    try:
        if keys == {"C10", "D1"}:
            return NeoHookean(_number(spec["C10"], lines, path + ["C10"]), _number(spec["D1"], lines, path + ["D1"]), rho0)
        if keys == {"mu0", "K0"}:
            return from_moduli(_number(spec["mu0"], lines, path + ["mu0"]), _number(spec["K0"], lines, path + ["K0"]), rho0)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise lines.error(path, str(exc)) from None
    raise lines.error(path, "give either C10 and D1 or mu0 and K0 (plus optional rho0)")


def _convolution(spec, lines, path) -> ConvolutionConfig:
    if not isinstance(spec, dict):
        raise lines.error(path, "expected a mapping")
    allowed = {"s", "a", "p", "kernel", "rbf_exponent"}
    unknown = set(spec) - allowed
    if unknown:
        raise lines.error(path, f"unknown keys {sorted(unknown)}")
    try:
        return ConvolutionConfig(**spec)
    except (TypeError, ValueError) as exc:
        raise lines.error(path, str(exc)) from None


def _enrichment(cfg: dict, mesh: Mesh, lines) -> EnrichmentMap:
    base = _convolution(cfg.get("convolution", {}), lines, ["convolution"])
    spec = cfg.get("enrichment", {"default": "chidenn" if "convolution" in cfg else "plain_fe"})
    if not isinstance(spec, dict):
        raise lines.error(["enrichment"], "expected a mapping")

    def mode(v, path):
        if v in ("plain_fe", "fem", None):
            return "plain_fe"
        if v == "chidenn":
            return base
        if isinstance(v, dict):
            return _convolution(v, lines, path)
        raise lines.error(path, f"unknown enrichment mode {v!r}")

    regions = spec.get("regions", {}) or {}
    if not isinstance(regions, dict):
        raise lines.error(["enrichment", "regions"], "expected a mapping of region tag to mode")
    resolved = {tag: mode(v, ["enrichment", "regions", tag]) for tag, v in regions.items()}
    default = mode(spec.get("default", "plain_fe"), ["enrichment", "default"])
    try:
        return classify_enrichment(mesh, resolved, default)
    except MeshError as exc:
        tag = next((t for t in regions if t not in set(mesh.region_tags.values())), None)
        raise lines.error(["enrichment", "regions", tag] if tag else ["enrichment"], str(exc)) from None


def _nodes(value, mesh: Mesh, lines, path):
    if isinstance(value, str):
        if value not in mesh.nodesets:
            raise lines.error(path, f"unknown nodeset {value!r}")
        return value
    if isinstance(value, list):
        try:
            return [mesh.index_of(int(v)) for v in value]
        except (KeyError, ValueError, MeshError):
            raise lines.error(path, f"unknown node id in {value!r}") from None
    raise lines.error(path, "expected a nodeset name or a list of node ids")


def _loads(spec, mesh: Mesh, lines) -> LoadCase:
    spec = spec or {}
    if not isinstance(spec, dict):
        raise lines.error(["loads"], "expected a mapping")
    ess = []
    for i, bc in enumerate(spec.get("essential", []) or []):
        p = ["loads", "essential", i]
        nodes = _nodes(_get(bc, "nodes", lines, p), mesh, lines, p + ["nodes"])
        direction = _get(bc, "direction", lines, p, int)
        if not 0 <= direction < mesh.dimension:
            raise lines.error(p + ["direction"], f"direction {direction} invalid in {mesh.dimension}D")
        curve = _curve(bc.get("history", 0.0), lines, p + ["history"])
        ess.append(EssentialBC(nodes, direction, curve))
    trs = []
    for i, tr in enumerate(spec.get("tractions", []) or []):
        p = ["loads", "tractions", i]
        fs = _get(tr, "facetset", lines, p, str)
        if fs not in mesh.facetsets:
            raise lines.error(p + ["facetset"], f"unknown facet set {fs!r}")
        vec = tr.get("vector")
        if vec is not None:
            vec = [_number(v, lines, p + ["vector"]) for v in vec]
            if len(vec) != mesh.dimension:
                raise lines.error(p + ["vector"], f"expected {mesh.dimension} components")
        pressure = _number(tr.get("pressure", 0.0), lines, p + ["pressure"])
        trs.append(Traction(fs, vec, pressure, _curve(tr.get("history"), lines, p + ["history"])))
    bf = None
    if spec.get("body_force") is not None:
        p = ["loads", "body_force"]
        vec = [_number(v, lines, p + ["vector"]) for v in _get(spec["body_force"], "vector", lines, p, list)]
        if len(vec) != mesh.dimension:
            raise lines.error(p + ["vector"], f"expected {mesh.dimension} components")
        bf = BodyForce(vec, _curve(spec["body_force"].get("history"), lines, p + ["history"]))
    loads = LoadCase(ess, trs, bf)
    try:
        loads.prescribed(mesh)
    except LoadError as exc:
        raise lines.error(["loads"], str(exc)) from None
    return loads


def _solver(spec, lines) -> tuple[SolverConfig, str]:
    p = ["solver"]
    if not isinstance(spec, dict):
        raise lines.error(p, "expected a mapping")
    dt = _number(_get(spec, "dt", lines, p), lines, p + ["dt"])
    if dt <= 0:
        raise lines.error(p + ["dt"], "must be positive")
    if "steps" in spec:
        steps = _get(spec, "steps", lines, p, int)
    else:
        t_end = _number(_get(spec, "t_end", lines, p), lines, p + ["t_end"])
        steps = int(round(t_end / dt))
        if not math.isclose(steps * dt, t_end, rel_tol=1e-9):
            raise lines.error(p + ["t_end"], f"t_end {t_end} is not a multiple of dt {dt}")
    mass = str(spec.get("mass", "auto"))
    if mass not in ("auto", "lumped", "consistent"):
        raise lines.error(p + ["mass"], "expected auto, lumped or consistent")
    try:
        cfg = SolverConfig(
            dt=dt,
            steps=steps,
            mode=spec.get("mode", "explicit_cd"),
            newton_tol=_number(spec.get("newton_tol", 1e-8), lines, p + ["newton_tol"]),
            newton_max_iters=int(spec.get("newton_max_iters", 25)),
            lumped=mass != "consistent",
            inertia=bool(spec.get("inertia", True)),
        )
    except ValueError as exc:
        raise lines.error(p, str(exc)) from None
    return cfg, mass


def _monitors(spec, mesh: Mesh, lines) -> list:
    out = []
    for i, mon in enumerate(spec or []):
        p = ["output", "monitored", i]
        if not isinstance(mon, dict):
            raise lines.error(p, "expected a mapping")
        note = ""
        if "node" in mon:
            try:
                node = mesh.index_of(int(mon["node"]))
            except (KeyError, MeshError):
                raise lines.error(p + ["node"], f"unknown node id {mon['node']!r}") from None
        elif "nodeset" in mon:
            if mon["nodeset"] not in mesh.nodesets:
                raise lines.error(p + ["nodeset"], f"unknown nodeset {mon['nodeset']!r}")
            node = int(mesh.nodesets[mon["nodeset"]][0])
        elif "at" in mon:
            X = [_number(v, lines, p + ["at"]) for v in mon["at"]]
            if len(X) != mesh.dimension:
                raise lines.error(p + ["at"], f"expected {mesh.dimension} coordinates")
            node = mesh.nearest_node(X)
            note = f"nearest node to {X}: id {mesh.node_ids[node]} at {mesh.nodes[node].tolist()}"
        else:
            raise lines.error(p, "give node, nodeset or at")
        qs = tuple(mon.get("quantities", ["u_x", "u_y", "von_mises"][: mesh.dimension] + ["von_mises"]))
        qs = tuple(dict.fromkeys(qs))
        for q in qs:
            if q not in QUANTITIES or (q[:2] in ("u_", "v_") and "xyz".index(q[-1]) >= mesh.dimension):
                raise lines.error(p + ["quantities"], f"unknown quantity {q!r}")
        out.append(Monitor(node, qs, mon.get("label", f"node{mesh.node_ids[node]}"), note))
    return out


def load_scenario(path, overrides: dict | None = None) -> Scenario:
    """Parse and validate a scenario file.  ``overrides`` replaces top-level keys."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"scenario file not found: {path}")
    text = path.read_text()
    lines = _Lines(text, str(path))
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    for k, v in (overrides or {}).items():
        if isinstance(v, dict) and isinstance(cfg.get(k), dict):
            cfg[k] = {**cfg[k], **v}
        else:
            cfg[k] = v
    known = {"name", "mesh", "material", "convolution", "enrichment", "loads", "solver", "output", "description"}
    unknown = set(cfg) - known
    if unknown:
        raise lines.error([sorted(unknown)[0]], f"unknown top-level key; expected one of {sorted(known)}")
    mesh, origin = _load_mesh(_get(cfg, "mesh", lines, []), path.parent, lines)
    material = _material(_get(cfg, "material", lines, []), lines)
    emap = _enrichment(cfg, mesh, lines)
    loads = _loads(cfg.get("loads"), mesh, lines)
    solver, mass = _solver(_get(cfg, "solver", lines, []), lines)
    out = cfg.get("output", {}) or {}
    monitors = _monitors(out.get("monitored"), mesh, lines)
    loads.monitored = [m.node for m in monitors]
    interval = int(out.get("snapshot_interval", 0) or 0)
    outdir = Path(out.get("directory", f"{path.stem}_out"))
    if not outdir.is_absolute():
        outdir = Path.cwd() / outdir
    resolved = {
        "name": cfg.get("name", path.stem),
        "version": __version__,
        "mesh": {"source": origin, "nodes": mesh.n_nodes, "elements": mesh.n_elements},
        "material": {**material.as_dict(), "stress_measure": "cauchy"},
        "enrichment": {
            "configs": [c.as_dict() for c in emap.configs],
            "enriched_elements": int(len(emap.enriched())),
            "regions": {t: ("plain_fe" if not isinstance(v, dict) and v in ("plain_fe", "fem", None) else
                            "chidenn" if v == "chidenn" else v)
                        for t, v in ((cfg.get("enrichment") or {}).get("regions") or {}).items()},
        },
        "quadrature_order": sorted({default_quadrature_order(m) for m in emap.modes}),
        "solver": {"dt": solver.dt, "steps": solver.steps, "mode": solver.mode, "mass": mass,
                   "newton_tol": solver.newton_tol, "newton_max_iters": solver.newton_max_iters,
                   "inertia": solver.inertia},
        "monitored": [{"label": m.label, "node_id": int(mesh.node_ids[m.node]), "quantities": list(m.quantities),
                       **({"choice": m.note} if m.note else {})} for m in monitors],
    }
    return Scenario(resolved["name"], str(path), mesh, origin, material, emap, loads, solver, mass, monitors,
                    outdir, interval, resolved)


def bundled_scenario(name: str) -> Path:
    path = BUNDLED / f"{name}.yaml"
    if not path.is_file():
        names = sorted(p.stem for p in BUNDLED.glob("*.yaml"))
        raise ConfigError(f"no bundled scenario {name!r}; available: {names}")
    return path


@dataclass
class RunResult:
    csv: Path | None
    snapshots: list
    record: Path
    timings: dict
    energy: dict
    warnings: list


def _monitor_values(sc: Scenario, tables, state) -> list:
    need_field = {q for m in sc.monitors for q in m.quantities if q in ("von_mises", "energy_density")}
    fields = {q: nodal_field(tables, sc.material, state.d, q) for q in need_field}
    dim = sc.mesh.dimension
    u = state.d.reshape(-1, dim)
    v = state.v.reshape(-1, dim)
    out = []
    for m in sc.monitors:
        for q in m.quantities:
            if q in fields:
                out.append(fields[q][m.node])
            else:
                out.append((u if q[0] == "u" else v)[m.node, "xyz".index(q[-1])])
    return out


def run_scenario(sc: Scenario, log=print) -> RunResult:
    """Set up, march and write the CSV history, VTK snapshots and run record."""
    timings = {}
    warnings = []
    t0 = time.perf_counter()
    bases = build_bases(sc.mesh, sc.enrichment)
    t1 = time.perf_counter()
    tables = hybrid_shape_tables(sc.mesh, sc.enrichment, bases)
    t2 = time.perf_counter()
    cfg = sc.solver
    lumped = sc.mass != "consistent"
    try:
        system = build_system(tables, sc.material, sc.loads, lumped=lumped, dt=cfg.dt)
    except NegativeLumpedMass as exc:
        if sc.mass != "auto":
            raise
        warnings.append(f"{exc}; switched to the consistent mass matrix")
        log("warning: " + warnings[-1])
        lumped = False
        system = build_system(tables, sc.material, sc.loads, lumped=False, dt=cfg.dt)
    t3 = time.perf_counter()
    timings.update(patch_bases=t1 - t0, shape_tables=t2 - t1, mass=t3 - t2)
    sc.resolved["solver"]["mass_used"] = "lumped" if lumped else "consistent"
    dt_crit = stable_time_step(tables, sc.material)
    sc.resolved["solver"]["dt_crit_estimate"] = dt_crit
    if cfg.mode == "explicit_cd" and cfg.dt > dt_crit:
        warnings.append(f"dt = {cfg.dt:g} exceeds the estimated stable step {dt_crit:.3g} (h_min / c_d)")
        log("warning: " + warnings[-1])
    kernels = ", ".join(f"{c.kernel} q={c.rbf_exponent} a={c.a} s={c.s} p={c.p}" for c in sc.enrichment.configs)
    log(f"scenario {sc.name}: {sc.mesh.n_nodes} nodes, {sc.mesh.n_elements} elements, "
        f"{len(sc.enrichment.enriched())} convolution elements [{kernels or 'plain FE'}], "
        f"{tables.n_quadrature_points()} quadrature points")

    assembly_time = [0.0]
    force = system.internal_force

    def timed_force(d):
        s = time.perf_counter()
        try:
            return force(d)
        finally:
            assembly_time[0] += time.perf_counter() - s

    system.internal_force = timed_force
    sc.output_dir.mkdir(parents=True, exist_ok=True)
    config = sc.resolved
    columns = [f"{q}@{m.label}" for m in sc.monitors for q in m.quantities]
    csv = CsvHistory(sc.output_dir / f"{sc.name}.csv", columns, config) if sc.monitors else None
    snapshots = []

    def snapshot(k, st):
        path = sc.output_dir / f"{sc.name}_{k:06d}.vtk"
        pf = {q: nodal_field(tables, sc.material, st.d, q) for q in ("von_mises", "energy_density")}
        cf = {q: cell_field(tables, sc.material, st.d, q) for q in ("von_mises", "energy_density")}
        cf["chidenn"] = np.array([0.0 if m is None else 1.0 for m in sc.enrichment.modes])
        write_vtk(path, sc.mesh, config, st.t, st.d, pf, cf)
        snapshots.append(path)

    t4 = time.perf_counter()
    state = initial_state(system)
    step = cd_step if cfg.mode == "explicit_cd" else (lambda s, sy, dt: increment_step(s, sy, dt, cfg))
    max_energy = 0.0
    try:
        if csv:
            csv.append(state.t, _monitor_values(sc, tables, state))
        if sc.snapshot_interval:
            snapshot(0, state)
        for k in range(1, cfg.steps + 1):
            state = step(state, system, cfg.dt)
            if csv:
                csv.append(state.t, _monitor_values(sc, tables, state))
            if sc.snapshot_interval and (k % sc.snapshot_interval == 0 or k == cfg.steps):
                snapshot(k, state)
            e = energy_report(state, system)
            max_energy = max(max_energy, abs(e["W_kin"]), abs(e["W_int"]), abs(e["W_ext"]))
    finally:
        if csv:
            csv.close()
    t5 = time.perf_counter()
    timings.update(assembly=assembly_time[0], solve=t5 - t4 - assembly_time[0],
                   per_step=(t5 - t4) / max(cfg.steps, 1))
    energy = energy_report(state, system)
    energy["max_energy"] = max_energy
    setup = timings["patch_bases"] + timings["shape_tables"] + timings["mass"]
    log(f"timing: setup {setup:.3f} s (patch bases {timings['patch_bases']:.3f}, shape tables "
        f"{timings['shape_tables']:.3f}, mass {timings['mass']:.3f}); time loop {t5 - t4:.3f} s "
        f"(assembly {timings['assembly']:.3f}, rest {timings['solve']:.3f}); "
        f"{timings['per_step'] * 1e3:.3f} ms per step over {cfg.steps} steps")
    log(f"energy: W_kin {energy['W_kin']:.6g}, W_int {energy['W_int']:.6g}, W_ext {energy['W_ext']:.6g}, "
        f"balance {energy['balance']:.3g}")
    record = write_run_record(sc.output_dir / f"{sc.name}_run.json", config,
                              {"timings": timings, "energy": energy, "warnings": warnings,
                               "outputs": {"csv": csv and csv.path.name, "vtk": [p.name for p in snapshots]}})
    return RunResult(csv and csv.path, snapshots, record, timings, energy, warnings)
