"""Built-in property suites: interpolation, consistency, patch test, energy.

Each check returns a :class:`Check` with the measured quantity and its
tolerance; :func:`verify_suite` runs a list of them.  The ``perturb`` and
``quadrature_order`` arguments are mutation hooks: a perturbed B0 must
break the force/energy consistency check and a too-low quadrature order
must break the patch-test force balance.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from itertools import product

import numpy as np

from .assembly import (
    default_quadrature_order,
    deformation_gradients,
    internal_energy,
    internal_force,
    shape_tables,
    tangent_stiffness,
)
from .dynamics import (
    Curve,
    EssentialBC,
    LoadCase,
    build_system,
    cd_step,
    energy_report,
    initial_state,
    solve_static,
    stable_time_step,
)
from .interp import ConvolutionConfig, build_patch_bases, element_shapes
from .material import NeoHookean
from .mesh import ElementKind, Mesh, characteristic_spacing
from .meshgen import box_tet_mesh, distort, line_mesh, rect_mesh

__all__ = [
    "Check",
    "random_parent_points",
    "interpolation_errors",
    "patch_test",
    "force_consistency",
    "energy_balance_run",
    "verify_suite",
]

MAT = NeoHookean(C10=1.0, D1=0.5, rho0=1.0)
FBAR = {1: np.array([[1.08]]), 2: np.array([[1.08, 0.04], [-0.03, 0.95]]),
        3: np.array([[1.08, 0.04, 0.0], [-0.03, 0.95, 0.02], [0.01, 0.0, 1.03]])}


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<48} {self.value:10.3e} (tol {self.tolerance:.0e}, {self.seconds:.2f} s)"


def random_parent_points(kind: ElementKind, n: int, rng) -> np.ndarray:
    """Uniform samples of the parent domain."""
    if kind is ElementKind.TET4:
        b = rng.dirichlet(np.ones(4), size=n)
        return b[:, 1:]
    return rng.uniform(-1.0, 1.0, (n, kind.dim))


def _monomials(p: int, dim: int):
    return [e for deg in range(p + 1) for e in product(range(deg + 1), repeat=dim) if sum(e) == deg]


def interpolation_errors(mesh: Mesh, config: ConvolutionConfig | None, n_points: int = 20, seed: int = 0) -> dict:
    """Largest violations of the Kronecker-delta, partition-of-unity and reproducing conditions.

    Monomials up to degree ``p`` are taken in coordinates centred on each
    element and scaled by the local nodal spacing, so all errors are
    relative to O(1) field values and gradients.
    """
    rng = np.random.default_rng(seed)
    bases = None if config is None else build_patch_bases(mesh, config)
    p = 1 if config is None else config.p
    exps = np.array(_monomials(p, mesh.dimension))
    out = dict(kronecker=0.0, unity=0.0, reproduction=0.0, derivative=0.0)
    for e in range(mesh.n_elements):
        kind = mesh.kinds[e]
        own = list(mesh.connectivity[e])
        x0 = mesh.nodes[own].mean(axis=0)
        L = characteristic_spacing(mesh, own[0])
        xi = np.vstack([random_parent_points(kind, n_points, rng), kind.parent_nodes])
        nodes, vals, grads, _, X = element_shapes(mesh, e, xi, bases)
        z = (mesh.nodes[nodes] - x0) / L
        zq = (X - x0) / L
        m_nodes = np.prod(z[:, None, :] ** exps[None], axis=2)  # (np, nm)
        m_q = np.prod(zq[:, None, :] ** exps[None], axis=2)  # (nq, nm)
        out["reproduction"] = max(out["reproduction"], np.abs(vals @ m_nodes - m_q).max())
        out["unity"] = max(out["unity"], np.abs(vals.sum(axis=1) - 1.0).max())
        # d/dX of a monomial in z is (1/L) d/dz; compare in z units
        for j in range(mesh.dimension):
            dm = np.zeros_like(m_q)
            ej = exps[:, j]
            shifted = exps.copy()
            shifted[:, j] = np.maximum(ej - 1, 0)
            dm = ej * np.prod(zq[:, None, :] ** shifted[None], axis=2)
            num = L * np.einsum("qk,km->qm", grads[:, :, j], m_nodes)
            out["derivative"] = max(out["derivative"], np.abs(num - dm).max())
        at_nodes = vals[n_points:]
        expected = (np.asarray(nodes)[None, :] == np.asarray(own)[:, None]).astype(float)
        out["kronecker"] = max(out["kronecker"], np.abs(at_nodes - expected).max())
    return out


def boundary_layer_nodes(mesh: Mesh, tables) -> np.ndarray:
    """Nodes of the element patches of elements that own a boundary facet.

    Convolution shape functions of interior nodes do not vanish on the
    boundary, so a homogeneous state is only the discrete solution when the
    whole layer whose patches reach the boundary is prescribed.
    """
    owners = {f.element for f in mesh.facets}
    layer = set(mesh.boundary_nodes.tolist())
    for b in tables.blocks:
        for e, nodes in zip(b.elements, b.nodes):
            if e in owners:
                layer.update(nodes.tolist())
    return np.array(sorted(layer))


def patch_test(mesh: Mesh, config: ConvolutionConfig | None, order: int | None = None, Fbar=None,
               solve: bool = True) -> dict:
    """Constant-gradient patch test.

    Prescribes ``u = (Fbar - I) X`` on the boundary layer, solves for the
    remaining nodes from rest and reports the largest deviation of F from
    Fbar at quadrature points of the solution.  The force balance is the
    largest residual force on free nodes in the exact homogeneous state,
    relative to the norm of the reactions; it measures how well quadrature
    integrates the patch functions.
    """
    dim = mesh.dimension
    Fbar = FBAR[dim] if Fbar is None else np.asarray(Fbar)
    if order is None:
        order = default_quadrature_order(config)
    bases = None if config is None else build_patch_bases(mesh, config)
    tables = shape_tables(mesh, bases, config, order=order)
    exact = mesh.nodes @ (Fbar - np.eye(dim)).T
    fixed = boundary_layer_nodes(mesh, tables) if config is not None else mesh.boundary_nodes
    essential = [EssentialBC([int(n)], i, Curve.constant(float(exact[n, i]))) for n in fixed for i in range(dim)]
    system = build_system(tables, MAT, LoadCase(essential=essential), lumped=False)
    d = solve_static(system, increments=2).d if solve else exact.ravel()
    u = d.reshape(-1, dim)
    F_err = max(np.abs(deformation_gradients(b, u) - Fbar).max() for b in tables.blocks)
    # balance of the exact homogeneous state; the solved state balances by construction
    f = internal_force(tables, MAT, exact.ravel())
    reactions = np.linalg.norm(f[system.prescribed])
    residual = np.abs(f[system.free]).max() / reactions if system.free.size else 0.0
    return {"F_error": float(F_err), "residual": float(residual), "free_nodes": int(system.free.size // dim),
            "order": order}


def force_consistency(mesh: Mesh, config: ConvolutionConfig | None, perturb=None, n_dirs: int = 5,
                      seed: int = 0) -> dict:
    """Relative mismatch of f_int against FD of the energy and of the tangent against FD of f_int."""
    rng = np.random.default_rng(seed)
    bases = None if config is None else build_patch_bases(mesh, config)
    tables = shape_tables(mesh, bases, config)
    d = 1e-3 * rng.standard_normal(mesh.ndof)
    f = internal_force(tables, MAT, d, perturb=perturb)
    K = tangent_stiffness(tables, MAT, d)
    h = 1e-6
    ef, ek = 0.0, 0.0
    for _ in range(n_dirs):
        v = rng.standard_normal(mesh.ndof)
        fd = (internal_energy(tables, MAT, d + h * v) - internal_energy(tables, MAT, d - h * v)) / (2 * h)
        ef = max(ef, abs(f @ v - fd) / abs(fd))
        fdk = (internal_force(tables, MAT, d + h * v) - internal_force(tables, MAT, d - h * v)) / (2 * h)
        ek = max(ek, np.linalg.norm(K @ v - fdk) / np.linalg.norm(fdk))
    return {"force": float(ef), "tangent": float(ek)}


def energy_balance_run(mesh: Mesh, config: ConvolutionConfig | None, steps: int = 200) -> float:
    """|W_kin + W_int - W_ext| over the largest energy for a ramped stretch."""
    bases = None if config is None else build_patch_bases(mesh, config)
    tables = shape_tables(mesh, bases, config)
    dt = 0.3 * stable_time_step(tables, MAT)
    ramp = Curve((0.0, steps * dt / 2, steps * dt), (0.0, 0.05, 0.05))
    names = sorted(mesh.nodesets)
    lo, hi = ("left", "right") if "left" in names else (names[0], names[-1])
    loads = LoadCase(essential=[EssentialBC(lo, i) for i in range(mesh.dimension)] + [EssentialBC(hi, 0, ramp)])
    system = build_system(tables, MAT, loads, lumped=config is None, dt=dt)
    st = initial_state(system)
    worst, peak = 0.0, 0.0
    for _ in range(steps):
        st = cd_step(st, system, dt)
        e = energy_report(st, system)
        peak = max(peak, abs(e["W_kin"]), abs(e["W_int"]), abs(e["W_ext"]))
        worst = max(worst, abs(e["balance"]))
    return worst / peak


def _timed(name, fn, tol):
    t0 = time.perf_counter()
    value = fn()
    return Check(name, float(value), tol, time.perf_counter() - t0)


def verify_suite(level: str = "fast", perturb=None, quadrature_order: int | None = None, log=None) -> list:
    """Run the property suites; ``full`` adds 1D/3D meshes and more kernels."""
    if level not in ("fast", "full"):
        raise ValueError(f"unknown level {level!r}")
    quad = distort(rect_mesh(6, 6), 0.2, seed=1)
    configs = [ConvolutionConfig(s=1, p=1), ConvolutionConfig(s=2, p=2)]
    meshes = [("quad", quad)]
    if level == "full":
        configs += [ConvolutionConfig(s=1, a=0.5, p=2), ConvolutionConfig(s=2, a=2.0, p=1)]
        meshes += [("line", line_mesh(8)), ("tet", box_tet_mesh(2, 2, 2))]
    checks = []

    def add(check):
        checks.append(check)
        if log:
            log(check.line())

    for mname, mesh in meshes:
        for cfg in configs:
            tag = f"{mname} s={cfg.s} a={cfg.a:g} p={cfg.p}"
            errs = {}
            add(_timed(f"kronecker delta [{tag}]",
                       lambda: errs.update(interpolation_errors(mesh, cfg, 20 if level == "full" else 5))
                       or errs["kronecker"], 1e-9))
            add(Check(f"partition of unity [{tag}]", errs["unity"], 1e-10))
            add(Check(f"reproduction [{tag}]", errs["reproduction"], 1e-8))
            add(Check(f"derivative reproduction [{tag}]", errs["derivative"], 1e-8))
        for cfg in [None] + configs[: 2 if level == "fast" else None]:
            tag = f"{mname} " + ("fem" if cfg is None else f"s={cfg.s} p={cfg.p}")
            res = {}
            add(_timed(f"f_int vs energy FD [{tag}]",
                       lambda: res.update(force_consistency(mesh, cfg, perturb)) or res["force"], 1e-5))
            add(Check(f"tangent vs f_int FD [{tag}]", res["tangent"], 1e-5))
    add(_timed("identity kernel equals FE [quad]", lambda: _degeneracy(quad), 1e-12))
    patch_mesh = distort(rect_mesh(8, 8), 0.2, seed=3)
    for cfg in [None] + configs[:2]:
        tag = "fem" if cfg is None else f"s={cfg.s} p={cfg.p}"
        order = quadrature_order
        res = {}
        add(_timed(f"patch test F [{tag}]", lambda: res.update(patch_test(patch_mesh, cfg, order)) or res["F_error"],
                   1e-8))
        add(Check(f"patch test force balance [{tag}]", res["residual"], 1e-8))
    bar = rect_mesh(8, 2, 1.0, 0.25)
    add(_timed("energy balance CD [fem]", lambda: energy_balance_run(bar, None), 0.05))
    if level == "full":
        add(_timed("energy balance CD [s=1 p=2]", lambda: energy_balance_run(bar, ConvolutionConfig(p=2)), 0.05))
    return checks


def _degeneracy(mesh: Mesh) -> float:
    rng = np.random.default_rng(3)
    bases = build_patch_bases(mesh, ConvolutionConfig(kernel="identity"))
    worst = 0.0
    for e in range(mesh.n_elements):
        xi = random_parent_points(mesh.kinds[e], 5, rng)
        n1, v1, g1, _, _ = element_shapes(mesh, e, xi, bases)
        n2, v2, g2, _, _ = element_shapes(mesh, e, xi, None)
        if list(n1) != list(n2):
            return np.inf
        worst = max(worst, np.abs(v1 - v2).max(), np.abs(g1 - g2).max())
    return worst
