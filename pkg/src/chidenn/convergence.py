"""Static manufactured-solution convergence studies.

The body force is derived from the exact displacement field through the
material tangent, ``rho0 b_i = -A[i, J, k, L] u_k,LJ``, so the exact field
solves the nonlinear equilibrium problem and the only error left is the
discretization error.  Displacements are prescribed on the whole boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import shape_tables
from .dynamics import BodyForce, Curve, EssentialBC, LoadCase, NoConvergence, build_system, solve_static
from .interp import ConvolutionConfig, InterpolationError, build_patch_bases
from .material import MaterialError, NeoHookean, material_tangent
from .meshgen import line_mesh, rect_mesh

__all__ = ["Manufactured", "PROBLEMS", "MODES", "StudyRow", "StudyResult", "l2_error", "convergence_study", "fit_rate"]


@dataclass(frozen=True)
class Manufactured:
    """Exact field on the unit interval or square with its first two derivatives."""

    dim: int
    u: object  # X (n, dim) -> (n, dim)
    grad: object  # X -> (n, dim, dim), grad[n, i, J] = du_i/dX_J
    hess: object  # X -> (n, dim, dim, dim), hess[n, i, J, L] = d2u_i/dX_J dX_L
    material: NeoHookean

    def body_force(self, X):
        X = np.asarray(X, dtype=float)
        flat = X.reshape(-1, self.dim)
        F = np.eye(self.dim) + self.grad(flat)
        A = material_tangent(self.material, F)
        div = np.einsum("nijkl,nklj->ni", A, self.hess(flat))
        return (-div / self.material.rho0).reshape(X.shape)


def _bar1d(amp=0.1):
    k = 0.5 * np.pi
    return Manufactured(
        1,
        lambda X: amp * np.sin(k * X),
        lambda X: (amp * k * np.cos(k * X))[:, :, None],
        lambda X: (-amp * k * k * np.sin(k * X))[:, :, None, None],
        NeoHookean(C10=1.0, D1=0.5, rho0=1.0),
    )


def _plate2d(amp=0.05):
    k = np.pi

    def u(X):
        x, y = X[:, 0], X[:, 1]
        return amp * np.column_stack([np.sin(k * x) * np.sin(k * y), x * y * np.cos(k * x)])

    def grad(X):
        x, y = X[:, 0], X[:, 1]
        g = np.empty((len(X), 2, 2))
        g[:, 0, 0] = k * np.cos(k * x) * np.sin(k * y)
        g[:, 0, 1] = k * np.sin(k * x) * np.cos(k * y)
        g[:, 1, 0] = y * np.cos(k * x) - k * x * y * np.sin(k * x)
        g[:, 1, 1] = x * np.cos(k * x)
        return amp * g

    def hess(X):
        x, y = X[:, 0], X[:, 1]
        h = np.empty((len(X), 2, 2, 2))
        h[:, 0, 0, 0] = -k * k * np.sin(k * x) * np.sin(k * y)
        h[:, 0, 1, 1] = -k * k * np.sin(k * x) * np.sin(k * y)
        h[:, 0, 0, 1] = h[:, 0, 1, 0] = k * k * np.cos(k * x) * np.cos(k * y)
        h[:, 1, 0, 0] = -2 * k * y * np.sin(k * x) - k * k * x * y * np.cos(k * x)
        h[:, 1, 1, 1] = 0.0
        h[:, 1, 0, 1] = h[:, 1, 1, 0] = np.cos(k * x) - k * x * np.sin(k * x)
        return amp * h

    return Manufactured(2, u, grad, hess, NeoHookean(C10=1.0, D1=0.5, rho0=1.0))


PROBLEMS = {"bar1d": _bar1d, "plate2d": _plate2d}

# kernels used by the ``chidenn`` mode per dimension
MODES = {
    "fem": lambda dim: None,
    "chidenn": lambda dim: ConvolutionConfig(s=1, a=1.0, p=2, kernel="lagrange1d" if dim == 1 else "rbf"),
}


def _mesh(problem: Manufactured, n: int):
    return line_mesh(n) if problem.dim == 1 else rect_mesh(n, n)


def l2_error(tables, d, exact) -> float:
    """sqrt(int |u_h - u|^2 dX) with the tables' quadrature."""
    u = np.asarray(d, dtype=float).reshape(tables.n_nodes, tables.dim)
    total = 0.0
    for b in tables.blocks:
        uh = np.einsum("eqp,epi->eqi", b.values, u[b.nodes])
        ue = exact(b.points.reshape(-1, tables.dim)).reshape(uh.shape)
        total += float(np.sum(np.sum((uh - ue) ** 2, axis=-1) * b.weights))
    return float(np.sqrt(total))


def solve_manufactured(problem: Manufactured, n: int, config: ConvolutionConfig | None, increments: int = 2):
    """Static solution on an ``n``-element-per-direction mesh; returns (tables, d, h)."""
    mesh = _mesh(problem, n)
    bases = None if config is None else build_patch_bases(mesh, config)
    tables = shape_tables(mesh, bases, config)
    boundary = mesh.boundary_nodes
    exact_b = problem.u(mesh.nodes[boundary])
    essential = [
        EssentialBC([int(node)], i, Curve.constant(float(exact_b[k, i])))
        for k, node in enumerate(boundary)
        for i in range(problem.dim)
    ]
    loads = LoadCase(essential=essential, body_force=BodyForce(func=lambda X, t: problem.body_force(X)))
    system = build_system(tables, problem.material, loads, lumped=False)
    state = solve_static(system, increments=increments)
    return tables, state.d, 1.0 / n


@dataclass
class StudyRow:
    mode: str
    n: int
    h: float
    error: float | None
    message: str = ""


@dataclass
class StudyResult:
    problem: str
    rows: list = field(default_factory=list)

    def errors(self, mode: str):
        return [(r.h, r.error) for r in self.rows if r.mode == mode and r.error is not None]

    def rate(self, mode: str) -> float | None:
        pts = self.errors(mode)
        if len(pts) < 2:
            return None
        h, e = zip(*pts)
        return fit_rate(h, e)

    def table(self) -> str:
        modes = list(dict.fromkeys(r.mode for r in self.rows))
        lines = [f"# {self.problem}: L2 displacement error", f"{'mode':<8} {'n':>5} {'h':>10} {'error':>12}"]
        for r in self.rows:
            err = f"{r.error:12.4e}" if r.error is not None else f"{'failed':>12}  {r.message}"
            lines.append(f"{r.mode:<8} {r.n:>5} {r.h:>10.4g} {err}")
        for m in modes:
            rate = self.rate(m)
            lines.append(f"rate {m:<8} " + ("undefined (fewer than two levels)" if rate is None else f"{rate:.3f}"))
        return "\n".join(lines)


def fit_rate(h, errors) -> float:
    """Least-squares slope of log(error) against log(h)."""
    return float(np.polyfit(np.log(h), np.log(errors), 1)[0])


def convergence_study(problem: str, refinements, modes=("fem", "chidenn")) -> StudyResult:
    """L2 error per refinement (elements per direction) and mode.

    A level whose solve fails is recorded with its message and the study
    continues.
    """
    if problem not in PROBLEMS:
        raise ValueError(f"unknown problem {problem!r}; choose from {sorted(PROBLEMS)}")
    refinements = [int(n) for n in refinements]
    if not refinements or any(n < 1 for n in refinements) or refinements != sorted(set(refinements)):
        raise ValueError("refinements must be positive, distinct and ascending")
    for m in modes:
        if m not in MODES:
            raise ValueError(f"unknown mode {m!r}; choose from {sorted(MODES)}")
    exact = PROBLEMS[problem]()
    result = StudyResult(problem)
    for mode in modes:
        config = MODES[mode](exact.dim)
        for n in refinements:
            try:
                tables, d, h = solve_manufactured(exact, n, config)
                result.rows.append(StudyRow(mode, n, h, l2_error(tables, d, exact.u)))
            except (NoConvergence, MaterialError, InterpolationError) as exc:
                result.rows.append(StudyRow(mode, n, 1.0 / n, None, str(exc)))
    return result
