"""Time marching, boundary conditions and energy accounting.

Two integrators share one :class:`System`:

``explicit_cd``
    Central differences with half-step velocities.
``incremental_min``
    Each step minimizes an incremental potential in the displacement
    increment.  The inertial part is the average-acceleration (trapezoidal)
    one, so that stationarity is exactly the momentum balance at the end of
    the step with ``a^{n+1} = 4/dt^2 (dd - dt v^n) - a^n``; velocities are
    then updated with the same half-step rule as the explicit scheme.
    Without inertia the same machinery gives a quasi-static Newton solver.

Work is accumulated with the trapezoidal rule in both modes.  External work
includes the work of support reactions on prescribed degrees of freedom.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import assembly
from .assembly import ShapeTables
from .material import MaterialError, NeoHookean

__all__ = [
    "Curve",
    "EssentialBC",
    "Traction",
    "BodyForce",
    "LoadCase",
    "SolverConfig",
    "State",
    "System",
    "build_system",
    "initial_state",
    "apply_essential_bc",
    "cd_step",
    "incremental_energy",
    "minimize_increment",
    "increment_step",
    "solve_static",
    "march",
    "energy_report",
    "stable_time_step",
    "NonFiniteState",
    "NoConvergence",
    "LoadError",
]


class NonFiniteState(FloatingPointError):
    pass


class NoConvergence(RuntimeError):
    def __init__(self, msg, residual=float("nan"), trace=()):
        super().__init__(msg)
        self.residual = residual
        self.trace = list(trace)


class LoadError(ValueError):
    pass


# ---------------------------------------------------------------------------
# load histories


@dataclass(frozen=True)
class Curve:
    """Piecewise-linear history through (t, value) points.

    Before the first point the first value is held.  Evaluation beyond the
    last point is an error; finite-difference rates clamp instead.
    """

    times: tuple
    values: tuple

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size == 0 or t.size != len(self.values):
            raise LoadError("a history needs matching, non-empty time and value lists")
        if np.any(np.diff(t) <= 0):
            raise LoadError("history times must be strictly increasing")

    @classmethod
    def constant(cls, value: float = 1.0, t_end: float = np.inf) -> "Curve":
        return cls((0.0,), (float(value),)) if not np.isfinite(t_end) else cls((0.0, t_end), (value, value))

    @classmethod
    def from_points(cls, points) -> "Curve":
        if np.isscalar(points):
            return cls.constant(float(points))
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return cls(tuple(pts[:, 0]), tuple(pts[:, 1]))

    @property
    def t_end(self) -> float:
        return self.times[-1] if len(self.times) > 1 else np.inf

    def _raw(self, t):
        return float(np.interp(t, self.times, self.values))

    def __call__(self, t: float) -> float:
        if t > self.t_end * (1 + 1e-12) + 1e-300:
            raise LoadError(f"time {t} beyond the end of the history ({self.t_end})")
        return self._raw(t)

    def rate(self, t: float, h: float) -> tuple[float, float]:
        """Central-difference velocity and acceleration with step h."""
        up, u0, um = self._raw(t + h), self._raw(t), self._raw(t - h)
        return (up - um) / (2 * h), (up - 2 * u0 + um) / (h * h)


@dataclass(frozen=True)
class EssentialBC:
    """Prescribed displacement ``curve(t)`` of ``nodes`` in ``direction``.

    ``nodes`` is a nodeset name or a sequence of node indices.
    """

    nodes: object
    direction: int
    curve: Curve = Curve.constant(0.0)


@dataclass(eq=False)
class Traction:
    """Uniform reference traction and/or pressure on a facet set, scaled by ``curve``."""

    facetset: str
    vector: Sequence[float] | None = None
    pressure: float = 0.0
    curve: Curve = Curve.constant(1.0)
    _cache: dict = field(default_factory=dict, repr=False)

    def unit_force(self, tables: ShapeTables) -> np.ndarray:
        key = id(tables)
        if key not in self._cache:
            mesh = tables.mesh
            if self.facetset not in mesh.facetsets:
                raise LoadError(f"load on nonexistent facet set {self.facetset!r}")
            table = assembly.facet_table(tables, mesh.facetsets[self.facetset])
            self._cache[key] = assembly.traction_vector(table, mesh.n_nodes, self.vector, self.pressure)
        return self._cache[key]

    def scale(self, t: float) -> float:
        return self.curve(t)


@dataclass(frozen=True)
class BodyForce:
    """Body force per unit mass: ``vector * curve(t)`` or ``func(X, t)``."""

    vector: Sequence[float] | None = None
    curve: Curve = Curve.constant(1.0)
    func: Callable | None = None

    def at(self, t: float):
        if self.func is not None:
            return lambda X: self.func(X, t)
        return np.asarray(self.vector, dtype=float) * self.curve(t)


@dataclass
class LoadCase:
    essential: list = field(default_factory=list)
    tractions: list = field(default_factory=list)
    body_force: BodyForce | None = None
    monitored: list = field(default_factory=list)

    def prescribed(self, mesh) -> tuple[np.ndarray, list]:
        """Prescribed dofs (ascending) and a (dofs, curve) list.

        Later conditions override earlier ones on shared dofs.
        """
        owner = {}
        for k, bc in enumerate(self.essential):
            if isinstance(bc.nodes, str):
                if bc.nodes not in mesh.nodesets:
                    raise LoadError(f"unknown nodeset {bc.nodes!r}")
                nodes = mesh.nodesets[bc.nodes]
            else:
                nodes = np.asarray(bc.nodes, dtype=int)
            if not 0 <= bc.direction < mesh.dimension:
                raise LoadError(f"direction {bc.direction} invalid in {mesh.dimension}D")
            for n in nodes:
                owner[int(n) * mesh.dimension + bc.direction] = k
        dofs = np.array(sorted(owner), dtype=int)
        groups = []
        for k, bc in enumerate(self.essential):
            sel = np.array([d for d in dofs if owner[d] == k], dtype=int)
            if sel.size:
                groups.append((sel, bc.curve))
        self._check_disjoint(mesh, set(owner))
        return dofs, groups

    def _check_disjoint(self, mesh, prescribed):
        # a traction is meaningless on a facet whose loaded dofs are all prescribed
        for tr in self.tractions:
            if tr.facetset not in mesh.facetsets:
                raise LoadError(f"load on nonexistent facet set {tr.facetset!r}")
            dirs = range(mesh.dimension)
            if tr.vector is not None and tr.pressure == 0.0:
                dirs = [i for i, c in enumerate(tr.vector) if c != 0.0]
            for f in mesh.facetsets[tr.facetset]:
                nodes = mesh.facets[f].nodes
                if dirs and all(n * mesh.dimension + i in prescribed for n in nodes for i in dirs):
                    raise LoadError(
                        f"traction on facet set {tr.facetset!r} acts only on prescribed dofs"
                    )


# ---------------------------------------------------------------------------
# solver state and system


@dataclass
class SolverConfig:
    dt: float
    steps: int
    mode: str = "explicit_cd"
    newton_tol: float = 1e-8
    newton_max_iters: int = 25
    lumped: bool = True
    inertia: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.mode not in ("explicit_cd", "incremental_min"):
            raise ValueError(f"unknown solver mode {self.mode!r}")
        if not (self.newton_tol > 0 and self.newton_max_iters > 0):
            raise ValueError("Newton tolerance and iteration limit must be positive")


@dataclass
class State:
    d: np.ndarray
    v: np.ndarray
    a: np.ndarray
    t: float = 0.0
    W_int: float = 0.0
    W_ext: float = 0.0
    f_int: np.ndarray | None = None
    f_ext: np.ndarray | None = None
    reaction: np.ndarray | None = None
    newton_trace: list = field(default_factory=list)

    def copy(self) -> "State":
        cp = lambda x: None if x is None else x.copy()
        return replace(self, d=self.d.copy(), v=self.v.copy(), a=self.a.copy(), f_int=cp(self.f_int),
                       f_ext=cp(self.f_ext), reaction=cp(self.reaction), newton_trace=list(self.newton_trace))


@dataclass(eq=False)
class System:
    tables: ShapeTables
    material: NeoHookean
    loads: LoadCase
    lumped: bool
    mass: object  # scalar mass: vector (lumped) or sparse matrix
    prescribed: np.ndarray
    groups: list
    free: np.ndarray
    fd_step: float | None = None
    _M: object = None
    _Mff: object = None

    @property
    def dim(self) -> int:
        return self.tables.dim

    @property
    def ndof(self) -> int:
        return self.tables.ndof

    @property
    def M(self):
        """Full (ndof x ndof) mass, diagonal vector when lumped."""
        if self._M is None:
            if self.lumped:
                self._M = np.repeat(self.mass, self.dim)
            else:
                self._M = sp.kron(self.mass, sp.identity(self.dim), format="csr")
        return self._M

    def mass_apply(self, x: np.ndarray) -> np.ndarray:
        return self.M * x if self.lumped else self.M @ x

    def _mff_solve(self, r):
        if self._Mff is None:
            f = self.free
            self._Mff = spla.splu(self.M[f][:, f].tocsc())
        return self._Mff.solve(r)

    def internal_force(self, d):
        return assembly.internal_force(self.tables, self.material, d)

    def internal_energy(self, d):
        return assembly.internal_energy(self.tables, self.material, d)

    def external_force(self, t: float) -> np.ndarray:
        return assembly.external_force(self.tables, self.loads, t, self.material.rho0)

    def prescribed_values(self, t: float) -> np.ndarray:
        out = np.empty(self.prescribed.size)
        pos = {d: i for i, d in enumerate(self.prescribed)}
        for dofs, curve in self.groups:
            out[[pos[d] for d in dofs]] = curve(t)
        return out

    def prescribed_rates(self, t: float, h: float) -> tuple[np.ndarray, np.ndarray]:
        v = np.empty(self.prescribed.size)
        a = np.empty(self.prescribed.size)
        pos = {d: i for i, d in enumerate(self.prescribed)}
        for dofs, curve in self.groups:
            idx = [pos[d] for d in dofs]
            v[idx], a[idx] = curve.rate(t, h)
        return v, a

    def accelerations(self, residual: np.ndarray, a_prescribed: np.ndarray) -> np.ndarray:
        """Solve M a = residual on free dofs given prescribed accelerations."""
        a = np.zeros(self.ndof)
        a[self.prescribed] = a_prescribed
        f = self.free
        if self.lumped:
            a[f] = residual[f] / self.M[f]
        else:
            r = residual[f] - (self.M[f][:, self.prescribed] @ a_prescribed if self.prescribed.size else 0.0)
            a[f] = self._mff_solve(r)
        return a


def build_system(tables: ShapeTables, material: NeoHookean, loads: LoadCase, lumped: bool = True,
                 dt: float | None = None) -> System:
    """Mass matrix, dof partition and load bookkeeping for a run.

    ``dt`` sets the step of the central differences that give prescribed
    velocities and accelerations, which keeps them consistent with the
    central-difference kinematics of the integrator.  Without it the step
    passed to each stepping call is used.
    """
    prescribed, groups = loads.prescribed(tables.mesh)
    for tr in loads.tractions:
        tr.unit_force(tables)
    mass = assembly.mass_matrix(tables, material.rho0, lumped=lumped)
    free = np.setdiff1d(np.arange(tables.ndof), prescribed)
    return System(tables, material, loads, lumped, mass, prescribed, groups, free, dt)


def _reaction(system: System, d_int, f_ext, a):
    r = np.zeros(system.ndof)
    p = system.prescribed
    if p.size:
        r[p] = (system.mass_apply(a) + d_int - f_ext)[p]
    return r


def _check_finite(state: State):
    for name in ("d", "v", "a"):
        x = getattr(state, name)
        if not np.all(np.isfinite(x)):
            bad = int(np.flatnonzero(~np.isfinite(x))[0])
            raise NonFiniteState(
                f"non-finite {name} at dof {bad} (t = {state.t:g}); the time step is probably above the stability limit"
            )


def apply_essential_bc(state: State, system: System, t: float, h: float | None = None) -> State:
    """Set prescribed dofs of d to their history values and v, a to its rates."""
    p = system.prescribed
    if p.size:
        h = h or system.fd_step
        if h is None:
            if any(len(set(c.values)) > 1 for _, c in system.groups):
                raise ValueError("finite-difference step unknown: pass h or build the system with dt")
            h = 1.0  # constant histories: rates vanish for any step
        state.d[p] = system.prescribed_values(t)
        state.v[p], state.a[p] = system.prescribed_rates(t, h)
    return state


def initial_state(system: System, t0: float = 0.0, h: float | None = None) -> State:
    """Rest state with consistent forces and accelerations at ``t0``.

    ``h`` defaults to the system's time step.
    """
    n = system.ndof
    st = State(np.zeros(n), np.zeros(n), np.zeros(n), t0)
    apply_essential_bc(st, system, t0, h)
    st.f_int = system.internal_force(st.d)
    st.f_ext = system.external_force(t0)
    st.a = system.accelerations(st.f_ext - st.f_int, st.a[system.prescribed])
    st.reaction = _reaction(system, st.f_int, st.f_ext, st.a)
    return st


def _accumulate(new: State, old: State):
    dd = new.d - old.d
    new.W_int = old.W_int + 0.5 * dd @ (old.f_int + new.f_int)
    g_old = old.f_ext + old.reaction
    g_new = new.f_ext + new.reaction
    new.W_ext = old.W_ext + 0.5 * dd @ (g_old + g_new)


def cd_step(state: State, system: System, dt: float) -> State:
    """One central-difference step from ``state.t`` to ``state.t + dt``."""
    if state.f_int is None:
        state = _refresh(state, system)
    h = system.fd_step or abs(dt)
    t1 = state.t + dt
    vh = state.v + 0.5 * dt * state.a
    new = State(state.d + dt * vh, vh.copy(), np.zeros_like(vh), t1)
    p = system.prescribed
    if p.size:
        new.d[p] = system.prescribed_values(t1)
    _check_finite(new)
    try:
        new.f_int = system.internal_force(new.d)
    except MaterialError as exc:
        # an explicit blow-up shows up as inverted elements long before overflow
        raise NonFiniteState(f"{exc} at t = {t1:g}; the time step is probably above the stability limit") from exc
    new.f_ext = system.external_force(t1)
    ap = system.prescribed_rates(t1, h)[1] if p.size else np.zeros(0)
    new.a = system.accelerations(new.f_ext - new.f_int, ap)
    new.v = vh + 0.5 * dt * new.a
    if p.size:
        new.v[p] = system.prescribed_rates(t1, h)[0]
    new.reaction = _reaction(system, new.f_int, new.f_ext, new.a)
    _check_finite(new)
    _accumulate(new, state)
    return new


def _refresh(state: State, system: System) -> State:
    state = state.copy()
    state.f_int = system.internal_force(state.d)
    state.f_ext = system.external_force(state.t)
    state.reaction = _reaction(system, state.f_int, state.f_ext, state.a)
    return state


# ---------------------------------------------------------------------------
# incremental minimization


def _target(state: State, dt: float):
    return dt * state.v + 0.25 * dt * dt * state.a


def _tangent(system: System, d1, dt: float, inertia: bool):
    K = assembly.tangent_stiffness(system.tables, system.material, d1)
    if inertia:
        M = sp.diags(system.M) if system.lumped else system.M
        K = K + 4.0 / dt**2 * M
    return K.tocsr()


def incremental_energy(dd: np.ndarray, state: State, system: System, dt: float, inertia: bool = True,
                       f_ext1: np.ndarray | None = None, with_hessian: bool = False, w0: float | None = None):
    """Incremental potential of a step and its gradient on free dofs.

    ``dd`` is the full increment (prescribed entries already set).  Returns
    ``(phi, grad)``; ``grad`` is the momentum residual
    ``M a^{n+1} + f_int^{n+1} - f_ext^{n+1}`` restricted to free dofs, and
    with ``with_hessian`` also the free-free tangent.
    """
    if f_ext1 is None:
        f_ext1 = system.external_force(state.t + dt)
    d1 = state.d + dd
    if w0 is None:
        w0 = system.internal_energy(state.d)
    w1 = system.internal_energy(d1)
    f_int1 = system.internal_force(d1)
    phi = (w1 - w0) - f_ext1 @ dd
    g = f_int1 - f_ext1
    if inertia:
        e = dd - _target(state, dt)
        Me = system.mass_apply(e)
        phi += 2.0 / dt**2 * (e @ Me)
        g = g + 4.0 / dt**2 * Me
    f = system.free
    if not with_hessian:
        return phi, g[f]
    return phi, g[f], _tangent(system, d1, dt, inertia)[f][:, f].tocsc()


def minimize_increment(state: State, system: System, dt: float, cfg: SolverConfig, dd0=None,
                       targets=None, f_ext1=None, rtol: float | None = None) -> np.ndarray:
    """Newton iteration with Armijo backtracking on the incremental potential.

    The start is the explicit predictor ``dt * v^{n+1/2}`` with inertia and,
    without inertia, the linearized response to the prescribed increment.
    ``targets`` and ``f_ext1`` override the prescribed values and external
    force at the end of the step.  With ``rtol`` the tolerance becomes at
    least ``rtol`` times the internal force norm at the start.  The residual norm of every iteration is
    recorded in ``state.newton_trace``.
    """
    t1 = state.t + dt
    if f_ext1 is None:
        f_ext1 = system.external_force(t1)
    p, f = system.prescribed, system.free
    if dd0 is None:
        dd = dt * (state.v + 0.5 * dt * state.a) if cfg.inertia else np.zeros(system.ndof)
    else:
        dd = np.array(dd0, dtype=float)
    if targets is None and p.size:
        targets = system.prescribed_values(t1)
    trace = state.newton_trace
    trace.clear()
    w0 = system.internal_energy(state.d)

    def energy(x, hess=False):
        return incremental_energy(x, state, system, dt, cfg.inertia, f_ext1, with_hessian=hess, w0=w0)

    if p.size:
        dp = targets - state.d[p]
        if not cfg.inertia and dd0 is None and np.any(dp != 0.0):
            dd[p] = 0.0
            _, g0 = energy(dd)
            K = _tangent(system, state.d + dd, dt, cfg.inertia)
            try:
                dd[f] -= spla.splu(K[f][:, f].tocsc()).solve(g0 + K[f][:, p] @ dp)
            except RuntimeError:
                raise NoConvergence("singular tangent in the predictor", float(np.linalg.norm(g0))) from None
        dd[p] = dp
    try:
        phi, g, H = energy(dd, True)
    except MaterialError as exc:
        raise NoConvergence(f"material failure at the predictor: {exc}") from None
    tol = cfg.newton_tol
    if rtol is not None:
        tol = max(tol, rtol * float(np.linalg.norm(system.internal_force(state.d + dd))))
    for it in range(cfg.newton_max_iters + 1):
        res = float(np.linalg.norm(g))
        trace.append(res)
        if res <= tol:
            return dd
        if it == cfg.newton_max_iters:
            break
        try:
            step = -spla.splu(H).solve(g)
        except RuntimeError:
            raise NoConvergence(f"singular tangent at Newton iteration {it}", res, trace) from None
        slope = g @ step
        if not slope < 0:
            step, slope = -g, -(g @ g)
        alpha = 1.0
        for _ in range(21):
            trial = dd.copy()
            trial[f] += alpha * step
            try:
                phi_t, g_t = energy(trial)
            except MaterialError:
                phi_t, g_t = np.inf, None
            # near convergence the potential drowns in round-off; a residual
            # decrease is then accepted as progress as well
            if phi_t <= phi + 1e-4 * alpha * slope or (
                g_t is not None and np.linalg.norm(g_t) <= (1 - 1e-4 * alpha) * res
            ):
                break
            alpha *= 0.5
        else:
            raise NoConvergence(f"line search failed at Newton iteration {it}", res, trace)
        dd = trial
        phi, g, H = energy(dd, True)
    raise NoConvergence(
        f"no convergence after {cfg.newton_max_iters} Newton iterations (residual {trace[-1]:.3e})",
        trace[-1], trace,
    )


def increment_step(state: State, system: System, dt: float, cfg: SolverConfig) -> State:
    """One step of the incremental-minimization integrator."""
    if state.f_int is None:
        state = _refresh(state, system)
    dd = minimize_increment(state, system, dt, cfg)
    t1 = state.t + dt
    new = State(state.d + dd, np.zeros_like(dd), np.zeros_like(dd), t1, newton_trace=list(state.newton_trace))
    new.f_int = system.internal_force(new.d)
    new.f_ext = system.external_force(t1)
    p = system.prescribed
    if cfg.inertia:
        new.a = 4.0 / dt**2 * (dd - dt * state.v) - state.a
        new.v = state.v + 0.5 * dt * (state.a + new.a)
        if p.size:
            h = system.fd_step or abs(dt)
            new.v[p], new.a[p] = system.prescribed_rates(t1, h)
    new.reaction = _reaction(system, new.f_int, new.f_ext, new.a)
    _check_finite(new)
    _accumulate(new, state)
    return new


def solve_static(system: System, t: float = 0.0, d0=None, rtol: float = 1e-12, max_iters: int = 30,
                 increments: int = 1) -> State:
    """Equilibrium f_int = f_ext at time ``t`` with prescribed dofs imposed.

    Loads and prescribed values are applied in ``increments`` equal steps.
    Each step converges when the free-dof residual drops below ``rtol``
    times the norm of the internal forces (reactions included).
    """
    n = system.ndof
    st = State(np.zeros(n) if d0 is None else np.array(d0, dtype=float), np.zeros(n), np.zeros(n), t)
    cfg = SolverConfig(dt=1.0, steps=1, mode="incremental_min", newton_tol=1e-300, newton_max_iters=max_iters,
                       inertia=False)
    g_end = system.prescribed_values(t) if system.prescribed.size else None
    f_end = system.external_force(t)
    g_start = st.d[system.prescribed].copy()
    trace = []
    for k in range(1, increments + 1):
        lam = k / increments
        targets = None if g_end is None else g_start + lam * (g_end - g_start)
        dd = minimize_increment(st, system, cfg.dt, cfg, targets=targets, f_ext1=lam * f_end, rtol=rtol)
        trace.extend(st.newton_trace)
        st.d = st.d + dd
    st.newton_trace = trace
    st.f_int = system.internal_force(st.d)
    st.f_ext = f_end
    st.reaction = _reaction(system, st.f_int, st.f_ext, st.a)
    return st


def march(state: State, system: System, cfg: SolverConfig, observer=None) -> State:
    """Advance ``cfg.steps`` steps; ``observer(step, state)`` sees every state."""
    if state.f_int is None:
        state = _refresh(state, system)
    if observer is not None:
        observer(0, state)
    step = cd_step if cfg.mode == "explicit_cd" else (lambda s, sys_, dt: increment_step(s, sys_, dt, cfg))
    for k in range(1, cfg.steps + 1):
        state = step(state, system, cfg.dt)
        if observer is not None:
            observer(k, state)
    return state


def energy_report(state: State, system: System) -> dict:
    W_kin = 0.5 * state.v @ system.mass_apply(state.v)
    return {
        "W_kin": float(W_kin),
        "W_int": float(state.W_int),
        "W_ext": float(state.W_ext),
        "balance": float(W_kin + state.W_int - state.W_ext),
    }


def stable_time_step(tables: ShapeTables, material: NeoHookean) -> float:
    """Estimate h_min / c_d with h_min the shortest element edge."""
    mesh = tables.mesh
    h = np.inf
    for kind, conn in zip(mesh.kinds, mesh.connectivity):
        x = mesh.nodes[list(conn)]
        for a, b in kind.edges:
            h = min(h, float(np.linalg.norm(x[a] - x[b])))
    return h / material.wave_speed()
