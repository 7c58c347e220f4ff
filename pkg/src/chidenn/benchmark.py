"""Notched-plate accuracy benchmark built on the bundled ``notch_ramp`` scenario.

The scenario file fixes geometry, material, loading and the monitored node;
:data:`NOTCH_VARIANTS` only overrides the discretization, time step and mass
treatment.  The reference is plain FE on the same geometry refined four
times per direction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .adaptivity import build_bases, hybrid_shape_tables
from .dynamics import build_system, cd_step, initial_state
from .fields import nodal_field
from .scenario import Scenario, bundled_scenario, load_scenario

__all__ = ["NOTCH_VARIANTS", "RAMP_TIME", "MonitoredRun", "notch_scenario", "run_monitored", "relative_errors"]

RAMP_TIME = 0.06

NOTCH_VARIANTS = {
    "reference": {"mesh": {"generator": "notched_plate", "refinement": 4},
                  "enrichment": {"default": "plain_fe", "regions": {}},
                  "solver": {"dt": 4e-5, "mass": "lumped"}},
    "fem": {"enrichment": {"default": "plain_fe", "regions": {}}, "solver": {"dt": 1.5e-4, "mass": "lumped"}},
    "full": {"enrichment": {"default": "chidenn", "regions": {}}, "solver": {"dt": 6e-5, "mass": "consistent"}},
    "hybrid": {"enrichment": {"default": "plain_fe", "regions": {"notch": "chidenn"}},
               "solver": {"dt": 6e-5, "mass": "consistent"}},
}


@dataclass
class MonitoredRun:
    """Monitored-node samples of one run.

    ``values`` columns follow the scenario's first monitor (u_x, u_y,
    von_mises for ``notch_ramp``).  ``per_step`` is wall-clock seconds per
    time step excluding sampling; ``setup`` covers patch bases, shape
    tables and mass.
    """

    name: str
    t: np.ndarray
    values: np.ndarray
    per_step: float
    setup: float
    steps: int

    def final(self) -> np.ndarray:
        return self.values[-1]


def notch_scenario(variant: str, t_end: float = RAMP_TIME) -> Scenario:
    """The bundled notch scenario with a variant's overrides, marched to ``t_end``."""
    over = {k: dict(v) for k, v in NOTCH_VARIANTS[variant].items()}
    over["solver"]["t_end"] = t_end
    over["solver"].pop("steps", None)
    return load_scenario(bundled_scenario("notch_ramp"), over)


def run_monitored(sc: Scenario, samples: int = 20, name: str | None = None) -> MonitoredRun:
    """March ``sc`` with central differences and sample its first monitor ``samples`` times."""
    t0 = time.perf_counter()
    tables = hybrid_shape_tables(sc.mesh, sc.enrichment, build_bases(sc.mesh, sc.enrichment))
    system = build_system(tables, sc.material, sc.loads, lumped=sc.mass != "consistent", dt=sc.solver.dt)
    setup = time.perf_counter() - t0
    mon = sc.monitors[0]
    dim = sc.mesh.dimension

    def sample(st):
        out = []
        for q in mon.quantities:
            if q.startswith("u_"):
                out.append(st.d.reshape(-1, dim)[mon.node, "xyz".index(q[-1])])
            elif q.startswith("v_"):
                out.append(st.v.reshape(-1, dim)[mon.node, "xyz".index(q[-1])])
            else:
                out.append(nodal_field(tables, sc.material, st.d, q)[mon.node])
        return out

    n = sc.solver.steps
    every = max(1, n // samples)
    state = initial_state(system)
    ts, rows, marching = [state.t], [sample(state)], 0.0
    for k in range(1, n + 1):
        s = time.perf_counter()
        state = cd_step(state, system, sc.solver.dt)
        marching += time.perf_counter() - s
        if k % every == 0 or k == n:
            ts.append(state.t)
            rows.append(sample(state))
    return MonitoredRun(name or sc.name, np.array(ts), np.array(rows), marching / n, setup, n)


def relative_errors(run: MonitoredRun, reference: MonitoredRun) -> np.ndarray:
    """|run - reference| / |reference| per monitored quantity at the final time."""
    if not np.isclose(run.t[-1], reference.t[-1]):
        raise ValueError(f"final times differ: {run.t[-1]} vs {reference.t[-1]}")
    ref = reference.final()
    return np.abs(run.final() - ref) / np.abs(ref)
