"""Crank-Nicolson time stepping on the same spatial and temporal discretization."""

from __future__ import annotations

import numpy as np

from .linalg import Factorization, as_csc
from .spatial import SpatialOperators, assemble_load
from .temporal import TemporalMesh

STEP_DEDUP_TOL = 1e-12


def solve_cn(spatial: SpatialOperators, TE: TemporalMesh, f, g, h) -> np.ndarray:
    """Nodal values ``u[:, k] ~ u(t_k)``, shape ``(nS, K+1)``.

    The initial value is the L2 projection of ``h``; each step solves
    ``(Mx + dt/2 Ax) u1 = (Mx - dt/2 Ax) u0 + dt/2 (F0 + F1)``.
    """
    Mx, Ax = spatial.Mx, spatial.Ax
    mesh, free = spatial.mesh, spatial.free
    t = TE.nodes
    u = np.empty((spatial.size, t.size))
    u[:, 0] = Factorization(Mx, spd=True).solve(assemble_load(mesh, h, None, free))

    def F(tk):
        return assemble_load(mesh, f(tk), None if g is None else g(tk), free)

    steps: list[tuple[float, Factorization]] = []

    def stepper(dt):
        for dt0, fact in steps:
            if abs(dt - dt0) <= STEP_DEDUP_TOL * dt0:
                return dt0, fact
        fact = Factorization(as_csc(Mx + 0.5 * dt * Ax), spd=True)
        steps.append((dt, fact))
        return dt, fact

    Fk = F(t[0])
    for k in range(t.size - 1):
        dt, fact = stepper(t[k + 1] - t[k])
        Fk1 = F(t[k + 1])
        rhs = Mx @ u[:, k] - 0.5 * dt * (Ax @ u[:, k]) + 0.5 * dt * (Fk + Fk1)
        u[:, k + 1] = fact.solve(rhs)
        Fk = Fk1
    return u
