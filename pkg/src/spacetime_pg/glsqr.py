"""Generalized LSQR for ``B^T N^-1 B u = B^T N^-1 b`` preconditioned by ``M``.

Only ``M^-1`` and ``N^-1`` are applied, never their square roots. Vectors
can be anything supporting ``+``, ``-`` and scalar ``*``; inner products go
through :func:`spacetime_pg.system.inner`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .system import inner

BREAKDOWN_TOL = 1e-14


class Breakdown(ArithmeticError):
    """``Normalize`` got a vector of (numerically) zero S^-1-norm."""


class NonFiniteNorm(ArithmeticError):
    pass


class NumericalFailure(ArithmeticError):
    def __init__(self, message: str, iteration: int):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


def normalize(s, apply_Sinv: Callable, breakdown_tol: float = BREAKDOWN_TOL):
    """Return ``(S^-1 s / z, s / z, z)`` with ``z = sqrt(s^T S^-1 s)``."""
    s_hat = apply_Sinv(s)
    z2 = inner(s, s_hat)
    norm_s = math.sqrt(inner(s, s))
    if not math.isfinite(z2):
        raise NonFiniteNorm(f"non-finite norm {z2}")
    z = math.sqrt(max(z2, 0.0))
    if z == 0.0 or z <= breakdown_tol * norm_s:
        raise Breakdown(f"z = {z:.3e} for |s| = {norm_s:.3e}")
    return s_hat * (1.0 / z), s * (1.0 / z), z


@dataclass
class GlsqrState:
    i: int
    u: object
    d: object
    v_hat: object
    v: object
    w_hat: object
    w: object
    alpha: float
    beta: float
    rho: float
    delta: float
    gamma: float

    @property
    def residual(self) -> float:
        """``|delta_{i+1}| gamma_{i+1}``: M^-1-norm of the normal-equation residual."""
        return abs(self.delta) * self.gamma


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    residual_history: list[float] = field(default_factory=list)
    breakdown: bool = False


def solve(apply_B: Callable, apply_Bt: Callable, apply_Minv: Callable, apply_Ninv: Callable,
          b, tol: float = 1e-4, maxit: int = 100, callback: Callable | None = None,
          breakdown_tol: float = BREAKDOWN_TOL):
    """Run generalized LSQR from ``u = 0``.

    Stops when ``|delta_{i+1}| gamma_{i+1} <= tol * |delta_1| gamma_1``, after
    ``maxit`` iterations, or on breakdown (in which case the current step is
    completed with the broken-down quantity set to zero, which makes the
    residual estimate vanish). ``callback(state)`` is invoked after each step,
    including the initialization (``state.i == 0``).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if maxit < 1:
        raise ValueError("maxit must be at least 1")

    def norm(s, apply_Sinv, i):
        try:
            return normalize(s, apply_Sinv, breakdown_tol)
        except NonFiniteNorm as exc:
            raise NumericalFailure(str(exc), i) from exc

    def check(i, **scalars):
        for name, value in scalars.items():
            if not math.isfinite(value):
                raise NumericalFailure(f"{name} = {value}", i)

    try:
        v_hat, v, beta = norm(b, apply_Ninv, 0)
    except Breakdown:
        u = apply_Bt(b) * 0.0
        return u, SolveReport(0, 0.0, True, [0.0], breakdown=True)
    s = apply_Bt(v_hat)
    zero_u = s * 0.0
    try:
        w_hat, w, alpha = norm(s, apply_Minv, 0)
    except Breakdown:
        # B^T N^-1 b = 0: the minimizer is u = 0
        return zero_u, SolveReport(0, 0.0, True, [0.0], breakdown=True)
    check(0, alpha=alpha, beta=beta)
    d = zero_u
    rho = math.hypot(alpha, beta)
    u = zero_u
    delta, gamma = alpha, beta
    history = [abs(delta) * gamma]
    r0 = history[0]
    state = GlsqrState(0, u, d, v_hat, v, w_hat, w, alpha, beta, rho, delta, gamma)
    if callback is not None:
        callback(state)

    converged = False
    broke = False
    i = 0
    while i < maxit:
        i += 1
        d = w_hat - d * (alpha * beta / rho**2)
        try:
            v_hat, v, beta = norm(apply_B(w_hat) - v * alpha, apply_Ninv, i)
        except Breakdown:
            broke = True
            v_hat, v, beta = v_hat * 0.0, v * 0.0, 0.0
        try:
            w_hat, w, alpha = norm(apply_Bt(v_hat) - w * beta, apply_Minv, i)
        except Breakdown:
            broke = True
            w_hat, w, alpha = w_hat * 0.0, w * 0.0, 0.0
        rho = math.hypot(delta, beta)
        if rho == 0.0:
            raise NumericalFailure("rho vanished", i)
        u = u + d * (delta * gamma / rho**2)
        delta, gamma = -delta * alpha / rho, gamma * beta / rho
        check(i, alpha=alpha, beta=beta, rho=rho, delta=delta, gamma=gamma)
        history.append(abs(delta) * gamma)
        state = GlsqrState(i, u, d, v_hat, v, w_hat, w, alpha, beta, rho, delta, gamma)
        if callback is not None:
            callback(state)
        if history[-1] <= tol * r0 or broke:
            converged = True
            break
    return u, SolveReport(i, history[-1], converged, history, breakdown=broke)
