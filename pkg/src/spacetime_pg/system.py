"""Matrix-free space-time operators for the heat equation.

Trial vectors are arrays of shape ``(nS, nTheta)`` (spatial dof x temporal
node); test vectors are :class:`TestVector` pairs. Every operator also
accepts a leading batch axis, which the diagnostics use to probe many
vectors at once.

With ``X w T^T`` standing for ``(T kron X) Vec(w)``, the operators are::

    B w      = (Mx w CtFE^T + Ax w MtFE^T,  Mx w[:, 0])
    N^-1 d   = (Ax^-1 d1 MtF^-1,  Mx^-1 d2)
    M^-1 w   = Vt-diagonalized sum of Re (Ax + i gamma Mx)^-1 solves
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .linalg import DimensionError, Factorization, as_csc, generalized_sym_eig
from .spatial import SpatialOperators, assemble_load
from .temporal import TemporalMesh, TemporalOperators

log = logging.getLogger(__name__)

IMAG_RESIDUAL_TOL = 1e-8
EIG_ZERO_TOL = 1e-12
GAMMA_DEDUP_TOL = 1e-12
DENSE_CAP = 5000


class NumericalHealthError(RuntimeError):
    pass


class CapExceededError(RuntimeError):
    pass


@dataclass
class TestVector:
    """Test-side vector ``(d1, d2)``; ``d1`` is ``(nS, nXi)``, ``d2`` is ``(nS,)``."""

    __test__ = False  # not a pytest class

    d1: np.ndarray
    d2: np.ndarray

    def __add__(self, other):
        return TestVector(self.d1 + other.d1, self.d2 + other.d2)

    def __sub__(self, other):
        return TestVector(self.d1 - other.d1, self.d2 - other.d2)

    def __mul__(self, s):
        return TestVector(self.d1 * s, self.d2 * s)

    __rmul__ = __mul__

    def __truediv__(self, s):
        return TestVector(self.d1 / s, self.d2 / s)

    def __neg__(self):
        return TestVector(-self.d1, -self.d2)

    @classmethod
    def zeros(cls, nS: int, nXi: int) -> "TestVector":
        return cls(np.zeros((nS, nXi)), np.zeros(nS))

    def dot(self, other: "TestVector") -> float:
        return float(np.vdot(self.d1, other.d1) + np.vdot(self.d2, other.d2))

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))


def inner(a, b) -> float:
    """Euclidean inner product of two trial or two test vectors."""
    if isinstance(a, TestVector):
        return a.dot(b)
    return float(np.vdot(a, b))


def vec(w: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization, batched over leading axes."""
    return np.swapaxes(w, -1, -2).reshape(w.shape[:-2] + (-1,))


def unvec(v: np.ndarray, nS: int, nT: int) -> np.ndarray:
    return np.swapaxes(v.reshape(v.shape[:-1] + (nT, nS)), -1, -2)


def vec_test(d: TestVector) -> np.ndarray:
    return np.concatenate([vec(d.d1), d.d2], axis=-1)


def unvec_test(v: np.ndarray, nS: int, nXi: int) -> TestVector:
    n1 = nS * nXi
    return TestVector(unvec(v[..., :n1], nS, nXi), v[..., n1:])


def _lmul(X, W: np.ndarray) -> np.ndarray:
    """Apply sparse ``X`` along the spatial axis (-2) of ``W``."""
    Wm = np.moveaxis(W, -2, 0)
    R = X @ Wm.reshape(Wm.shape[0], -1)
    return np.moveaxis(np.asarray(R).reshape((X.shape[0],) + Wm.shape[1:]), 0, -2)


def _lsolve(F: Factorization, W: np.ndarray) -> np.ndarray:
    Wm = np.moveaxis(W, -2, 0)
    R = F.solve(Wm.reshape(Wm.shape[0], -1))
    return np.moveaxis(R.reshape(Wm.shape), 0, -2)


def _rmul(W: np.ndarray, T) -> np.ndarray:
    """``W @ T^T`` along the last axis, ``T`` sparse."""
    R = W.reshape(-1, W.shape[-1]) @ T.T
    return np.asarray(R).reshape(W.shape[:-1] + (T.shape[0],))


# -- quadrature ---------------------------------------------------------------

QuadratureRule = Callable[[float, float], "tuple[np.ndarray, np.ndarray]"]


def trapz(a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    L = b - a
    if not L > 0:
        raise ValueError(f"quadrature interval [{a}, {b}] has no positive length")
    return np.array([a, b]), np.array([L / 2, L / 2])


def gauss2(a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    L = b - a
    if not L > 0:
        raise ValueError(f"quadrature interval [{a}, {b}] has no positive length")
    m, r = 0.5 * (a + b), L / (2 * np.sqrt(3.0))
    return np.array([m - r, m + r]), np.array([L / 2, L / 2])


QUADRATURE_RULES = {"trapz": trapz, "gauss2": gauss2}


def assemble_spacetime_load(spatial: SpatialOperators, TF: TemporalMesh, f, g, h,
                            rule: QuadratureRule = trapz, workers: int = 1) -> TestVector:
    """Load vector ``(b1, b2)``.

    ``f(t)`` and ``g(t)`` return spatial functions (``g`` may be ``None``);
    ``h`` is the initial datum. Column ``k`` of ``b1`` applies ``rule`` on the
    k-th element of ``TF``.
    """
    mesh, free = spatial.mesh, spatial.free
    b2 = assemble_load(mesh, h, None, free)
    t = TF.nodes

    def column(k):
        col = np.zeros(free.size)
        nodes, weights = rule(t[k], t[k + 1])
        for tr, wr in zip(nodes, weights):
            try:
                col += wr * assemble_load(mesh, f(tr), None if g is None else g(tr), free)
            except ValueError as exc:
                raise type(exc)(f"temporal element {k}, quadrature node t={tr!r}: {exc}") from exc
        return col

    K = TF.element_count
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            cols = list(pool.map(column, range(K)))
    else:
        cols = [column(k) for k in range(K)]
    b1 = np.column_stack(cols) if cols else np.zeros((free.size, 0))
    return TestVector(b1, b2)


# -- the system -----------------------------------------------------------------

@dataclass(frozen=True)
class Preconditioner:
    Vt: np.ndarray
    gamma: np.ndarray
    groups: list  # (gamma value, column indices, factorization)


@dataclass(frozen=True)
class Diagnostics:
    cond: float
    lambda_min: float
    lambda_max: float
    kappa_h: float
    cfl_h: float


class SpaceTimeSystem:
    """Kronecker-structured Petrov-Galerkin system on ``E x V_h`` / ``(F x V_h) x V_h``."""

    def __init__(self, spatial: SpatialOperators, temporal: TemporalOperators,
                 workers: int = 1, build: bool = True):
        self.spatial = spatial
        self.temporal = temporal
        self.workers = max(1, int(workers))
        self.Mx = spatial.Mx
        self.Ax = spatial.Ax
        self.Mx_fact = Factorization(self.Mx, spd=True)
        self.Ax_fact = Factorization(self.Ax, spd=True)
        self.MtF_lengths = temporal.MtF.diagonal()
        self.preconditioner: Preconditioner | None = None
        if build:
            self.build_preconditioner()

    @property
    def nS(self) -> int:
        return self.Mx.shape[0]

    @property
    def nTheta(self) -> int:
        return self.temporal.n_trial

    @property
    def nXi(self) -> int:
        return self.temporal.n_test

    @property
    def trial_shape(self) -> tuple[int, int]:
        return (self.nS, self.nTheta)

    def _check_trial(self, w):
        w = np.asarray(w, dtype=float)
        if w.shape[-2:] != self.trial_shape:
            raise DimensionError(f"trial vector must be {self.trial_shape}, got {w.shape}")
        return w

    def _check_test(self, d: TestVector):
        if d.d1.shape[-2:] != (self.nS, self.nXi) or d.d2.shape[-1] != self.nS:
            raise DimensionError(
                f"test vector must be ({self.nS}, {self.nXi}) + ({self.nS},), "
                f"got {d.d1.shape} + {d.d2.shape}")

    # -- operators ----------------------------------------------------------

    def apply_B(self, w: np.ndarray) -> TestVector:
        w = self._check_trial(w)
        T = self.temporal
        d1 = _rmul(_lmul(self.Mx, w), T.CtFE) + _rmul(_lmul(self.Ax, w), T.MtFE)
        d2 = _lmul(self.Mx, w[..., :, :1])[..., 0]
        return TestVector(d1, d2)

    def apply_Bt(self, v: TestVector) -> np.ndarray:
        self._check_test(v)
        T = self.temporal
        out = _rmul(_lmul(self.Mx.T, v.d1), T.CtFE.T) + _rmul(_lmul(self.Ax.T, v.d1), T.MtFE.T)
        out[..., :, 0] += _lmul(self.Mx.T, v.d2[..., :, None])[..., 0]
        return out

    def apply_Ninv(self, d: TestVector) -> TestVector:
        self._check_test(d)
        d1 = _lsolve(self.Ax_fact, d.d1 / self.MtF_lengths)
        d2 = _lsolve(self.Mx_fact, d.d2[..., :, None])[..., 0]
        return TestVector(d1, d2)

    def apply_N(self, d: TestVector) -> TestVector:
        self._check_test(d)
        return TestVector(_lmul(self.Ax, d.d1 * self.MtF_lengths), _lmul(self.Mx, d.d2[..., :, None])[..., 0])

    def _dual_spatial(self, W: np.ndarray) -> np.ndarray:
        """``Mx Ax^-1 Mx`` along the spatial axis."""
        return _lmul(self.Mx, _lsolve(self.Ax_fact, _lmul(self.Mx, W)))

    def apply_M(self, w: np.ndarray) -> np.ndarray:
        """Forward trial norm operator ``MtE kron Ax + AtE kron Mx Ax^-1 Mx``."""
        w = self._check_trial(w)
        T = self.temporal
        return _rmul(_lmul(self.Ax, w), T.MtE) + _rmul(self._dual_spatial(w), T.AtE)

    def build_preconditioner(self) -> None:
        T = self.temporal
        Vt, d = generalized_sym_eig(T.AtE.toarray(), T.MtE.toarray())
        # AtE annihilates constants; its rounding-level eigenvalue is an exact zero
        d = np.where(d <= EIG_ZERO_TOL * max(abs(d).max(), 1.0), 0.0, d)
        gamma = np.sqrt(d)
        tol = GAMMA_DEDUP_TOL * max(gamma.max(), 1.0)
        groups = []
        order = np.argsort(gamma, kind="stable")
        start = 0
        while start < order.size:
            stop = start + 1
            while stop < order.size and gamma[order[stop]] - gamma[order[start]] <= tol:
                stop += 1
            g = float(gamma[order[start]])
            cols = np.sort(order[start:stop])
            if g == 0.0:
                fact = self.Ax_fact
            else:
                fact = Factorization(as_csc(self.Ax + 1j * g * self.Mx))
            groups.append((g, cols, fact))
            start = stop
        self.preconditioner = Preconditioner(Vt=Vt, gamma=gamma, groups=groups)

    def _helmholtz_block(self, g: float, fact: Factorization, C: np.ndarray) -> np.ndarray:
        Z = fact.solve(C)
        if g == 0.0:
            return Z
        imag_res = self.Ax @ Z.imag + g * (self.Mx @ Z.real)
        bound = IMAG_RESIDUAL_TOL * max(np.linalg.norm(C), np.finfo(float).tiny)
        if np.linalg.norm(imag_res) > bound:
            raise NumericalHealthError(
                f"imaginary residual {np.linalg.norm(imag_res):.3e} of the shifted solve "
                f"(gamma={g:.6g}) exceeds {bound:.3e}")
        return Z.real

    def apply_Minv(self, w: np.ndarray) -> np.ndarray:
        w = self._check_trial(w)
        if self.preconditioner is None:
            self.build_preconditioner()
        P = self.preconditioner
        W1 = w @ P.Vt
        W2 = np.empty_like(W1)

        def work(group):
            g, cols, fact = group
            block = np.moveaxis(W1[..., :, cols], -2, 0)
            shape = block.shape
            Z = self._helmholtz_block(g, fact, block.reshape(shape[0], -1))
            return cols, np.moveaxis(Z.reshape(shape), 0, -2)

        if self.workers > 1 and len(P.groups) > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                results = list(pool.map(work, P.groups))
        else:
            results = [work(group) for group in P.groups]
        for cols, block in results:
            W2[..., :, cols] = block
        return W2 @ P.Vt.T

    def load(self, f, g, h, rule: QuadratureRule = trapz) -> TestVector:
        return assemble_spacetime_load(self.spatial, self.temporal.TF, f, g, h, rule, self.workers)

    # -- norms and dense probes -------------------------------------------------

    def x_norm(self, w: np.ndarray) -> float:
        return float(np.sqrt(max(inner(w, self.apply_M(w)), 0.0)))

    def dense(self, op: Callable, chunk: int = 256) -> np.ndarray:
        """Dense matrix (Vec ordering) of a linear map from trial vectors to trial vectors."""
        nS, nT = self.trial_shape
        n = nS * nT
        out = np.empty((n, n))
        for start in range(0, n, chunk):
            stop = min(n, start + chunk)
            E = np.zeros((stop - start, n))
            E[np.arange(stop - start), np.arange(start, stop)] = 1.0
            out[:, start:stop] = vec(op(unvec(E, nS, nT))).T
        return out

    def normal_operator(self, w: np.ndarray) -> np.ndarray:
        return self.apply_Bt(self.apply_Ninv(self.apply_B(w)))

    def diagnostics(self, cap: int = DENSE_CAP, lanczos: bool = False) -> Diagnostics:
        """Condition number of ``M^-1 B^T N^-1 B`` and the discrete kappa_h / CFL_h.

        kappa_h and CFL_h use the discrete dual norm ``chi^T Mx Ax^-1 Mx chi``
        as a stand-in for the continuous ``V'`` norm.
        """
        nS, nT = self.trial_shape
        n = nS * nT
        if n <= cap:
            G = self.dense(self.normal_operator)
            P = self.dense(self.apply_Minv)
            L = np.linalg.cholesky(0.5 * (P + P.T))
            C = L.T @ G @ L
            lam = scipy.linalg.eigvalsh(0.5 * (C + C.T))
            lmin, lmax = float(lam[0]), float(lam[-1])
        elif lanczos:
            lmin, lmax = self._lanczos_extremes()
        else:
            raise CapExceededError(f"{n} trial unknowns exceed the dense cap {cap}; enable Lanczos")
        kappa_h, cfl_h = self.self_duality()
        return Diagnostics(cond=lmax / lmin, lambda_min=lmin, lambda_max=lmax,
                           kappa_h=kappa_h, cfl_h=cfl_h)

    def _lanczos_extremes(self) -> tuple[float, float]:
        nS, nT = self.trial_shape
        n = nS * nT

        def wrap(op):
            return spla.LinearOperator((n, n), matvec=lambda v: vec(op(unvec(np.ravel(v), nS, nT))),
                                       dtype=float)

        G, M, Minv = wrap(self.normal_operator), wrap(self.apply_M), wrap(self.apply_Minv)
        lmax = spla.eigsh(G, k=1, M=M, Minv=Minv, which="LA", return_eigenvectors=False)[0]
        lmin = spla.eigsh(G, k=1, M=M, Minv=Minv, which="SA", return_eigenvectors=False)[0]
        return float(lmin), float(lmax)

    def self_duality(self) -> tuple[float, float]:
        """Extreme eigenvalues of ``Ax v = lam (Mx Ax^-1 Mx) v`` turned into kappa_h, CFL_h."""
        Mx = self.Mx.toarray()
        S = Mx @ self.Ax_fact.solve(Mx)
        _, lam = generalized_sym_eig(self.Ax.toarray(), 0.5 * (S + S.T))
        lam = np.maximum(lam, 0.0)
        return float(np.sqrt(lam[0])), float(self.temporal.TE.max_dt * np.sqrt(lam[-1]))
