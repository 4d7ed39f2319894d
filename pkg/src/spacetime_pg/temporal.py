"""Temporal meshes and the one-dimensional temporal FEM matrices.

Trial functions in time are the hat functions on a mesh ``TE``; test
functions are the element indicators on ``TF``, which is ``TE`` or a
uniform refinement of it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linalg import as_csc


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class TemporalMesh:
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).ravel()
        if nodes.size < 2:
            raise MeshError("a temporal mesh needs at least two nodes")
        if nodes[0] != 0.0:
            raise MeshError(f"first temporal node must be 0, got {nodes[0]!r}")
        if not np.all(np.isfinite(nodes)) or np.any(np.diff(nodes) <= 0):
            raise MeshError("temporal nodes must be finite and strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, T: float, K: int) -> "TemporalMesh":
        nodes = T * np.arange(K + 1) / K
        nodes[-1] = T
        return cls(nodes)

    @classmethod
    def random(cls, T: float, K: int, seed: int) -> "TemporalMesh":
        """``T * sort([0, rand(K-1), 1])`` with a seeded PCG64 stream."""
        rng = np.random.default_rng(seed)
        inner = np.sort(rng.random(K - 1))
        return cls(T * np.concatenate(([0.0], inner, [1.0])))

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    @property
    def element_count(self) -> int:
        return self.nodes.size - 1

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def max_dt(self) -> float:
        return float(self.lengths.max())

    def __eq__(self, other):
        return isinstance(other, TemporalMesh) and np.array_equal(self.nodes, other.nodes)

    def __hash__(self):
        return hash(self.nodes.tobytes())


@dataclass(frozen=True)
class TemporalOperators:
    MtFE: sp.csc_matrix
    CtFE: sp.csc_matrix
    MtE: sp.csc_matrix
    AtE: sp.csc_matrix
    MtF: sp.csc_matrix
    TE: TemporalMesh
    TF: TemporalMesh
    nref: int

    @property
    def n_trial(self) -> int:
        return self.TE.nodes.size

    @property
    def n_test(self) -> int:
        return self.TF.element_count


def prolongation(K: int) -> sp.csc_matrix:
    """Hat-function prolongation from a mesh with K elements to its refinement."""
    rows, cols, vals = [], [], []
    for k in range(K + 1):
        rows.append(2 * k)
        cols.append(k)
        vals.append(1.0)
    for k in range(K):
        rows += [2 * k + 1, 2 * k + 1]
        cols += [k, k + 1]
        vals += [0.5, 0.5]
    return as_csc(sp.coo_matrix((vals, (rows, cols)), shape=(2 * K + 1, K + 1)))


def refine_uniform(mesh: TemporalMesh) -> tuple[TemporalMesh, sp.csc_matrix]:
    """Split every element at its midpoint; returns the new mesh and ``S``."""
    t = mesh.nodes
    fine = np.empty(2 * t.size - 1)
    fine[0::2] = t
    fine[1::2] = 0.5 * (t[:-1] + t[1:])
    return TemporalMesh(fine), prolongation(mesh.element_count)


def assemble_FE(TE: TemporalMesh, nref: int) -> tuple[sp.csc_matrix, sp.csc_matrix, TemporalMesh]:
    """Return ``(MtFE, CtFE, TF)`` with ``TF`` the ``nref``-fold refinement of ``TE``.

    For ``nref > 0`` the matrices on the refined trial mesh are computed
    recursively and pulled back through the prolongation.
    """
    if nref < 0:
        raise ValueError("nref must be nonnegative")
    K = TE.element_count
    if nref == 0:
        h = TE.lengths
        rows = np.repeat(np.arange(K), 2)
        cols = (np.arange(K)[:, None] + np.array([0, 1])).ravel()
        MtFE = sp.coo_matrix((np.repeat(h / 2, 2), (rows, cols)), shape=(K, K + 1))
        CtFE = sp.coo_matrix((np.tile([-1.0, 1.0], K), (rows, cols)), shape=(K, K + 1))
        return as_csc(MtFE), as_csc(CtFE), TE
    fine, S = refine_uniform(TE)
    MtFEs, CtFEs, TF = assemble_FE(fine, nref - 1)
    return as_csc(MtFEs @ S), as_csc(CtFEs @ S), TF


def assemble_E(TE: TemporalMesh) -> tuple[sp.csc_matrix, sp.csc_matrix]:
    """Temporal mass and stiffness matrices of the hat functions."""
    h = TE.lengths
    n = TE.nodes.size
    md = np.zeros(n)
    md[:-1] += h / 3
    md[1:] += h / 3
    ad = np.zeros(n)
    ad[:-1] += 1 / h
    ad[1:] += 1 / h
    MtE = sp.diags([h / 6, md, h / 6], [-1, 0, 1], shape=(n, n))
    AtE = sp.diags([-1 / h, ad, -1 / h], [-1, 0, 1], shape=(n, n))
    return as_csc(MtE), as_csc(AtE)


def assemble_F(TF: TemporalMesh) -> sp.csc_matrix:
    return as_csc(sp.diags(np.abs(TF.lengths)))


def temporal_operators(TE: TemporalMesh, nref: int) -> TemporalOperators:
    MtFE, CtFE, TF = assemble_FE(TE, nref)
    MtE, AtE = assemble_E(TE)
    return TemporalOperators(MtFE=MtFE, CtFE=CtFE, MtE=MtE, AtE=AtE,
                             MtF=assemble_F(TF), TE=TE, TF=TF, nref=nref)
