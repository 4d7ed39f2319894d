"""P1 finite elements in space (intervals in 1D, triangles in 2D).

Spatial functions are vectorized callables ``f(points) -> values`` with
``points`` of shape ``(n, dim)``; a scalar return value is broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .linalg import as_csc

SpatialFunction = Callable[[np.ndarray], np.ndarray]

MESH_FILES = ("coordinates", "elements", "dirichlet", "neumann")


class MeshError(ValueError):
    pass


class EvaluationError(ValueError):
    pass


def _facet_key(facet) -> tuple:
    return tuple(sorted(int(i) for i in facet))


@dataclass
class SpatialMesh:
    """Simplicial mesh with a Dirichlet/Neumann split of the boundary.

    All index arrays are 0-based. ``dirichlet`` and ``neumann`` hold boundary
    facets: single nodes in 1D, edges in 2D.
    """

    coordinates: np.ndarray
    elements: np.ndarray
    dirichlet: np.ndarray
    neumann: np.ndarray = field(default=None)

    def __post_init__(self):
        coords = np.asarray(self.coordinates, dtype=float)
        self.coordinates = coords.reshape(-1, 1) if coords.ndim == 1 else coords
        dim = self.coordinates.shape[1]
        if dim not in (1, 2):
            raise MeshError(f"only 1D and 2D meshes are supported, got dim={dim}")
        self.elements = np.asarray(self.elements, dtype=np.int64).reshape(-1, dim + 1)
        self.dirichlet = np.asarray(self.dirichlet, dtype=np.int64).reshape(-1, dim)
        if self.neumann is None:
            self.neumann = np.zeros((0, dim), dtype=np.int64)
        self.neumann = np.asarray(self.neumann, dtype=np.int64).reshape(-1, dim)
        self._validate()

    @property
    def dim(self) -> int:
        return self.coordinates.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.coordinates.shape[0]

    def _validate(self):
        n = self.n_nodes
        for name in ("elements", "dirichlet", "neumann"):
            arr = getattr(self, name)
            if arr.size and (arr.min() < 0 or arr.max() >= n):
                raise MeshError(f"{name} reference unknown nodes")
        measures = self._signed_measures()
        if self.dim == 2:
            flip = measures < 0
            self.elements[flip] = self.elements[flip][:, [0, 2, 1]]
            measures = np.abs(measures)
        elif np.any(measures < 0):
            flip = measures < 0
            self.elements[flip] = self.elements[flip][:, ::-1]
            measures = np.abs(measures)
        if np.any(measures <= 0):
            bad = int(np.flatnonzero(measures <= 0)[0])
            raise MeshError(f"element {bad} has zero measure")
        boundary = set(self.boundary_facets())
        dir_keys = [_facet_key(f) for f in self.dirichlet]
        neu_keys = [_facet_key(f) for f in self.neumann]
        for key in dir_keys + neu_keys:
            if key not in boundary:
                raise MeshError(f"facet {[k + 1 for k in key]} is not on the boundary")
        if set(dir_keys) & set(neu_keys):
            raise MeshError("a facet is marked both Dirichlet and Neumann")
        if not dir_keys:
            raise MeshError("the Dirichlet boundary must not be empty")
        if boundary - set(dir_keys) - set(neu_keys):
            raise MeshError("some boundary facets are neither Dirichlet nor Neumann")

    def _signed_measures(self) -> np.ndarray:
        p = self.coordinates[self.elements]
        if self.dim == 1:
            return p[:, 1, 0] - p[:, 0, 0]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def measures(self) -> np.ndarray:
        return np.abs(self._signed_measures())

    def boundary_facets(self) -> list[tuple]:
        """Facets that belong to exactly one element."""
        count: dict[tuple, int] = {}
        d = self.dim
        for el in self.elements:
            for i in range(d + 1):
                key = _facet_key(np.delete(el, i))
                count[key] = count.get(key, 0) + 1
        return [k for k, c in count.items() if c == 1]

    def dirichlet_nodes(self) -> np.ndarray:
        return np.unique(self.dirichlet)

    def free_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.dirichlet_nodes()] = False
        return np.flatnonzero(mask)

    def refine(self) -> "SpatialMesh":
        """Regular refinement: segments split in two, triangles in four."""
        if self.dim == 1:
            n = self.n_nodes
            mids = 0.5 * (self.coordinates[self.elements[:, 0]] + self.coordinates[self.elements[:, 1]])
            new = n + np.arange(len(self.elements))
            elements = np.concatenate([np.c_[self.elements[:, 0], new], np.c_[new, self.elements[:, 1]]])
            return SpatialMesh(np.vstack([self.coordinates, mids]), elements,
                               self.dirichlet, self.neumann)
        coords = [*self.coordinates]
        edge_mid: dict[tuple, int] = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in edge_mid:
                edge_mid[key] = len(coords)
                coords.append(0.5 * (self.coordinates[a] + self.coordinates[b]))
            return edge_mid[key]

        elements = []
        for a, b, c in self.elements:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            elements += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]

        def split(facets):
            out = []
            for a, b in facets:
                m = edge_mid[(min(a, b), max(a, b))]
                out += [(a, m), (m, b)]
            return np.array(out, dtype=np.int64).reshape(-1, 2)

        return SpatialMesh(np.array(coords), np.array(elements), split(self.dirichlet),
                           split(self.neumann))


def unit_interval(n: int, neumann_right: bool = False) -> SpatialMesh:
    """Uniform mesh of (0, 1) with ``n`` elements."""
    coords = np.linspace(0.0, 1.0, n + 1)[:, None]
    elements = np.c_[np.arange(n), np.arange(1, n + 1)]
    if neumann_right:
        return SpatialMesh(coords, elements, [[0]], [[n]])
    return SpatialMesh(coords, elements, [[0], [n]])


def generate_lshape(nrefine: int) -> SpatialMesh:
    """L-shaped domain (-1,1)^2 minus [0,1)^2, all-Dirichlet boundary."""
    coords = np.array([[-1, -1], [0, -1], [1, -1], [-1, 0], [0, 0], [1, 0], [-1, 1], [0, 1]],
                      dtype=float)
    elements = np.array([[0, 1, 4], [0, 4, 3], [1, 2, 5], [1, 5, 4], [3, 4, 7], [3, 7, 6]])
    boundary = [(0, 1), (1, 2), (2, 5), (5, 4), (4, 7), (7, 6), (6, 3), (3, 0)]
    mesh = SpatialMesh(coords, elements, boundary)
    for _ in range(nrefine):
        mesh = mesh.refine()
    return mesh


def unit_square(n: int) -> SpatialMesh:
    """Structured triangulation of (0,1)^2 with n x n squares, all-Dirichlet."""
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x, indexing="xy")
    coords = np.c_[X.ravel(), Y.ravel()]
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    elements = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = idx[j, i], idx[j, i + 1], idx[j + 1, i + 1], idx[j + 1, i]
            elements += [(a, b, c), (a, c, d)]
    ring = list(idx[0, :]) + list(idx[1:, -1]) + list(idx[-1, -2::-1]) + list(idx[-2:0:-1, 0])
    boundary = [(ring[k], ring[(k + 1) % len(ring)]) for k in range(len(ring))]
    return SpatialMesh(coords, np.array(elements), boundary)


# -- mesh files -------------------------------------------------------------

def _read_table(path: Path, ncols: tuple[int, ...], kind) -> list[list]:
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) not in ncols:
            raise MeshError(f"{path}:{lineno}: expected {' or '.join(map(str, ncols))} fields")
        try:
            rows.append([int(parts[0])] + [kind(p) for p in parts[1:]])
        except ValueError as exc:
            raise MeshError(f"{path}:{lineno}: {exc}") from exc
    return rows


def load_mesh(directory) -> SpatialMesh:
    """Read the ``coordinates``/``elements``/``dirichlet``/``neumann`` files.

    Ids in the files are 1-based; ``neumann`` may be absent.
    """
    directory = Path(directory)
    coords = _read_table(directory / "coordinates", (2, 3), float)
    if not coords:
        raise MeshError("no coordinates")
    dim = len(coords[0]) - 1
    ids: dict[int, int] = {}
    for row in coords:
        if len(row) != dim + 1:
            raise MeshError("mixed coordinate dimensions")
        if row[0] in ids:
            raise MeshError(f"duplicate node id {row[0]}")
        ids[row[0]] = len(ids)

    def lookup(rows, what):
        out = []
        for row in rows:
            try:
                out.append([ids[n] for n in row[1:]])
            except KeyError as exc:
                raise MeshError(f"{what} {row[0]} references unknown node {exc.args[0]}") from None
        return out

    elements = lookup(_read_table(directory / "elements", (dim + 2,), int), "element")
    dirichlet = lookup(_read_table(directory / "dirichlet", (dim + 1,), int), "dirichlet facet")
    neumann_path = directory / "neumann"
    neumann = lookup(_read_table(neumann_path, (dim + 1,), int), "neumann facet") if neumann_path.exists() else []
    return SpatialMesh(np.array([r[1:] for r in coords]), np.array(elements, dtype=np.int64),
                       np.array(dirichlet, dtype=np.int64), np.array(neumann, dtype=np.int64))


def save_mesh(mesh: SpatialMesh, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    def write(name, rows, fmt):
        text = "".join(f"{i} " + " ".join(fmt(v) for v in row) + "\n" for i, row in enumerate(rows, 1))
        with open(directory / name, "w", newline="\n") as fh:
            fh.write(text)

    write("coordinates", mesh.coordinates, lambda v: repr(float(v)))
    write("elements", mesh.elements + 1, str)
    write("dirichlet", mesh.dirichlet + 1, str)
    write("neumann", mesh.neumann + 1, str)


# -- assembly ---------------------------------------------------------------

@dataclass(frozen=True)
class SpatialOperators:
    Mx: sp.csc_matrix
    Ax: sp.csc_matrix
    free: np.ndarray
    mesh: SpatialMesh

    @property
    def size(self) -> int:
        return self.free.size

    def expand(self, values: np.ndarray) -> np.ndarray:
        """Insert zeros at Dirichlet nodes."""
        values = np.asarray(values)
        full = np.zeros((self.mesh.n_nodes,) + values.shape[1:], dtype=values.dtype)
        full[self.free] = values
        return full


def _evaluate(fn: SpatialFunction, points: np.ndarray, what: str) -> np.ndarray:
    try:
        values = np.broadcast_to(np.asarray(fn(points), dtype=float), (points.shape[0],))
    except Exception as exc:
        raise EvaluationError(f"evaluating {what} failed: {exc}") from exc
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise EvaluationError(f"{what} is not finite at point {points[bad[0]].tolist()} "
                              f"({what.split()[0]} index {bad[0]})")
    return values


def _element_gradients(mesh: SpatialMesh) -> np.ndarray:
    """Gradients of the barycentric coordinates, shape (E, d+1, d)."""
    p = mesh.coordinates[mesh.elements]
    d = mesh.dim
    J = (p[:, 1:, :] - p[:, :1, :]).transpose(0, 2, 1)  # (E, d, d) columns are edge vectors
    Jinv = np.linalg.inv(J)
    ref = np.vstack([-np.ones((1, d)), np.eye(d)])  # reference gradients, (d+1, d)
    return np.einsum("kd,edj->ekj", ref, Jinv)


def assemble_full(mesh: SpatialMesh, a: SpatialFunction = lambda x: 1.0):
    """Mass and stiffness matrices on all nodes (no Dirichlet elimination)."""
    d = mesh.dim
    vol = mesh.measures()
    centroids = mesh.coordinates[mesh.elements].mean(axis=1)
    coef = _evaluate(a, centroids, "element coefficient")
    if np.any(coef <= 0):
        bad = int(np.flatnonzero(coef <= 0)[0])
        raise ValueError(f"coefficient is not positive at centroid of element {bad}: {coef[bad]}")
    grads = _element_gradients(mesh)
    local_A = (coef * vol)[:, None, None] * np.einsum("eid,ejd->eij", grads, grads)
    # exact P1 mass: |K| * (1 + delta_ij) * d! / (d+2)!
    ref_mass = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) * factorial(d) / factorial(d + 2)
    local_M = vol[:, None, None] * ref_mass
    rows = np.repeat(mesh.elements, d + 1, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, d + 1)).ravel()
    n = mesh.n_nodes
    M = as_csc(sp.coo_matrix((local_M.ravel(), (rows, cols)), shape=(n, n)))
    A = as_csc(sp.coo_matrix((local_A.ravel(), (rows, cols)), shape=(n, n)))
    return M, A


def assemble_MA(mesh: SpatialMesh, a: SpatialFunction = lambda x: 1.0) -> SpatialOperators:
    free = mesh.free_nodes()
    if free.size == 0:
        raise MeshError("the mesh has no free (non-Dirichlet) nodes")
    M, A = assemble_full(mesh, a)
    return SpatialOperators(as_csc(M[free][:, free]), as_csc(A[free][:, free]), free, mesh)


def _facet_measures(mesh: SpatialMesh, facets: np.ndarray) -> np.ndarray:
    if mesh.dim == 1:
        return np.ones(len(facets))
    p = mesh.coordinates[facets]
    return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)


def assemble_load(mesh: SpatialMesh, f: SpatialFunction, g: SpatialFunction | None = None,
                  free: np.ndarray | None = None) -> np.ndarray:
    """One-point (centroid / facet midpoint) load vector, restricted to free nodes."""
    d = mesh.dim
    b = np.zeros(mesh.n_nodes)
    centroids = mesh.coordinates[mesh.elements].mean(axis=1)
    fv = _evaluate(f, centroids, "element source")
    np.add.at(b, mesh.elements.ravel(), np.repeat(mesh.measures() * fv / (d + 1), d + 1))
    if g is not None and len(mesh.neumann):
        mids = mesh.coordinates[mesh.neumann].mean(axis=1)
        gv = _evaluate(g, mids, "facet Neumann data")
        np.add.at(b, mesh.neumann.ravel(), np.repeat(_facet_measures(mesh, mesh.neumann) * gv / d, d))
    if free is None:
        free = mesh.free_nodes()
    return b[free]


# -- snapshots --------------------------------------------------------------

def export_snapshot(mesh: SpatialMesh, free: np.ndarray, values: np.ndarray, path) -> None:
    """Write ``id x [y] value`` lines; Dirichlet nodes get value 0."""
    full = np.zeros(mesh.n_nodes)
    full[free] = values
    lines = [f"{i} " + " ".join(repr(float(c)) for c in xy) + f" {float(v)!r}\n"
             for i, (xy, v) in enumerate(zip(mesh.coordinates, full), 1)]
    with open(path, "w", newline="\n") as fh:
        fh.write("".join(lines))


def read_snapshot(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, ndmin=2)
    return data[:, 1:-1], data[:, -1]
