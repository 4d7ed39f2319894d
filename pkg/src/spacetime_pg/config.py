"""Problem configuration: INI-style ``key = value`` text with sections.

Example::

    [problem]
    T = 20
    f = sin(t)
    g = 0
    h = 0
    a = 1

    [temporal]
    K = 100
    spacing = random
    seed = 0
    nref = 1
    quadrature = trapz

    [mesh]
    builtin = lshape 2

    [solver]
    tol = 0.0001
    maxit = 100
    threads = 1

    [output]
    snapshots = 0 1 2 3 4 5
    dir = out
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .expressions import Expression
from .spatial import SpatialMesh, generate_lshape, load_mesh, unit_interval, unit_square
from .system import QUADRATURE_RULES
from .temporal import TemporalMesh


class ConfigError(ValueError):
    pass


SPACINGS = ("uniform", "random", "explicit")
BUILTIN_MESHES = {"interval": unit_interval, "lshape": generate_lshape, "square": unit_square}


@dataclass
class ProblemConfig:
    T: float = 20.0
    f: str = "sin(t)"
    g: str = "0"
    h: str = "0"
    a: str = "1"
    K: int = 100
    spacing: str = "random"
    seed: int = 0
    nodes: list[float] = field(default_factory=list)
    nref: int = 1
    quadrature: str = "trapz"
    mesh: str = "lshape 2"
    mesh_path: str = ""
    tol: float = 1e-4
    maxit: int = 100
    threads: int = 1
    snapshots: list[float] = field(default_factory=lambda: [0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
    out: str = "out"

    def validate(self) -> "ProblemConfig":
        if not self.T > 0:
            raise ConfigError("T must be positive")
        if self.spacing not in SPACINGS:
            raise ConfigError(f"spacing must be one of {SPACINGS}")
        if self.spacing == "explicit":
            if len(self.nodes) < 2:
                raise ConfigError("explicit spacing needs at least two nodes")
            self.K = len(self.nodes) - 1
        if self.K < 1:
            raise ConfigError("K must be at least 1")
        if self.nref < 0:
            raise ConfigError("nref must be nonnegative")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.maxit < 1:
            raise ConfigError("maxit must be at least 1")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.quadrature not in QUADRATURE_RULES:
            raise ConfigError(f"quadrature must be one of {tuple(QUADRATURE_RULES)}")
        if any(not 0 <= s <= self.T for s in self.snapshots):
            raise ConfigError(f"snapshot times must lie in [0, {self.T}]")
        if not self.mesh_path:
            name, _, arg = self.mesh.partition(" ")
            if name not in BUILTIN_MESHES or not arg.strip().isdigit():
                raise ConfigError(f"unknown builtin mesh {self.mesh!r}; "
                                  f"use one of {tuple(BUILTIN_MESHES)} followed by a count")
        for key in ("f", "g", "h", "a"):
            expr = self.expression(key)
            allowed = {"x", "y"} if key in ("h", "a") else {"t", "x", "y"}
            extra = expr.variables - allowed
            if extra:
                raise ConfigError(f"{key} may not depend on {sorted(extra)}")
        return self

    def expression(self, key: str) -> Expression:
        try:
            return Expression(getattr(self, key))
        except ValueError as exc:
            raise ConfigError(f"{key} = {getattr(self, key)!r}: {exc}") from exc

    def temporal_mesh(self) -> TemporalMesh:
        if self.spacing == "uniform":
            return TemporalMesh.uniform(self.T, self.K)
        if self.spacing == "random":
            return TemporalMesh.random(self.T, self.K, self.seed)
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes[-1] != self.T:
            raise ConfigError(f"explicit nodes must end at T = {self.T}")
        return TemporalMesh(nodes)

    def spatial_mesh(self) -> SpatialMesh:
        if self.mesh_path:
            return load_mesh(self.mesh_path)
        name, _, arg = self.mesh.partition(" ")
        return BUILTIN_MESHES[name](int(arg))

    def replace(self, **changes) -> "ProblemConfig":
        return dataclasses.replace(self, **changes).validate()


_LAYOUT = {
    "problem": ("T", "f", "g", "h", "a"),
    "temporal": ("K", "spacing", "seed", "nodes", "nref", "quadrature"),
    "mesh": ("builtin", "path"),
    "solver": ("tol", "maxit", "threads"),
    "output": ("snapshots", "dir"),
}
_ALIASES = {("mesh", "builtin"): "mesh", ("mesh", "path"): "mesh_path", ("output", "dir"): "out"}


def _format(value) -> str:
    if isinstance(value, list):
        return " ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize(config: ProblemConfig) -> str:
    lines = []
    for section, keys in _LAYOUT.items():
        lines.append(f"[{section}]")
        for key in keys:
            attr = _ALIASES.get((section, key), key)
            lines.append(f"{key} = {_format(getattr(config, attr))}")
        lines.append("")
    return "\n".join(lines)


def parse_config(text: str) -> ProblemConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    types = {f.name: f.type for f in dataclasses.fields(ProblemConfig)}
    values = {}
    for section in parser.sections():
        if section not in _LAYOUT:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _LAYOUT[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            attr = _ALIASES.get((section, key), key)
            kind = types[attr]
            try:
                if kind == "float":
                    values[attr] = float(raw)
                elif kind == "int":
                    values[attr] = int(raw)
                elif kind.startswith("list"):
                    values[attr] = [float(v) for v in raw.replace(",", " ").split()]
                else:
                    values[attr] = raw.strip()
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc
    if "mesh_path" in values and values["mesh_path"] and "mesh" not in values:
        values["mesh"] = ""
    return ProblemConfig(**values).validate()


def load_config(path) -> ProblemConfig:
    text = Path(path).read_text()
    config = parse_config(text)
    if config.mesh_path and not Path(config.mesh_path).is_absolute():
        config.mesh_path = str(Path(path).parent / config.mesh_path)
    return config
