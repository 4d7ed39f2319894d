import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spacetime_pg.config import ConfigError, ProblemConfig, load_config, parse_config, serialize
from spacetime_pg.experiments import interpolate_in_time
from spacetime_pg.temporal import TemporalMesh

SAMPLE = """\
[problem]
T = 2
f = sin(t)*x
g = 0
h = x*(1-x)
a = 1 + x^2

[temporal]
K = 7
spacing = uniform
nref = 0
quadrature = gauss2

[mesh]
builtin = interval 8

[solver]
tol = 1e-8
maxit = 40

[output]
snapshots = 0, 0.5, 2
"""


def test_parse_sample():
    c = parse_config(SAMPLE)
    assert (c.T, c.K, c.nref, c.quadrature, c.tol, c.maxit) == (2.0, 7, 0, "gauss2", 1e-8, 40)
    assert c.snapshots == [0.0, 0.5, 2.0]
    assert c.spatial_mesh().n_nodes == 9
    assert c.temporal_mesh() == TemporalMesh.uniform(2.0, 7)


def test_defaults():
    c = ProblemConfig().validate()
    assert (c.T, c.K, c.tol, c.maxit, c.nref, c.f) == (20.0, 100, 1e-4, 100, 1, "sin(t)")
    assert c.snapshots == [0, 1, 2, 3, 4, 5]


def test_round_trip_idempotent():
    once = serialize(parse_config(SAMPLE))
    assert serialize(parse_config(once)) == once
    assert parse_config(once) == parse_config(SAMPLE)
    assert "\r" not in once


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 100), st.integers(1, 500), st.integers(0, 3), st.integers(0, 2**31),
       st.sampled_from(["uniform", "random"]), st.floats(1e-14, 1e-1))
def test_round_trip_property(T, K, nref, seed, spacing, tol):
    c = ProblemConfig(T=T, K=K, nref=nref, seed=seed, spacing=spacing, tol=tol, snapshots=[0.0, T])
    text = serialize(c.validate())
    again = parse_config(text)
    assert again == c and serialize(again) == text


def test_explicit_nodes():
    c = parse_config("[problem]\nT = 1\n[temporal]\nspacing = explicit\nnodes = 0 0.25 1\n"
                     "[output]\nsnapshots = 0 1\n")
    assert c.K == 2 and np.array_equal(c.temporal_mesh().nodes, [0, 0.25, 1])


def test_random_spacing_reproducible():
    c = ProblemConfig(T=3.0, K=9, seed=4, snapshots=[0.0]).validate()
    assert c.temporal_mesh() == c.temporal_mesh()
    assert c.temporal_mesh() != c.replace(seed=5).temporal_mesh()


@pytest.mark.parametrize("text, fragment", [
    ("[problem]\nT = -1\n", "T must be positive"),
    ("[problem]\nT = abc\n", "T"),
    ("[problem]\nh = t*x\n", "h may not depend"),
    ("[problem]\na = sin(t)\n", "a may not depend"),
    ("[problem]\nf = 2 + foo\n", "unknown identifier"),
    ("[temporal]\nK = 0\n", "K must be"),
    ("[temporal]\nspacing = chebyshev\n", "spacing"),
    ("[temporal]\nquadrature = simpson\n", "quadrature"),
    ("[solver]\ntol = 0\n", "tol must be"),
    ("[solver]\nmaxit = 0\n", "maxit"),
    ("[mesh]\nbuiltin = torus 3\n", "builtin mesh"),
    ("[output]\nsnapshots = 0 25\n", "snapshot times"),
    ("[bogus]\nx = 1\n", "unknown section"),
    ("[problem]\nbogus = 1\n", "unknown key"),
    ("[temporal]\nspacing = explicit\nnodes = 0\n", "at least two"),
])
def test_validation_errors(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(text)


def test_relative_mesh_path(tmp_path):
    from spacetime_pg import spatial

    spatial.save_mesh(spatial.unit_interval(4), tmp_path / "m")
    (tmp_path / "p.ini").write_text("[mesh]\npath = m\n")
    c = load_config(tmp_path / "p.ini")
    assert c.spatial_mesh().n_nodes == 5


def test_snapshot_interpolation():
    TE = TemporalMesh([0.0, 1.0, 3.0])
    u = np.array([[0.0, 2.0, 6.0], [1.0, 1.0, -1.0]])
    assert np.array_equal(interpolate_in_time(TE, u, TE.nodes), u)
    out = interpolate_in_time(TE, u, [0.5, 2.0, 2.5])
    assert np.allclose(out, [[1.0, 4.0, 5.0], [1.0, 0.0, -0.5]], rtol=0, atol=1e-15)


def test_inline_comments():
    c = parse_config("[problem]\nf = sin(t)  # forcing\n[temporal]\nnodes =   # unused\nK = 3\n")
    assert c.f == "sin(t)" and c.K == 3 and c.nodes == []
