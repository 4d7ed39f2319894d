import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import DenseLeastSquares, make_system
from spacetime_pg import glsqr, system
from spacetime_pg.glsqr import Breakdown, NumericalFailure, normalize


def identity(x):
    return x


def test_normalize_identity():
    s_hat, s, z = normalize(np.array([3.0, 4.0]), identity)
    assert z == 5.0
    assert np.allclose(s_hat, [0.6, 0.8]) and np.allclose(s, [0.6, 0.8])


def test_normalize_zero_breaks_down():
    with pytest.raises(Breakdown):
        normalize(np.zeros(3), identity)


def test_normalize_scaled():
    s_hat, s, z = normalize(np.array([2.0]), lambda v: v / 4.0)
    assert z == 1.0 and s_hat[0] == 0.5 and s[0] == 2.0


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**31))
def test_normalize_unit_S_norm(n, seed):
    rng = np.random.default_rng(seed)
    p = DenseLeastSquares(rng, n, n)
    s_hat, s, z = normalize(rng.standard_normal(n), lambda v: np.linalg.solve(p.M, v))
    assert abs(s_hat @ p.M @ s_hat - 1.0) <= 1e-10
    assert np.allclose(p.M @ s_hat, s)


def test_identity_scalar():
    u, rep = glsqr.solve(identity, identity, identity, identity, np.array([2.5]), tol=1e-12)
    assert rep.converged and rep.iterations == 1
    assert np.isclose(u[0], 2.5, rtol=1e-15)


def test_zero_rhs():
    s = make_system(3, 3, 1)
    b = system.TestVector.zeros(s.nS, s.nXi)
    u, rep = glsqr.solve(s.apply_B, s.apply_Bt, s.apply_Minv, s.apply_Ninv, b)
    assert rep.iterations == 0 and rep.converged
    assert u.shape == s.trial_shape and not u.any()


def test_argument_validation():
    with pytest.raises(ValueError):
        glsqr.solve(identity, identity, identity, identity, np.ones(1), tol=0)
    with pytest.raises(ValueError):
        glsqr.solve(identity, identity, identity, identity, np.ones(1), maxit=0)


def test_non_finite_reported_with_iteration():
    def bad_B(w):
        return w * np.nan

    with pytest.raises(NumericalFailure) as info:
        glsqr.solve(bad_B, identity, identity, identity, np.ones(2))
    assert info.value.iteration >= 0


def test_spacetime_dense_oracle(rng):
    from oracles import dense_B, dense_M, dense_N, test_vec, vec

    s = make_system(3, 3, 1)
    b = system.TestVector(rng.standard_normal((s.nS, s.nXi)), rng.standard_normal(s.nS))
    u, rep = glsqr.solve(s.apply_B, s.apply_Bt, s.apply_Minv, s.apply_Ninv, b, tol=1e-12)
    B, N, M = dense_B(s), dense_N(s), dense_M(s)
    G = B.T @ np.linalg.solve(N, B)
    ref = np.linalg.solve(G, B.T @ np.linalg.solve(N, test_vec(b)))
    e = vec(u) - ref
    assert np.sqrt(e @ M @ e) <= 1e-8 * np.sqrt(ref @ M @ ref)


@pytest.mark.parametrize("seed", range(10))
def test_dense_minimizer(seed):
    rng = np.random.default_rng(seed)
    p = DenseLeastSquares(rng, int(rng.integers(5, 15)), int(rng.integers(2, 5)))
    u, rep = glsqr.solve(*p.operators(), p.b, tol=1e-12, maxit=200)
    assert rep.converged
    assert p.m_norm(u - p.u) <= 1e-8 * p.m_norm(p.u)


def test_reported_residual_matches_recomputed(rng):
    p = DenseLeastSquares(rng, 12, 6)
    iterates = []
    u, rep = glsqr.solve(*p.operators(), p.b, tol=1e-12, maxit=50,
                         callback=lambda st: iterates.append((st.u.copy(), st.residual)))
    r0 = iterates[0][1]
    assert np.isclose(r0, p.residual(np.zeros(6)), rtol=1e-12)
    for u_i, reported in iterates:
        assert abs(reported - p.residual(u_i)) <= 1e-8 * r0
    assert [r for _, r in iterates] == rep.residual_history


def test_krylov_orthogonality(rng):
    p = DenseLeastSquares(rng, 20, 10)
    vs, ws = [], []

    def grab(st):
        vs.append((st.v_hat.copy(), st.v.copy()))
        ws.append((st.w_hat.copy(), st.w.copy()))

    glsqr.solve(*p.operators(), p.b, tol=1e-14, maxit=5, callback=grab)
    for basis in (vs, ws):
        gram = np.array([[a_hat @ b for _, b in basis] for a_hat, _ in basis])
        assert np.abs(gram - np.eye(len(basis))).max() <= 1e-8


@pytest.mark.parametrize("shape", [(5, 5, 0), (5, 5, 1), (3, 8, 2), (6, 5, 0), (2, 2, 0)])
def test_finite_termination(rng, shape):
    s = make_system(*shape)
    b = system.TestVector(rng.standard_normal((s.nS, s.nXi)), rng.standard_normal(s.nS))
    n = s.nS * s.nTheta
    _, rep = glsqr.solve(s.apply_B, s.apply_Bt, s.apply_Minv, s.apply_Ninv, b, tol=1e-10, maxit=n)
    assert rep.residual <= 1e-8 * rep.residual_history[0]


def test_finite_termination_dense_small(rng):
    p = DenseLeastSquares(rng, 7, 3)
    u, _ = glsqr.solve(*p.operators(), p.b, tol=1e-14, maxit=3)
    assert p.residual(u) <= 1e-8 * p.residual(np.zeros(3))


def test_breakdown_is_convergence():
    # square invertible B: exact solution is reached and the next Normalize breaks down
    B = np.diag([1.0, 2.0])
    u, rep = glsqr.solve(lambda w: B @ w, lambda v: B.T @ v, identity, identity,
                         np.array([1.0, 0.0]), tol=1e-300, maxit=10)
    assert rep.converged and np.allclose(u, [1.0, 0.0])


def test_monotone_residual_history(rng):
    p = DenseLeastSquares(rng, 15, 8)
    _, rep = glsqr.solve(*p.operators(), p.b, tol=1e-12)
    h = np.array(rep.residual_history)
    assert np.all(h >= 0)
