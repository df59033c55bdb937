import json
import math

import numpy as np
import pytest
from helpers import measure, own_profile_mls, sparse_in_levels_volume

from spfti.acquisition import HyperCube, MeasurementSet, forward
from spfti.errors import ConfigError, DimensionError
from spfti.sampling import Mask, SamplingPattern
from spfti.solver import (FidelityProjector, SolverConfig, analysis, dual_prox_ball, dual_prox_l1,
                          operator_norm_estimate, project_ball, soft_threshold, solve, sre,
                          stacked_operator, synthesis)
from spfti.acquisition import adjoint


def _cplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------

def test_analysis_unitary_and_inverse(rng, backend):
    U = _cplx(rng, 16, 64)
    C = analysis(U, (8, 8), backend)
    assert np.isclose(np.linalg.norm(C), np.linalg.norm(U), rtol=1e-10)
    assert np.allclose(synthesis(C, (8, 8), backend), U, atol=1e-10)
    assert np.array_equal(analysis(np.zeros((16, 64)), (8, 8)), np.zeros((16, 64)))
    E = np.zeros((16, 64), dtype=complex)
    E[3, 17] = 1
    assert np.allclose(analysis(synthesis(E, (8, 8)), (8, 8)), E, atol=1e-12)
    V = _cplx(rng, 16, 64)
    assert abs(np.vdot(V, analysis(U, (8, 8))) - np.vdot(synthesis(V, (8, 8)), U)) < 1e-10
    with pytest.raises(DimensionError):
        analysis(np.zeros((16, 60)), (8, 8))


def test_soft_threshold_pointwise(rng):
    v = _cplx(rng, 200)
    v[:5] = 0
    lam = 0.7
    out = soft_threshold(v, lam)
    mag = np.abs(v)
    assert np.allclose(np.abs(out), np.maximum(mag - lam, 0), atol=1e-15)
    keep = mag > lam
    assert np.allclose(np.angle(out[keep]), np.angle(v[keep]))
    assert np.all(out[:5] == 0)


def test_moreau_identity_l1(rng):
    # prox of sigma*f^* is the projection onto the unit l-inf ball (magnitudes <= 1)
    v = 3 * _cplx(rng, 300)
    for sigma in (0.1, 0.7, 2.0):
        p = dual_prox_l1(v, sigma)
        mag = np.abs(v)
        direct = np.where(mag > 1, v / np.maximum(mag, 1e-300), v)
        assert np.allclose(p, direct, atol=1e-12)


def test_moreau_identity_ball(rng):
    for _ in range(20):
        v = _cplx(rng, 6, 5)
        c = _cplx(rng, 6, 5)
        sigma = rng.uniform(0.1, 3)
        eps = rng.uniform(0, 4)
        # prox of sigma*g^*: argmin_w sigma*g^*(w) + |w-v|^2/2, with g^*(w) = <w, c> + eps|w|
        got = dual_prox_ball(v, sigma, c, eps)
        u = v - sigma * c
        nu = np.linalg.norm(u)
        direct = u * max(0.0, 1 - sigma * eps / nu)
        assert np.allclose(got, direct, atol=1e-12)


def test_project_ball(rng):
    c = _cplx(rng, 10)
    x = c + 5 * _cplx(rng, 10)
    p = project_ball(x, c, 1.5)
    assert np.isclose(np.linalg.norm(p - c), 1.5)
    inside = c + 0.01
    assert np.array_equal(project_ball(inside, c, 1.0), inside)


def test_sre_values():
    ref = np.zeros((4, 4))
    ref[0, 0] = 1.0
    est = ref.copy()
    est[1, 1] = 0.1
    assert math.isclose(sre(ref, est), 20.0)
    assert math.isclose(sre(ref, np.zeros_like(ref)), 0.0)
    assert sre(ref, ref) == math.inf
    assert sre(HyperCube(np.ones((4, 4)), 2, 2), HyperCube(np.ones((4, 4)), 2, 2)) == math.inf
    with pytest.raises(DimensionError):
        sre(ref, np.zeros((4, 5)))


def test_operator_norms(rng):
    shape = (16, 16)
    unit = operator_norm_estimate(lambda U: analysis(U, (4, 4)), lambda C: synthesis(C, (4, 4)), shape)
    assert abs(unit - 1.0) < 1e-6
    full = SamplingPattern.full(16, 16)
    L = operator_norm_estimate(*stacked_operator(full, (4, 4)), shape, iters=50)
    assert abs(L - math.sqrt(2)) < 1e-3
    pat = SamplingPattern(Mask.uds(5, 16, 0), Mask.uds(7, 16, 1))
    op = lambda U: forward(U, pat, (4, 4))
    op_adj = lambda Y: adjoint(Y, pat, (4, 4))
    est = operator_norm_estimate(op, op_adj, shape, iters=50)
    # dense matrix of the subsampled map, column by column
    A = np.zeros((pat.shape[0] * pat.shape[1], 256), dtype=complex)
    for j in range(256):
        e = np.zeros(256)
        e[j] = 1
        A[:, j] = op(e.reshape(shape)).ravel()
    true = np.linalg.svd(A, compute_uv=False)[0]
    assert 0 < est <= 1 + 1e-12
    assert abs(est - true) <= 0.01 * true
    Ls = operator_norm_estimate(*stacked_operator(pat, (4, 4)), shape, iters=50)
    assert abs(Ls - math.sqrt(1 + true ** 2)) <= 0.01 * Ls


# ---------------------------------------------------------------------------
# Fidelity projection (real primal)
# ---------------------------------------------------------------------------

def test_projector_feasible_and_consistent(rng):
    side, n = 4, 16
    pat = SamplingPattern(Mask.uds(6, n, 4), Mask.uds(9, 16, 5))
    X = rng.standard_normal((n, 16))
    Y = forward(X, pat, (side, side)) + 0.05 * rng.standard_normal(pat.shape)
    for eps in (0.0, 0.1, 0.3):
        proj = FidelityProjector(pat, (side, side), Y, eps)
        U = rng.standard_normal((n, 16))
        V, AV = proj(U)
        assert np.isrealobj(V)
        assert np.allclose(AV, forward(V, pat, (side, side)), atol=1e-12)
        assert np.linalg.norm(Y - AV) <= max(eps, proj.infeasible_floor) + 1e-9
        W, _ = proj(V)
        assert np.allclose(W, V, atol=1e-10)
        # the projection is the closest feasible point along random feasible directions
        for _ in range(5):
            D = rng.standard_normal((n, 16))
            Z, _ = proj(V + 1e-3 * D)
            assert np.linalg.norm(U - V) <= np.linalg.norm(U - Z) + 1e-9


# ---------------------------------------------------------------------------
# Solve
# ---------------------------------------------------------------------------

def test_full_sampling_noiseless(rng):
    side, n = 16, 64
    X = rng.random((n, side * side))
    pat = SamplingPattern.full(n, side * side)
    res = solve(measure(X, pat, side), pat, SolverConfig(max_iters=50))
    assert res.iterations <= 50
    assert sre(X, res.X_hat) >= 100
    if res.converged:
        assert res.final_residual <= 1.01 * res.epsilon + 1e-9 * np.linalg.norm(X)


def test_stacked_splitting_agrees(rng):
    """The dual-ball splitting reaches the same solution, only more slowly."""
    side, n = 8, 32
    X = sparse_in_levels_volume(3, n, side, max_freq=2, k_fine=2)
    pat = SamplingPattern(Mask.uds(16, n, 3), Mask.uds(40, 64, 4))
    meas = measure(X, pat, side, sigma=1e-3, seed=9)
    proj = solve(meas, pat, SolverConfig(max_iters=400))
    stk = solve(meas, pat, SolverConfig(max_iters=3000, splitting="stacked"))
    assert abs(sre(X, stk.X_hat) - sre(X, proj.X_hat)) < 0.01
    assert stk.final_residual <= 1.05 * meas.epsilon
    full = SamplingPattern.full(n, 64)
    early = solve(measure(X, full, side), full, SolverConfig(max_iters=20, splitting="stacked"))
    late = solve(measure(X, full, side), full, SolverConfig(max_iters=200, splitting="stacked"))
    assert sre(X, late.X_hat) > sre(X, early.X_hat) + 10


def test_full_sampling_converges_quickly(rng):
    side, n = 16, 64
    X = rng.random((n, side * side))
    pat = SamplingPattern.full(n, side * side)
    res = solve(measure(X, pat, side), pat)
    assert res.converged and res.iterations <= 50


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_exact_recovery_sparse_in_levels(seed):
    side, n = 16, 64
    X = sparse_in_levels_volume(seed, n, side)
    m_xi = 32
    m_p = round(0.3 * n * side * side / m_xi)
    pat = own_profile_mls(X, side, n, 16, m_xi, m_p, seed)
    res = solve(measure(X, pat, side), pat, SolverConfig(max_iters=2000))
    assert sre(X, res.X_hat) >= 60


def test_large_epsilon_gives_zero(rng):
    side, n = 8, 16
    X = rng.random((n, 64))
    pat = SamplingPattern(Mask.uds(8, n, 0), Mask.uds(20, 64, 1))
    meas = measure(X, pat, side)
    eps = 2 * np.linalg.norm(meas.Y)
    res = solve(meas, pat, epsilon=eps)
    assert res.converged
    assert np.abs(analysis(res.X_hat.values, (side, side))).sum() <= 1e-8 * np.linalg.norm(meas.Y)


def test_noisy_solve_feasible_and_objective_sane(rng):
    side, n = 8, 32
    X = sparse_in_levels_volume(3, n, side, max_freq=2, k_fine=2)
    pat = SamplingPattern(Mask.uds(16, n, 3), Mask.uds(40, 64, 4))
    meas = measure(X, pat, side, sigma=1e-3, seed=9)
    for max_iters in (50, 400):
        res = solve(meas, pat, SolverConfig(max_iters=max_iters))
        r = np.linalg.norm(meas.Y - forward(res.X_hat.values, pat, (side, side)))
        assert np.isclose(r, res.final_residual, rtol=1e-6, atol=1e-12)
        assert res.first_feasible_objective is not None
        assert res.final_objective <= res.first_feasible_objective + 1e-12
        assert res.final_residual <= 1.01 * meas.epsilon + 1e-9 * np.linalg.norm(meas.Y)


def test_determinism(rng):
    side, n = 8, 16
    X = rng.random((n, 64))
    pat = SamplingPattern(Mask.uds(8, n, 2), Mask.uds(30, 64, 3))
    meas = measure(X, pat, side, sigma=1e-3, seed=1)
    a = solve(meas, pat, SolverConfig(max_iters=100))
    b = solve(meas, pat, SolverConfig(max_iters=100))
    assert np.array_equal(a.X_hat.values, b.X_hat.values)
    assert a.history == b.history


def test_nonconvergence_is_flagged(rng):
    side, n = 8, 16
    X = rng.random((n, 64))
    pat = SamplingPattern(Mask.uds(8, n, 2), Mask.uds(30, 64, 3))
    res = solve(measure(X, pat, side, 1e-3, 1), pat, SolverConfig(max_iters=3))
    assert res.iterations == 3 and not res.converged


def test_solver_errors(rng):
    pat = SamplingPattern(Mask.uds(4, 8, 0), Mask.uds(4, 16, 1))
    meas = MeasurementSet(np.zeros((4, 4)), 0.0, 0.0, pat, 4, 4)
    with pytest.raises(ConfigError):
        solve(meas, pat, epsilon=-1.0)
    with pytest.raises(ConfigError):
        solve(MeasurementSet(np.zeros((4, 4)), 0.0, 0.0), None)
    with pytest.raises(ConfigError):
        solve(meas, pat, SolverConfig(tau=2.0, sigma=2.0))
    with pytest.raises(ConfigError):
        SolverConfig(splitting="admm")
    with pytest.raises(ConfigError):
        SolverConfig.from_json({"bogus": 1})


def test_config_and_summary_json(rng):
    cfg = SolverConfig(max_iters=7, splitting="stacked")
    assert math.isclose(cfg.tau, 1 / math.sqrt(2))
    back = SolverConfig.from_json(json.loads(json.dumps(cfg.to_json())))
    assert back == cfg
    side, n = 4, 8
    X = rng.random((n, 16))
    pat = SamplingPattern.full(n, 16)
    res = solve(measure(X, pat, side), pat)
    s = res.summary(X)
    assert {"iterations", "final_objective", "final_residual", "epsilon", "sre", "converged",
            "wall_ms"} <= set(s)
    json.dumps(s)
