import numpy as np
import pytest

from tinyface import degradation as deg
from tinyface.degradation import DegradationOperator, make_kernel, make_operator
from tinyface.denoise import Denoiser, NoiseSchedule, denoise
from tinyface.image import bicubic_resize
from tinyface.metrics import psnr
from tinyface.red import RedConfig, RedError, red_energy, red_gradient, red_solve
from tinyface.synthetic import make_corpus

# a gaussian at vanishing sigma has a zero-radius kernel: exact identity
IDENTITY = Denoiser("gaussian")
ID_SIGMA = 1e-8
WRAP_GAUSS = Denoiser("gaussian", params={"boundary": "wrap"})


def identity_op():
    return DegradationOperator(np.array([[1.0]]), scale=1)


def fixed_schedule(sigma, steps):
    return NoiseSchedule(sigma, sigma, steps)


def test_energy_zero_case():
    z = np.zeros((6, 6, 1))
    assert red_energy(z, z, identity_op(), IDENTITY, 0.05, 0.23) == 0.0


def test_energy_identity_denoiser_is_pure_fidelity():
    rng = np.random.default_rng(0)
    op = make_operator(2, "gaussian")
    x = rng.uniform(size=(8, 8, 1))
    y = rng.uniform(size=(4, 4, 1))
    e = red_energy(y, x, op, IDENTITY, ID_SIGMA, 0.5)
    expect = 0.5 * np.sum((deg.apply(op, x) - y) ** 2)
    assert e == pytest.approx(expect, rel=1e-12)


def test_energy_matches_dense_assembly():
    # explicit dense blur matrix W from the denoiser's impulse responses
    rng = np.random.default_rng(1)
    n = 8
    sigma, lam = 0.05, 0.23
    op = DegradationOperator(make_kernel("gaussian", 2, sigma=1.0), scale=2)
    w_cols = []
    for i in range(n * n):
        e = np.zeros((n, n, 1))
        e.flat[i] = 1.0
        w_cols.append(denoise(WRAP_GAUSS, e, sigma).ravel())
    W = np.array(w_cols).T
    x = rng.uniform(size=(n, n, 1))
    y = rng.uniform(size=(n // 2, n // 2, 1))
    xv = x.ravel()
    expect = 0.5 * np.sum((deg.apply(op, x) - y) ** 2) \
        + 0.5 * lam * xv @ (xv - W @ xv)
    got = red_energy(y, x, op, WRAP_GAUSS, sigma, lam)
    assert got == pytest.approx(expect, rel=1e-10)


def test_gradient_vanishes_at_consistent_point():
    y = np.full((5, 5, 1), 0.3)
    g = red_gradient(y, y, identity_op(), IDENTITY, ID_SIGMA, 1.0)
    np.testing.assert_allclose(g, 0.0, atol=1e-12)


def test_gradient_identity_case():
    rng = np.random.default_rng(2)
    x = rng.uniform(size=(5, 5, 1))
    y = rng.uniform(size=(5, 5, 1))
    g = red_gradient(y, x, identity_op(), IDENTITY, ID_SIGMA, 1.0)
    np.testing.assert_allclose(g, (x - y).ravel(), atol=1e-12)


def test_gradient_matches_finite_differences():
    # symmetric denoiser on the periodic fixture makes the formula exact
    rng = np.random.default_rng(3)
    n = 12
    sigma, lam = 8 / 255, 0.23
    op = DegradationOperator(make_kernel("gaussian", 2, sigma=0.8), scale=2)
    x = rng.uniform(0.2, 0.8, size=(n, n, 1))
    y = rng.uniform(0.2, 0.8, size=(n // 2, n // 2, 1))
    g = red_gradient(y, x, op, WRAP_GAUSS, sigma, lam)
    eps = 1e-5
    for i in rng.choice(n * n, size=20, replace=False):
        xp, xm = x.copy(), x.copy()
        xp.flat[i] += eps
        xm.flat[i] -= eps
        fd = (red_energy(y, xp, op, WRAP_GAUSS, sigma, lam)
              - red_energy(y, xm, op, WRAP_GAUSS, sigma, lam)) / (2 * eps)
        assert abs(g[i] - fd) <= 1e-4 * max(abs(fd), 1e-3)


def test_solve_scalar_recurrence():
    y = np.full((6, 6, 1), 0.5)
    cfg = RedConfig(lam=1.0, outer_iters=3, schedule=fixed_schedule(0.05, 3),
                    init="zeros", stop_tol=0.0)
    x, trace = red_solve(y, identity_op(), IDENTITY, cfg)
    # x_{k+1} = (y + lam x_k) / (1 + lam): 0.25, 0.375, 0.4375
    np.testing.assert_allclose(x, 0.4375, atol=1e-10)
    assert len(trace.energy) == 3


def test_solve_large_lambda_returns_denoised_init():
    rng = np.random.default_rng(4)
    op = make_operator(2, "gaussian")
    y = rng.uniform(size=(8, 8, 1))
    cfg = RedConfig(lam=1e6, outer_iters=1, schedule=fixed_schedule(0.05, 1),
                    stop_tol=0.0)
    x0 = bicubic_resize(y, 16, 16)
    x, _ = red_solve(y, op, Denoiser("gaussian"), cfg)
    expect = denoise(Denoiser("gaussian"), x0, 0.05)
    assert np.abs(x - expect).max() <= 1e-4


def test_solve_beats_bicubic_on_smooth_fixture():
    hr = make_corpus(1, seed=11, size=64)[0]
    op = make_operator(4, "gaussian")
    lr = deg.apply(op, hr)
    cfg = RedConfig(lam=0.23, outer_iters=6,
                    schedule=NoiseSchedule(12 / 255, 4 / 255, 6),
                    cg_tol=1e-4, cg_max_iter=40)
    x, _ = red_solve(lr, op, Denoiser("gaussian"), cfg)
    assert psnr(x, hr) > psnr(bicubic_resize(lr, 64, 64), hr)


def test_energy_nonincreasing_fixed_sigma():
    rng = np.random.default_rng(5)
    hr = make_corpus(1, seed=12, size=32)[0]
    op = make_operator(2, "gaussian")
    y = deg.apply(op, hr)
    cfg = RedConfig(lam=0.23, outer_iters=10, schedule=fixed_schedule(6 / 255, 10),
                    cg_tol=1e-8, cg_max_iter=200, stop_tol=0.0)
    _, trace = red_solve(y, op, WRAP_GAUSS, cfg)
    e = np.array(trace.energy)
    assert np.all(e[1:] <= e[:-1] + 1e-8)


def test_final_gradient_norm_small():
    hr = make_corpus(1, seed=13, size=32)[0]
    op = make_operator(2, "gaussian")
    y = deg.apply(op, hr)
    cg_tol = 1e-8
    cfg = RedConfig(lam=0.23, outer_iters=60,
                    schedule=fixed_schedule(6 / 255, 60),
                    cg_tol=cg_tol, cg_max_iter=300, stop_tol=0.0)
    x, trace = red_solve(y, op, WRAP_GAUSS, cfg)
    scale = np.linalg.norm(deg.adjoint(op, y, x.shape[:2]))
    assert trace.grad_norm[-1] / scale <= 10 * cg_tol


def test_update_rule_consistency():
    # each step is the root of the gradient with the denoiser frozen
    hr = make_corpus(1, seed=14, size=32)[0]
    op = make_operator(2, "gaussian")
    y = deg.apply(op, hr)
    lam, sigma, cg_tol = 0.23, 6 / 255, 1e-6
    x = bicubic_resize(y, 32, 32)
    for _ in range(4):
        z = denoise(Denoiser("gaussian"), x, sigma)
        res = deg.solve_regularized(op, y, z, lam, cg_tol=cg_tol,
                                    cg_max_iter=400)
        x_new = res.x
        resid = deg.adjoint(op, deg.apply(op, x_new) - y, (32, 32)) \
            + lam * (x_new - z)
        rhs = deg.adjoint(op, y, (32, 32)) + lam * z
        assert np.linalg.norm(resid) <= 10 * cg_tol * np.linalg.norm(rhs)
        x = x_new


def test_trace_csv():
    y = np.full((4, 4, 1), 0.5)
    cfg = RedConfig(lam=1.0, outer_iters=2, schedule=fixed_schedule(0.05, 2),
                    init="zeros", stop_tol=0.0)
    _, trace = red_solve(y, identity_op(), IDENTITY, cfg)
    csv = trace.to_csv()
    lines = csv.strip().split("\n")
    assert lines[0] == "iteration,energy,grad_norm,cg_residual,rel_change"
    assert len(lines) == 3


def test_config_validation():
    with pytest.raises(RedError):
        RedConfig(lam=0.0)
    with pytest.raises(RedError):
        RedConfig(outer_iters=5, schedule=fixed_schedule(0.05, 4))
