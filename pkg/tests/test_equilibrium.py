import math

import numpy as np
import pytest

from aggnash import (
    Box,
    ConfigError,
    ContractError,
    GameConstants,
    NESolveConfig,
    NonConvergenceError,
    equilibrium_targets,
    estimate_constants,
    pseudo_gradient,
    quadratic_game,
    solve_ne,
    step_bounds,
    verify_vi,
)
from aggnash.game import aggregate, linear_operator


def coupled_game(seed=0, N=4, n=2, sets=None):
    rng = np.random.default_rng(seed)
    return quadratic_game(rng.uniform(2, 3, N), rng.standard_normal((N, n)), rng.uniform(0.2, 1.0, N),
                          action_sets=sets)


def test_decoupled_interior_minimizer():
    a, b = np.array([2.0, 4.0, 5.0]), np.array([[1.0], [-2.0], [0.5]])
    g = quadratic_game(a, b, [0, 0, 0], [Box([-3], [3])] * 3)
    sol = solve_ne(g)
    np.testing.assert_allclose(sol.x, -b.ravel() / a, atol=1e-8)


def test_coupled_unconstrained_matches_linear_solve():
    g = coupled_game()
    M, c = linear_operator(g)
    sol = solve_ne(g, NESolveConfig(tol=1e-13))
    np.testing.assert_allclose(sol.x, np.linalg.solve(M, -c), atol=1e-8)
    assert sol.residual <= 1e-10


def scalar_kkt_game():
    # f(x) = 0.5*x^2 - 2x on [-1, 1]: unconstrained minimizer 2, NE at the face x = 1
    return quadratic_game([1.0], [[-2.0]], [0.0], [Box([-1.0], [1.0])])


def test_binding_constraint_hand_kkt():
    g = scalar_kkt_game()
    sol = solve_ne(g)
    np.testing.assert_allclose(sol.x, [1.0], atol=1e-12)
    # KKT: F(x*) = -1 < 0 pushes against the upper bound
    np.testing.assert_allclose(pseudo_gradient(g, sol.x), [-1.0])
    v = verify_vi(g, sol.x, sample_count=200, tol=1e-9)
    assert v.passed and v.min_value >= -1e-9


def test_vi_interior_is_zero():
    g = coupled_game(sets=[Box([-10, -10], [10, 10])] * 4)
    sol = solve_ne(g, NESolveConfig(tol=1e-14))
    v = verify_vi(g, sol.x, sample_count=300, seed=1, tol=1e-12)
    assert abs(v.min_value) <= 1e-12


def test_vi_detects_wrong_point():
    g = coupled_game(sets=[Box([-0.2, -0.2], [0.2, 0.2])] * 4)
    sol = solve_ne(g)
    wrong = g.project(sol.x + 0.1 * np.random.default_rng(2).choice([-1, 1], sol.x.shape))
    v = verify_vi(g, wrong, sample_count=300, tol=1e-9)
    assert not v.passed and v.min_value < 0


def test_nonconvergence_error_carries_iterate():
    g = coupled_game()
    with pytest.raises(NonConvergenceError) as err:
        solve_ne(g, NESolveConfig(k=1e-4, max_iter=5))
    assert err.value.last_iterate.shape == (8,)
    assert err.value.residual > 0


def test_contraction_certificate():
    g = coupled_game(1)
    c = estimate_constants(g)
    k = c.mu / c.theta**2
    steps = []
    solve_ne(g, NESolveConfig(k=k, tol=1e-13), history=steps)
    q = math.sqrt(1 - 2 * k * c.mu + k**2 * c.theta**2) + 1e-9
    for prev, nxt in zip(steps[:-1], steps[1:]):
        if prev > 1e-13:
            assert nxt <= q * prev + 1e-15


def test_fixed_point_independent_of_k():
    g = coupled_game(2, sets=[Box([-0.3, -0.3], [0.3, 0.3])] * 4)
    c = estimate_constants(g)
    sols = [solve_ne(g, NESolveConfig(k=f * c.mu / c.theta**2, tol=1e-14, max_iter=200_000)).x
            for f in (0.1, 0.5, 1.0)]
    for i in range(3):
        for j in range(i):
            np.testing.assert_allclose(sols[i], sols[j], atol=1e-7)


def test_unique_from_random_starts():
    g = coupled_game(3, sets=[Box([-0.4, -0.4], [0.4, 0.4])] * 4)
    rng = np.random.default_rng(4)
    ref = solve_ne(g, NESolveConfig(tol=1e-13)).x
    for _ in range(10):
        x0 = g.U.sample(rng)
        np.testing.assert_allclose(solve_ne(g, NESolveConfig(tol=1e-13), x0=x0).x, ref, atol=1e-7)


def independent_bounds(mu, theta, theta_hat, l, p, alpha, delta1):
    M = 2 * p * l * (alpha**2 + 1) ** 0.5
    k1 = delta1 * (2 * mu - delta1 * theta * theta) / (2 + delta1 * theta)
    k2 = ((delta1 * theta + 2) * M + delta1 * theta_hat) / 2
    k3 = delta1 * M * theta_hat
    return k1, k2, k3, M, k1 / (k1 * k3 + k2 * k2)


def test_delta1_star_substitution():
    b = step_bounds(GameConstants(1.0, 2.0, 1.0, 1.0, p=1.0), 0.1, 1.0)
    assert b.delta1_star == 0.5


def test_step_bounds_worked_example():
    c = GameConstants(1.0, 2.0, 1.0, 1.0, p=1.0)
    b = step_bounds(c, 0.25, 0.0)
    assert b.M == 2.0
    assert b.k1 == pytest.approx(0.1, abs=1e-15)  # 0.25 * (2 - 1) / 2.5
    assert b.k2 == pytest.approx(2.625, abs=1e-15)
    assert b.k3 == pytest.approx(0.5, abs=1e-15)
    assert b.delta2_star == pytest.approx(0.1 / (0.1 * 0.5 + 2.625**2), abs=1e-12)


def test_step_bounds_domain_and_missing_p():
    c = GameConstants(1.0, 2.0, 1.0, 1.0, p=1.0)
    for d1 in (0.0, 0.5, 0.7, -0.1):
        with pytest.raises(ContractError):
            step_bounds(c, d1, 1.0)
    with pytest.raises(ConfigError, match="p"):
        step_bounds(GameConstants(1.0, 2.0, 1.0, 1.0), 0.25, 1.0)


def test_k1_vanishes_at_both_ends():
    c = GameConstants(1.0, 2.0, 1.0, 1.0, p=1.0)
    grid = np.linspace(1e-9, 0.5 - 1e-9, 2001)
    k1 = np.array([step_bounds(c, d, 1.0).k1 for d in grid])
    assert k1[0] < 1e-8 and k1[-1] < 1e-8
    assert 0 < np.argmax(k1) < len(grid) - 1


def test_step_bounds_positive_over_random_constants():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        theta = rng.uniform(0.1, 10)
        mu = rng.uniform(0.01, 1) * theta
        c = GameConstants(mu, theta, rng.uniform(0.01, 5), rng.uniform(0.1, 5), p=rng.uniform(0.1, 10))
        alpha = rng.uniform(0.01, 5)
        d1 = rng.uniform(0.001, 0.999) * 2 * mu / theta**2
        b = step_bounds(c, d1, alpha)
        assert b.k1 > 0 and b.k2 > 0 and b.k3 > 0 and b.delta2_star > 0
        np.testing.assert_allclose(
            (b.k1, b.k2, b.k3, b.M, b.delta2_star),
            independent_bounds(c.mu, c.theta, c.theta_hat, c.l, c.p, alpha, d1), rtol=1e-12)


def test_equilibrium_targets(ref_game):
    sol = solve_ne(ref_game)
    s_t, v_t = equilibrium_targets(ref_game, sol.x, 2.0)
    sigma = aggregate(ref_game, sol.x)
    for blk in s_t.reshape(6, 2):
        np.testing.assert_allclose(blk, sigma)
    np.testing.assert_allclose(s_t + v_t / 2.0, ref_game.phi(sol.x), atol=1e-15)
    same = quadratic_game([2, 2, 2], [[1.0], [1.0], [1.0]], [0.5, 0.5, 0.5])
    x = np.full(3, 0.4)
    np.testing.assert_allclose(equilibrium_targets(same, x, 1.0)[1], 0.0, atol=1e-16)
