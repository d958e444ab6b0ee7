"""Centralized Nash equilibrium oracle and gain bounds.

The oracle iterates the projection fixed-point map x <- P_U(x - k F(x)),
a contraction for 0 < k < 2 mu / theta^2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from aggnash.errors import ConfigError, ContractError, NonConvergenceError
from aggnash.game import aggregate, estimate_constants, pseudo_gradient
from aggnash.sets import Box


@dataclass(frozen=True)
class NESolveConfig:
    k: float | None = None
    tol: float = 1e-10
    max_iter: int = 100_000

    def __post_init__(self):
        if self.k is not None and not self.k > 0:
            raise ContractError("fixed-point step k must be positive")
        if not self.tol > 0 or self.max_iter < 1:
            raise ContractError("tol must be positive and max_iter at least 1")


@dataclass(frozen=True)
class NESolution:
    x: np.ndarray
    residual: float
    iterations: int
    k: float

    def __iter__(self):
        return iter((self.x, self.residual, self.iterations))


def fixed_point_residual(game, x, k):
    return float(np.linalg.norm(x - game.project(x - k * pseudo_gradient(game, x))))


def solve_ne(game, config=None, x0=None, constants=None, history=None):
    """Solve for the Nash equilibrium by projected fixed-point iteration.

    Without an explicit ``config.k`` the step is mu / theta^2 from the game's
    constants. ``history``, when a list, receives the step norms.
    """
    config = config or NESolveConfig()
    k = config.k
    if k is None or constants is not None:
        constants = constants or estimate_constants(game)
        if k is None:
            k = constants.mu / constants.theta**2
        elif not k < 2 * constants.mu / constants.theta**2:
            warnings.warn(f"k={k} is not below 2*mu/theta^2; the iteration may not contract",
                          RuntimeWarning, stacklevel=2)
    x = game.project(np.zeros(game.N * game.n) if x0 is None else np.asarray(x0, dtype=float))
    step = np.inf
    for it in range(1, config.max_iter + 1):
        x_new = game.project(x - k * pseudo_gradient(game, x))
        step = float(np.linalg.norm(x_new - x))
        if history is not None:
            history.append(step)
        x = x_new
        if step <= config.tol * max(1.0, float(np.linalg.norm(x))):
            return NESolution(x, fixed_point_residual(game, x, k), it, k)
    raise NonConvergenceError(
        f"fixed-point iteration did not converge in {config.max_iter} iterations (k={k}); try a smaller k",
        last_iterate=x,
        residual=fixed_point_residual(game, x, k),
    )


@dataclass(frozen=True)
class VIVerdict:
    passed: bool
    min_value: float
    worst_point: np.ndarray
    samples: int


def verify_vi(game, x_star, sample_count=1000, seed=0, tol=1e-9, scale=None):
    """Check (x - x*)^T F(x*) >= -tol over sampled feasible x.

    Samples are projected Gaussian draws around x*, draws from the sets
    themselves where bounded, and for box factors the vertex minimizing the
    linear form (the worst vertex of the box).
    """
    x_star = np.asarray(x_star, dtype=float)
    F = pseudo_gradient(game, x_star)
    rng = np.random.default_rng(seed)
    if scale is None:
        scale = max(1.0, float(np.linalg.norm(x_star)))
    candidates = []
    for _ in range(sample_count):
        candidates.append(game.project(x_star + scale * rng.standard_normal(x_star.shape)))
    U = game.U
    if U.bounded:
        for _ in range(sample_count):
            candidates.append(U.sample(rng))
    Fb = F.reshape(game.N, game.n)
    worst = game.blocks(x_star).copy()
    has_box = False
    for i, Ui in enumerate(game.action_sets):
        if isinstance(Ui, Box) and Ui.bounded:
            worst[i] = Ui.minimizing_vertex(Fb[i])
            has_box = True
    if has_box:
        candidates.append(worst.ravel())
    values = np.array([(x - x_star) @ F for x in candidates])
    j = int(np.argmin(values))
    m = float(values[j])
    return VIVerdict(bool(m >= -tol), m, candidates[j], len(candidates))


@dataclass(frozen=True)
class StepBounds:
    delta1_star: float
    delta1: float
    k1: float
    k2: float
    k3: float
    M: float
    delta2_star: float

    def lines(self):
        return [f"{name} = {getattr(self, name):.17g}"
                for name in ("delta1_star", "delta1", "k1", "k2", "k3", "M", "delta2_star")]


def step_bounds(constants, delta1, alpha):
    """Sufficient gains for exponential convergence.

    delta1 must lie in (0, 2 mu / theta^2); any delta2 below the returned
    ``delta2_star`` then guarantees convergence. Requires the Lyapunov bound
    ``p``, which is not computable from the game alone.
    """
    if constants.p is None:
        raise ConfigError("constant p (bound on the consensus Lyapunov matrix) is required; "
                          "supply it explicitly, e.g. bounds --p VALUE or [constants] p = ...")
    if alpha < 0:
        raise ContractError("alpha must be nonnegative")
    mu, theta, theta_hat, l, p = constants.mu, constants.theta, constants.theta_hat, constants.l, constants.p
    d1_star = 2 * mu / theta**2
    if not 0 < delta1 < d1_star:
        raise ContractError(f"delta1={delta1} outside (0, {d1_star})")
    M = 2 * p * l * math.sqrt(alpha**2 + 1)
    k1 = delta1 * (2 * mu - delta1 * theta**2) / (2 + delta1 * theta)
    k2 = ((delta1 * theta + 2) * M + delta1 * theta_hat) / 2
    k3 = delta1 * M * theta_hat
    d2_star = k1 / (k1 * k3 + k2**2)
    return StepBounds(d1_star, float(delta1), k1, k2, k3, M, d2_star)


def equilibrium_targets(game, x_star, alpha):
    """Limits of the estimate and compensator states at the equilibrium.

    s -> 1 (x) sigma(x*), v -> alpha * (phi(x*) - 1 (x) sigma(x*)).
    """
    phi = game.phi(x_star)
    s_target = np.tile(aggregate(game, x_star), game.N)
    v_target = alpha * (phi - s_target)
    return s_target, v_target
