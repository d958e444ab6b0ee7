"""Aggregative games: costs, local aggregate maps and pseudo-gradients.

A player's cost is written as ``cost(x_i, sigma)`` where ``sigma`` is the
average of the local aggregate maps ``phi_j(x_j)``. Costs expose their two
partial gradients separately; the game assembles the player's gradient
estimate ``J_i(x_i, s_i)`` from them by the chain rule.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from aggnash.errors import ConfigError, ContractError
from aggnash.sets import Box, Product, WholeSpace


class PlayerCost:
    """Cost of one player as a function of its own action and the aggregate."""

    def cost(self, x_i, sigma):
        raise NotImplementedError

    def grad_action(self, x_i, sigma):
        raise NotImplementedError

    def grad_aggregate(self, x_i, sigma):
        raise NotImplementedError


class LocalAggregate:
    """Player-local contribution ``phi_i(x_i)`` to the aggregate."""

    def value(self, x_i):
        raise NotImplementedError

    def jacobian(self, x_i):
        raise NotImplementedError


@dataclass(frozen=True)
class QuadraticCost(PlayerCost):
    """0.5*a*|x|^2 + b^T x + d * x^T sigma."""

    a: float
    b: np.ndarray
    d: float

    def __post_init__(self):
        object.__setattr__(self, "b", np.atleast_1d(np.asarray(self.b, dtype=float)))

    def cost(self, x_i, sigma):
        return 0.5 * self.a * float(x_i @ x_i) + float(self.b @ x_i) + self.d * float(x_i @ sigma)

    def grad_action(self, x_i, sigma):
        return self.a * x_i + self.b + self.d * sigma

    def grad_aggregate(self, x_i, sigma):
        return self.d * np.asarray(x_i, dtype=float)


@dataclass(frozen=True)
class IdentityAggregate(LocalAggregate):
    dim: int

    def value(self, x_i):
        return np.asarray(x_i, dtype=float).copy()

    def jacobian(self, x_i):
        return np.eye(self.dim)


@dataclass(frozen=True)
class AffineAggregate(LocalAggregate):
    """phi(x) = A x + c."""

    A: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if A.shape[0] != A.shape[1] or c.shape[0] != A.shape[0]:
            raise ContractError("affine aggregate needs a square A and matching c")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "c", c)

    def value(self, x_i):
        return self.A @ x_i + self.c

    def jacobian(self, x_i):
        return self.A


@dataclass(frozen=True)
class GameConstants:
    """Monotonicity and Lipschitz constants of a game.

    ``theta_hat`` may be zero for games whose costs ignore the aggregate.
    ``p`` bounds the Lyapunov matrix of the consensus subsystem; it cannot be
    computed here and must be supplied by the user.
    """

    mu: float
    theta: float
    theta_hat: float
    l: float
    p: float | None = None
    sample_count: int | None = None
    seed: int | None = None
    exact: bool = False
    monotone_violation: bool = False

    def __post_init__(self):
        if self.monotone_violation:
            return
        if not (self.mu > 0 and self.theta > 0 and self.l > 0):
            raise ContractError("mu, theta and l must be strictly positive")
        if self.theta_hat < 0:
            raise ContractError("theta_hat must be nonnegative")
        if self.p is not None and not self.p > 0:
            raise ContractError("p must be strictly positive")
        if self.mu > self.theta * (1 + 1e-12):
            raise ContractError(f"mu={self.mu} exceeds theta={self.theta}")

    def with_p(self, p):
        return GameConstants(self.mu, self.theta, self.theta_hat, self.l, p,
                             self.sample_count, self.seed, self.exact, self.monotone_violation)


@dataclass(frozen=True)
class AggregativeGame:
    costs: tuple
    aggregates: tuple
    action_sets: tuple
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "costs", tuple(self.costs))
        object.__setattr__(self, "aggregates", tuple(self.aggregates))
        object.__setattr__(self, "action_sets", tuple(self.action_sets))
        N = len(self.costs)
        if N == 0 or len(self.aggregates) != N or len(self.action_sets) != N:
            raise ContractError("costs, aggregates and action_sets must have the same nonzero length")
        dims = {s.dim for s in self.action_sets}
        if len(dims) != 1:
            raise ContractError("all action sets must share one dimension")

    @property
    def N(self):
        return len(self.costs)

    @property
    def n(self):
        return self.action_sets[0].dim

    @property
    def U(self):
        return Product(self.action_sets)

    @cached_property
    def box_bounds(self):
        """Stacked (lo, hi) when every action set is a Box, else None."""
        if not all(isinstance(U, Box) for U in self.action_sets):
            return None
        return (np.concatenate([U.lo for U in self.action_sets]),
                np.concatenate([U.hi for U in self.action_sets]))

    @cached_property
    def quadratic_coefficients(self):
        """(a, b, d, A, c) arrays for the quadratic family, else None."""
        if not is_quadratic(self):
            return None
        n = self.n
        a = np.array([c.a for c in self.costs], dtype=float)[:, None]
        b = np.stack([np.broadcast_to(c.b, (n,)) for c in self.costs])
        d = np.array([c.d for c in self.costs], dtype=float)[:, None]
        A = np.stack([g.A if isinstance(g, AffineAggregate) else np.eye(n) for g in self.aggregates])
        c = np.stack([g.c if isinstance(g, AffineAggregate) else np.zeros(n) for g in self.aggregates])
        return a, b, d, A, c

    def blocks(self, z):
        """View an Nn-vector as an (N, n) array, checking its length."""
        z = np.asarray(z, dtype=float)
        if z.shape != (self.N * self.n,):
            raise ContractError(f"expected a vector of length {self.N * self.n}, got shape {z.shape}")
        return z.reshape(self.N, self.n)

    def phi(self, x):
        X = self.blocks(x)
        quad = self.quadratic_coefficients
        if quad is not None:
            _, _, _, A, c = quad
            return (np.einsum("ijk,ik->ij", A, X) + c).ravel()
        return np.concatenate([agg.value(X[i]) for i, agg in enumerate(self.aggregates)])

    def project(self, x):
        """Blockwise projection onto U = U_1 x ... x U_N."""
        bb = self.box_bounds
        if bb is not None:
            return np.minimum(np.maximum(self.blocks(x).ravel(), bb[0]), bb[1])
        X = self.blocks(x)
        return np.concatenate([U.project(X[i]) for i, U in enumerate(self.action_sets)])

    def composed_cost(self, i, x):
        """f_i(x_i, x_{-i}) evaluated with the true aggregate."""
        return self.costs[i].cost(self.blocks(x)[i], aggregate(self, x))


def aggregate(game, x):
    """sigma(x) = (1/N) sum_i phi_i(x_i)."""
    return game.phi(x).reshape(game.N, game.n).mean(axis=0)


def partial_gradient(game, i, x_i, s_i):
    """J_i(x_i, s_i): the player's gradient with the aggregate replaced by s_i.

    ``i`` is zero-based.
    """
    if not 0 <= i < game.N:
        raise ContractError(f"player index {i} out of range for N={game.N}")
    x_i = np.asarray(x_i, dtype=float)
    s_i = np.asarray(s_i, dtype=float)
    if x_i.shape != (game.n,) or s_i.shape != (game.n,):
        raise ContractError("x_i and s_i must have the game's action dimension")
    cost = game.costs[i]
    jac = game.aggregates[i].jacobian(x_i)
    return cost.grad_action(x_i, s_i) + jac.T @ cost.grad_aggregate(x_i, s_i) / game.N


def extended_pseudo_gradient(game, x, s):
    X = game.blocks(x)
    S = game.blocks(s)
    quad = game.quadratic_coefficients
    if quad is not None:
        # vectorized form of the per-player assembly below
        a, b, d, A, _ = quad
        return (a * X + b + d * S + (d / game.N) * np.einsum("ikj,ik->ij", A, X)).ravel()
    return np.concatenate([partial_gradient(game, i, X[i], S[i]) for i in range(game.N)])


def pseudo_gradient(game, x):
    sigma = aggregate(game, x)
    return extended_pseudo_gradient(game, x, np.tile(sigma, game.N))


# Built-in families ----------------------------------------------------------

def quadratic_game(a, b, d, action_sets=None, A=None, c=None, n=None):
    """Quadratic aggregative game.

    Player i pays 0.5*a_i*|x_i|^2 + b_i^T x_i + d_i * x_i^T sigma with
    ``phi_i`` the identity, or ``A_i x + c_i`` when ``A`` is given.
    """
    a = np.asarray(a, dtype=float)
    d = np.asarray(d, dtype=float)
    N = a.shape[0]
    b = np.asarray(b, dtype=float)
    if b.ndim == 1:
        b = b.reshape(N, -1) if n is None else b.reshape(N, n)
    n = b.shape[1]
    if d.shape != (N,):
        raise ContractError("a and d must have one entry per player")
    costs = [QuadraticCost(a[i], b[i], d[i]) for i in range(N)]
    if A is None:
        aggs = [IdentityAggregate(n) for _ in range(N)]
    else:
        A = np.asarray(A, dtype=float).reshape(N, n, n)
        c = np.zeros((N, n)) if c is None else np.asarray(c, dtype=float).reshape(N, n)
        aggs = [AffineAggregate(A[i], c[i]) for i in range(N)]
    if action_sets is None:
        action_sets = [WholeSpace(n) for _ in range(N)]
    return AggregativeGame(costs, aggs, action_sets, name="quadratic")


def cournot_game(P0, gamma, q, action_sets=None, n=1):
    """Cournot oligopoly with linear inverse demand P0 - gamma*sigma.

    Each firm's cost is its production cost q_i x_i minus revenue
    x_i (P0 - gamma sigma); sigma is the average output.
    """
    q = np.asarray(q, dtype=float)
    N = q.shape[0]
    b = np.repeat((q - P0)[:, None], n, axis=1)
    game = quadratic_game(np.zeros(N), b, np.full(N, float(gamma)), action_sets=action_sets)
    return AggregativeGame(game.costs, game.aggregates, game.action_sets, name="cournot")


def is_quadratic(game):
    # exact types: subclasses may add terms the closed forms do not know about
    return all(type(c) is QuadraticCost for c in game.costs) and all(
        type(g) in (IdentityAggregate, AffineAggregate) for g in game.aggregates
    )


def linear_operator(game):
    """(M, c) with F(x) = M x + c for quadratic games."""
    N, n = game.N, game.n
    M = np.zeros((N * n, N * n))
    offset = np.zeros(N * n)
    As = [g.jacobian(None) if isinstance(g, AffineAggregate) else np.eye(n) for g in game.aggregates]
    cs = [g.c if isinstance(g, AffineAggregate) else np.zeros(n) for g in game.aggregates]
    cbar = np.mean(cs, axis=0)
    for i, cost in enumerate(game.costs):
        rows = slice(i * n, (i + 1) * n)
        for j in range(N):
            M[rows, j * n:(j + 1) * n] += cost.d / N * As[j]
        M[rows, rows] += cost.a * np.eye(n) + cost.d / N * As[i].T
        offset[rows] = cost.b + cost.d * cbar
    return M, offset


def _exact_constants(game):
    M, _ = linear_operator(game)
    mu = float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
    theta = float(np.linalg.norm(M, 2))
    theta_hat = float(max(abs(c.d) for c in game.costs))
    l = float(max(np.linalg.norm(g.jacobian(None), 2) if isinstance(g, AffineAggregate) else 1.0
                  for g in game.aggregates))
    return mu, theta, theta_hat, l


def estimate_constants(game, sample_count=10_000, seed=0, box=None, method="auto"):
    """Monotonicity and Lipschitz constants of ``game``.

    Quadratic games get exact values from the spectrum of their linear
    pseudo-gradient unless ``method="sample"``. Otherwise the constants are
    extrema over ``sample_count`` random pairs drawn from U (or from ``box``,
    a (lo, hi) pair over the stacked action vector, when U is unbounded).
    """
    if sample_count < 1:
        raise ContractError("sample_count must be positive")
    if method not in ("auto", "exact", "sample"):
        raise ContractError(f"unknown method {method!r}")
    if method != "sample" and is_quadratic(game):
        mu, theta, theta_hat, l = _exact_constants(game)
        return _finish(mu, theta, theta_hat, l, None, None, exact=True)
    if method == "exact":
        raise ConfigError("exact constants are only available for the quadratic family")

    U = game.U
    if box is None and not U.bounded:
        raise ConfigError("unbounded action set: supply a sampling box")
    rng = np.random.default_rng(seed)
    Nn = game.N * game.n

    def draw():
        return U.sample(rng, box)

    mu, theta, theta_hat, l = np.inf, 0.0, 0.0, 0.0
    s_scale = None
    for _ in range(sample_count):
        x, y = draw(), draw()
        dx = x - y
        nx = np.linalg.norm(dx)
        if nx == 0:
            continue
        dF = pseudo_gradient(game, x) - pseudo_gradient(game, y)
        mu = min(mu, float(dx @ dF) / nx**2)
        theta = max(theta, float(np.linalg.norm(dF)) / nx)
        # estimates s range over the aggregate image of U
        if s_scale is None:
            s_scale = np.abs(game.phi(x)).max() + 1.0
        s1 = rng.uniform(-s_scale, s_scale, Nn)
        s2 = rng.uniform(-s_scale, s_scale, Nn)
        ds = np.linalg.norm(s1 - s2)
        dE = extended_pseudo_gradient(game, x, s1) - extended_pseudo_gradient(game, x, s2)
        theta_hat = max(theta_hat, float(np.linalg.norm(dE)) / ds)
        X = game.blocks(x)
        for i, agg in enumerate(game.aggregates):
            l = max(l, float(np.linalg.norm(agg.jacobian(X[i]), 2)))
    return _finish(mu, theta, theta_hat, l, sample_count, seed, exact=False)


def _finish(mu, theta, theta_hat, l, sample_count, seed, exact):
    violation = not mu > 0
    if violation:
        warnings.warn(f"sampled strong-monotonicity modulus {mu:.3g} <= 0; assumption violated",
                      RuntimeWarning, stacklevel=3)
    return GameConstants(mu=mu, theta=theta, theta_hat=theta_hat, l=l, p=None,
                         sample_count=sample_count, seed=seed, exact=exact,
                         monotone_violation=violation)
