"""Distributed seeking dynamics and their fixed-step integration.

State per player: action x_i, aggregate estimate s_i, compensator v_i.

    dx = delta2 * (P_U(x - delta1 * F(x, s)) - x)
    ds = -alpha * (s - phi(x)) - beta * L s - v
    dv = alpha * beta * L s

L is the Laplacian of the active graph, applied blockwise (L kron I_n is
never formed). Steps never cross a switching instant.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from aggnash.errors import ConfigError, ContractError, FeasibilityError
from aggnash.game import extended_pseudo_gradient
from aggnash.network import is_weight_balanced
from aggnash.sets import distance


@dataclass(frozen=True)
class AlgorithmParams:
    delta1: float
    delta2: float
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("delta1", "delta2", "alpha", "beta"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class SimState:
    t: float
    x: np.ndarray
    s: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integrator settings.

    ``h=None`` picks min(tau/10, 1/(2 delta2), 1/(2 (alpha + beta * max degree))).
    ``conservation_tol=None`` means 1e-8 times the initial-state scale.
    """

    method: str = "euler"
    h: float | None = None
    feasibility_tol: float = 1e-9
    conservation_tol: float | None = None
    sample_every: int = 1

    def __post_init__(self):
        if self.method not in ("euler", "rk4"):
            raise ConfigError(f"unknown integration method {self.method!r}")
        if self.h is not None and not self.h > 0:
            raise ConfigError("step size h must be positive")
        if self.feasibility_tol < 0:
            raise ConfigError("feasibility_tol must be nonnegative")
        if self.sample_every < 1:
            raise ConfigError("sample_every must be at least 1")


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    s: np.ndarray
    v: np.ndarray
    N: int
    n: int
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return self.t.shape[0]

    def state(self, k):
        return SimState(float(self.t[k]), self.x[k], self.s[k], self.v[k])

    @property
    def final(self):
        return self.state(-1)

    def header(self):
        cols = ["t"]
        for var in ("x", "s", "v"):
            cols += [f"{var}_{i}_{j}" for i in range(1, self.N + 1) for j in range(1, self.n + 1)]
        return cols

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            for k in range(len(self)):
                row = np.concatenate([[self.t[k]], self.x[k], self.s[k], self.v[k]])
                w.writerow([f"{val:.17g}" for val in row])

    @classmethod
    def from_csv(cls, path, N, n):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        Nn = N * n
        return cls(data[:, 0], data[:, 1:1 + Nn], data[:, 1 + Nn:1 + 2 * Nn], data[:, 1 + 2 * Nn:], N, n)


def _apply_laplacian(L, z, N, n):
    return (L @ z.reshape(N, n)).ravel()


def g0(game, params, x, s):
    """Projected-gradient drift of the actions."""
    F = extended_pseudo_gradient(game, x, s)
    return params.delta2 * (game.project(x - params.delta1 * F) - x)


def rhs(game, params, laplacian_now, state, freeze_x=False):
    """Time derivatives (dx, ds, dv) with the given N x N Laplacian.

    ``freeze_x`` holds the actions constant (dx = 0), leaving the consensus
    subsystem for s and v.
    """
    N, n = game.N, game.n
    L = np.asarray(laplacian_now, dtype=float)
    if L.shape != (N, N):
        raise ContractError(f"Laplacian must be {N}x{N}, got {L.shape}")
    x, s, v = (np.asarray(z, dtype=float) for z in (state.x, state.s, state.v))
    for z in (x, s, v):
        if z.shape != (N * n,):
            raise ContractError("state vectors must have length N*n")
    Ls = _apply_laplacian(L, s, N, n)
    dx = np.zeros_like(x) if freeze_x else g0(game, params, x, s)
    ds = -params.alpha * (s - game.phi(x)) - params.beta * Ls - v
    dv = params.alpha * params.beta * Ls
    return dx, ds, dv


def default_step(params, schedule):
    max_deg = max(float(g.weights.sum(axis=1).max(initial=0.0)) for g in schedule.graphs)
    return min(schedule.tau / 10, 1 / (2 * params.delta2), 1 / (2 * (params.alpha + params.beta * max_deg)))


def default_init(game, seed):
    """Random feasible actions, random estimates, zero compensators."""
    rng = np.random.default_rng(seed)
    Nn = game.N * game.n
    x = game.project(rng.standard_normal(Nn))
    s = rng.standard_normal(Nn)
    return SimState(0.0, x, s, np.zeros(Nn))


def _euler_step(game, params, L, x, s, v, h, freeze_x):
    N, n = game.N, game.n
    Ls = _apply_laplacian(L, s, N, n)
    if freeze_x:
        x_new = x
    else:
        F = extended_pseudo_gradient(game, x, s)
        c = h * params.delta2
        # convex combination keeps x inside U exactly
        x_new = (1 - c) * x + c * game.project(x - params.delta1 * F)
    s_new = s + h * (-params.alpha * (s - game.phi(x)) - params.beta * Ls - v)
    v_new = v + h * params.alpha * params.beta * Ls
    return x_new, s_new, v_new


def _rk4_step(game, params, L, x, s, v, h, freeze_x):
    def f(x, s, v):
        return rhs(game, params, L, SimState(0.0, x, s, v), freeze_x)

    k1 = f(x, s, v)
    k2 = f(x + h / 2 * k1[0], s + h / 2 * k1[1], v + h / 2 * k1[2])
    k3 = f(x + h / 2 * k2[0], s + h / 2 * k2[1], v + h / 2 * k2[2])
    k4 = f(x + h * k3[0], s + h * k3[1], v + h * k3[2])
    return tuple(z + h / 6 * (a + 2 * b + 2 * c + d)
                 for z, a, b, c, d in zip((x, s, v), k1, k2, k3, k4))


def simulate(game, params, schedule, init, config=None, t_end=None,
             require_balanced=True, freeze_x=False, seed=None):
    """Integrate the seeking dynamics over [0, t_end].

    Each dwell segment is split into equal steps no longer than ``config.h``,
    so the Laplacian is constant within every step and each switching
    instant is a sample time. Explicit Euler needs h * delta2 <= 1; RK4 is
    followed by a feasibility assertion on every step.
    """
    config = config or IntegratorConfig()
    t_end = schedule.horizon if t_end is None else float(t_end)
    if not t_end > 0:
        raise ConfigError("t_end must be positive")
    N, n = game.N, game.n
    if schedule.N != N:
        raise ConfigError(f"schedule has {schedule.N} nodes but the game has {N} players")
    if require_balanced and not all(is_weight_balanced(g) for g in schedule.graphs):
        raise ConfigError("schedule contains a graph that is not weight-balanced")

    x = np.asarray(init.x, dtype=float)
    s = np.array(init.s, dtype=float)
    v = np.array(init.v, dtype=float)
    for z in (x, s, v):
        if z.shape != (N * n,):
            raise ConfigError("initial state vectors must have length N*n")
    x = game.project(x)
    if np.linalg.norm(v.reshape(N, n).sum(axis=0)) > 1e-12:
        raise ConfigError("initial compensators must sum to zero")

    h_max = config.h if config.h is not None else default_step(params, schedule)
    if config.method == "euler" and h_max * params.delta2 > 1:
        raise ConfigError(f"Euler needs h*delta2 <= 1 (h={h_max}, delta2={params.delta2})")
    step = _euler_step if config.method == "euler" else _rk4_step

    laps = schedule.laplacians()
    ts, xs, ss, vs = [0.0], [x.copy()], [s.copy()], [v.copy()]
    step_count = 0
    for a, b, gi in schedule.segments(t_end):
        L = laps[gi]
        m = max(1, math.ceil((b - a) / h_max - 1e-9))
        h = (b - a) / m
        for j in range(1, m + 1):
            x, s, v = step(game, params, L, x, s, v, h, freeze_x)
            step_count += 1
            if config.method == "rk4" and not freeze_x:
                _assert_feasible(game, x, config.feasibility_tol, step_count)
            if j == m or step_count % config.sample_every == 0:
                ts.append(b if j == m else a + j * h)
                xs.append(x.copy())
                ss.append(s.copy())
                vs.append(v.copy())

    meta = {
        "params": asdict(params),
        "integrator": asdict(config) | {"h_max": h_max},
        "t_end": t_end,
        "steps": step_count,
        "schedule_graphs": [g.name for g in schedule.graphs],
        "schedule_tau": schedule.tau,
        "seed": seed,
        "freeze_x": freeze_x,
    }
    return Trajectory(np.array(ts), np.array(xs), np.array(ss), np.array(vs), N, n, meta)


def _assert_feasible(game, x, tol, step_count):
    X = game.blocks(x)
    for i, U in enumerate(game.action_sets):
        dist = distance(U, X[i])
        if dist > tol:
            raise FeasibilityError(
                f"step {step_count}: player {i + 1} left its action set by {dist:.3g} (tol {tol:.3g})",
                step=step_count, player=i, distance=dist,
            )
