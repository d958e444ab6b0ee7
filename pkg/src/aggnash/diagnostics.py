"""Error coordinates, decay-rate fits and run reports."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from aggnash.errors import ContractError, InsufficientDataError
from aggnash.equilibrium import equilibrium_targets
from aggnash.sets import distance


@dataclass(frozen=True)
class OrthonormalBasis:
    r: np.ndarray
    R: np.ndarray

    @property
    def Q(self):
        return np.column_stack([self.r, self.R])


def build_basis(N):
    """Orthonormal [r, R] with r = 1/sqrt(N).

    Built from the Householder reflection that maps the first coordinate
    axis to r; its remaining columns form R.
    """
    if N < 2:
        raise ContractError("basis needs N >= 2")
    r = np.full(N, 1 / np.sqrt(N))
    u = np.zeros(N)
    u[0] = 1.0
    u -= r
    H = np.eye(N) - 2 * np.outer(u, u) / (u @ u)
    return OrthonormalBasis(r, H[:, 1:].copy())


@dataclass(frozen=True)
class ErrorCoordinates:
    x_bar: np.ndarray
    e_s1: np.ndarray
    e_s2: np.ndarray
    e_v1: np.ndarray
    e_v2: np.ndarray

    @property
    def zeta_norm(self):
        return float(np.sqrt(self.e_s1 @ self.e_s1 + self.e_s2 @ self.e_s2 + self.e_v2 @ self.e_v2))

    @property
    def total_norm(self):
        return float(np.hypot(np.linalg.norm(self.x_bar), self.zeta_norm))


def error_coordinates(state, game, x_star, alpha, basis=None):
    N, n = game.N, game.n
    basis = basis or build_basis(N)
    x = game.blocks(state.x).ravel()
    s = game.blocks(state.s)
    v = game.blocks(state.v)
    s_target, v_perp = equilibrium_targets(game, x, alpha)
    s_bar = s - s_target.reshape(N, n)
    v_bar = v - v_perp.reshape(N, n)
    return ErrorCoordinates(
        x_bar=x - np.asarray(x_star, dtype=float),
        e_s1=basis.r @ s_bar,
        e_s2=(basis.R.T @ s_bar).ravel(),
        e_v1=basis.r @ v_bar,
        e_v2=(basis.R.T @ v_bar).ravel(),
    )


def error_series(trajectory, game, x_star, alpha, include_x=True):
    """Combined error norm per sample: sqrt(|x - x*|^2 + |zeta|^2)."""
    basis = build_basis(game.N)
    out = np.empty(len(trajectory))
    for k in range(len(trajectory)):
        ec = error_coordinates(trajectory.state(k), game, x_star, alpha, basis)
        out[k] = ec.total_norm if include_x else ec.zeta_norm
    return out


def fit_log_linear(t, err, tail_fraction=0.5):
    """Least-squares slope of log(err) against t over the tail samples.

    Returns (slope, r_squared); the slope is -inf (with r^2 = 1) when every
    tail sample sits at the numerical floor.
    """
    t = np.asarray(t, dtype=float)
    err = np.asarray(err, dtype=float)
    if not 0 < tail_fraction < 1:
        raise ContractError("tail_fraction must lie in (0, 1)")
    start = int(np.floor(len(t) * (1 - tail_fraction)))
    t_tail, e_tail = t[start:], err[start:]
    if len(t_tail) < 10:
        raise InsufficientDataError(f"only {len(t_tail)} samples in the fit window (need 10)")
    floor = 100 * np.finfo(float).eps * err[0]
    keep = e_tail > floor
    if not keep.any():
        return -np.inf, 1.0
    if keep.sum() < 10:
        raise InsufficientDataError(f"only {int(keep.sum())} samples above the error floor (need 10)")
    tt, y = t_tail[keep], np.log(e_tail[keep])
    A = np.column_stack([tt, np.ones_like(tt)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), r2


def rate_fit(trajectory, game, x_star, alpha, tail_fraction=0.5, include_x=True):
    """Fitted exponential decay rate of the state error over the tail."""
    err = error_series(trajectory, game, x_star, alpha, include_x)
    return fit_log_linear(trajectory.t, err, tail_fraction)


@dataclass
class Report:
    err_x: float
    err_s: float
    err_v: float
    rate: float
    rate_r2: float
    max_feasibility_distance: float
    max_conservation_drift: float
    conservation_tol: float
    max_ev1: float
    verdicts: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def passed(self):
        return all(self.verdicts.values())

    def as_flat(self):
        flat = {k: v for k, v in asdict(self).items() if k not in ("verdicts", "params")}
        for k, v in self.verdicts.items():
            flat[f"verdict.{k}"] = bool(v)
        for k, v in _flatten(self.params).items():
            flat[f"param.{k}"] = v
        return flat

    def to_text(self):
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.as_flat().items())

    @classmethod
    def from_text(cls, text):
        flat = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, _, raw = line.partition(" = ")
            flat[key] = _parse(raw)
        verdicts = {k[len("verdict."):]: v for k, v in flat.items() if k.startswith("verdict.")}
        params = _unflatten({k[len("param."):]: v for k, v in flat.items() if k.startswith("param.")})
        core = {k: v for k, v in flat.items() if "." not in k}
        return cls(**core, verdicts=verdicts, params=params)

    def csv_header(self):
        return ",".join(self.as_flat())

    def csv_row(self):
        return ",".join(_fmt(v) for v in self.as_flat().values())


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _unflatten(flat):
    out = {}
    for key, v in flat.items():
        node = out
        *head, last = key.split(".")
        for h in head:
            node = node.setdefault(h, {})
        node[last] = v
    return out


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return json.dumps(v)


def _parse(raw):
    if raw == "true":
        return True
    if raw == "false":
        return False
    if raw in ("inf", "-inf", "nan"):
        return float(raw)
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return json.loads(raw)


def drift_maxima(trajectory, game, x_star, alpha):
    """(max feasibility distance, max |sum_i v_i|, max |e_v1|) over samples."""
    N, n = game.N, game.n
    basis = build_basis(N)
    feas = 0.0
    cons = 0.0
    ev1 = 0.0
    for k in range(len(trajectory)):
        X = trajectory.x[k].reshape(N, n)
        for i, U in enumerate(game.action_sets):
            feas = max(feas, distance(U, X[i]))
        cons = max(cons, float(np.linalg.norm(trajectory.v[k].reshape(N, n).sum(axis=0))))
        ec = error_coordinates(trajectory.state(k), game, x_star, alpha, basis)
        ev1 = max(ev1, float(np.linalg.norm(ec.e_v1)))
    return feas, cons, ev1


def make_report(trajectory, game, params, schedule, x_star, verdicts=None,
                tail_fraction=0.5, conservation_tol=None, feasibility_tol=1e-12,
                ev1_tol=1e-6, extra_params=None):
    """Collect final errors, the decay fit, drift maxima and verdicts."""
    alpha = params.alpha
    s_target, v_target = equilibrium_targets(game, x_star, alpha)
    fin = trajectory.final
    err_x = float(np.linalg.norm(fin.x - x_star))
    err_s = float(np.linalg.norm(fin.s - s_target))
    err_v = float(np.linalg.norm(fin.v - v_target))
    try:
        rate, r2 = rate_fit(trajectory, game, x_star, alpha, tail_fraction)
    except InsufficientDataError:
        rate, r2 = float("nan"), float("nan")
    feas, cons, ev1 = drift_maxima(trajectory, game, x_star, alpha)
    if conservation_tol is None:
        conservation_tol = 1e-8 * float(np.linalg.norm(game.phi(trajectory.x[0])))
    all_verdicts = {
        "feasibility": feas <= feasibility_tol,
        "conservation": cons <= conservation_tol,
        "ev1_constant": ev1 <= ev1_tol,
    }
    all_verdicts.update(verdicts or {})
    echo = {"delta1": params.delta1, "delta2": params.delta2, "alpha": params.alpha,
            "beta": params.beta, "tau": schedule.tau, "N": game.N, "n": game.n,
            "game": game.name}
    echo.update(extra_params or {})
    return Report(err_x, err_s, err_v, rate, r2, feas, cons, conservation_tol, ev1,
                  {k: bool(v) for k, v in all_verdicts.items()}, echo)
