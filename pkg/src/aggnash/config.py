"""TOML run configuration: parsing, validation and object construction.

Validation errors name the file and line of the offending key, e.g.
``s1.toml:14: params.delta1 must be strictly positive``.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from aggnash.dynamics import AlgorithmParams, IntegratorConfig
from aggnash.equilibrium import NESolveConfig
from aggnash.errors import ConfigError, ContractError
from aggnash.game import GameConstants, cournot_game, estimate_constants, quadratic_game
from aggnash.network import SwitchingSchedule, WeightedDigraph, named_graph
from aggnash.sets import Ball, Box, HalfspaceIntersection, Simplex, WholeSpace

DEFAULT_T_END_OVER_MU = 200.0


@dataclass
class RunConfig:
    path: str
    raw: dict
    game: object = None
    schedule: object = None
    params: AlgorithmParams | None = None
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    ne: NESolveConfig = field(default_factory=NESolveConfig)
    constants: GameConstants | None = None
    t_end: float | None = None
    T: float | None = None
    seed: int = 0
    require_assumptions: bool = True
    criteria: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    init: dict = field(default_factory=dict)


class _Reader:
    def __init__(self, text, path):
        self.lines = text.splitlines()
        self.path = path

    def line_of(self, dotted):
        parts = dotted.split(".")
        key = parts[-1]
        table = ".".join(parts[:-1])
        current = ""
        pat = re.compile(rf"^\s*{re.escape(key)}\s*=")
        hdr = re.compile(r"^\s*\[\[?\s*([^\]]+?)\s*\]\]?")
        for k, line in enumerate(self.lines, 1):
            m = hdr.match(line)
            if m:
                current = m.group(1)
                if current == dotted:
                    return k
                continue
            if current == table and pat.match(line):
                return k
        for k, line in enumerate(self.lines, 1):
            if re.search(rf"\b{re.escape(key)}\b", line):
                return k
        return 0

    def fail(self, dotted, msg):
        raise ConfigError(f"{self.path}:{self.line_of(dotted)}: {dotted}: {msg}")


def _get(d, key, default=None):
    return d.get(key, default) if isinstance(d, dict) else default


def load_config(path, seed=None):
    path = str(path)
    text = Path(path).read_text()
    return parse_config(text, path, seed)


def parse_config(text, path="<config>", seed=None):
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    rd = _Reader(text, path)
    cfg = RunConfig(path=path, raw=raw)
    cfg.seed = int(seed if seed is not None else raw.get("seed", 0))
    cfg.require_assumptions = bool(raw.get("require_assumptions", True))

    if "game" in raw:
        cfg.game = _build_game(raw["game"], raw.get("sets"), rd)
    cfg.constants = _build_constants(raw.get("constants"), rd)

    if "params" in raw:
        p = raw["params"]
        try:
            cfg.params = AlgorithmParams(float(p["delta1"]), float(p["delta2"]),
                                         float(p["alpha"]), float(p["beta"]))
        except KeyError as exc:
            rd.fail("params", f"missing {exc.args[0]}")
        except ConfigError as exc:
            name = str(exc).split()[0]
            rd.fail(f"params.{name}", str(exc))

    if "integrator" in raw:
        ig = raw["integrator"]
        try:
            cfg.integrator = IntegratorConfig(
                method=str(ig.get("method", "euler")).lower(),
                h=ig.get("h"),
                feasibility_tol=float(ig.get("feasibility_tol", 1e-9)),
                conservation_tol=ig.get("conservation_tol"),
                sample_every=int(ig.get("sample_every", 1)),
            )
        except ConfigError as exc:
            rd.fail("integrator", str(exc))

    if "ne" in raw:
        ne = raw["ne"]
        try:
            cfg.ne = NESolveConfig(k=ne.get("k"), tol=float(ne.get("tol", 1e-10)),
                                   max_iter=int(ne.get("max_iter", 100_000)))
        except ContractError as exc:
            rd.fail("ne", str(exc))

    cfg.t_end = raw.get("t_end")
    if cfg.t_end is not None and not float(cfg.t_end) > 0:
        rd.fail("t_end", "must be positive")
    cfg.T = raw.get("T")
    cfg.criteria = dict(raw.get("criteria", {}))
    cfg.outputs = {"trajectory": "trajectory.csv", "report": "report.txt", "summary": "summary.csv"}
    cfg.outputs.update(raw.get("output", {}))
    cfg.bounds = dict(raw.get("bounds", {}))
    cfg.init = dict(raw.get("init", {}))

    if "network" in raw:
        N = cfg.game.N if cfg.game is not None else raw["network"].get("N")
        if N is None:
            rd.fail("network.N", "node count needed when no game is given")
        cfg.schedule = _build_schedule(raw["network"], int(N), cfg, rd)
    return cfg


def resolve_t_end(cfg):
    """Explicit t_end, or 200/mu from the game's constants."""
    if cfg.t_end is not None:
        return float(cfg.t_end)
    mu = (cfg.constants or estimate_constants(cfg.game)).mu
    return DEFAULT_T_END_OVER_MU / mu


def _build_game(g, sets_spec, rd):
    family = g.get("family")
    try:
        if family == "quadratic":
            a, b, d = (g.get(k) for k in ("a", "b", "d"))
            if a is None or b is None or d is None:
                rd.fail("game.family", "quadratic game needs a, b and d")
            N = len(a)
            n = np.asarray(b, dtype=float).reshape(N, -1).shape[1]
            sets = _build_sets(sets_spec, N, n, rd)
            phi = g.get("phi", "identity")
            if phi == "identity":
                game = quadratic_game(a, b, d, sets)
            elif phi == "affine":
                if "A" not in g:
                    rd.fail("game.phi", "affine aggregate needs A (and optionally c)")
                game = quadratic_game(a, b, d, sets, A=g["A"], c=g.get("c"))
            else:
                rd.fail("game.phi", f"unknown aggregate map {phi!r} (identity or affine)")
        elif family == "cournot":
            for k in ("P0", "gamma", "q"):
                if k not in g:
                    rd.fail("game.family", f"cournot game needs {k}")
            N = len(g["q"])
            n = int(g.get("n", 1))
            sets = _build_sets(sets_spec, N, n, rd)
            game = cournot_game(float(g["P0"]), float(g["gamma"]), g["q"], sets, n=n)
        else:
            rd.fail("game.family", f"unknown game family {family!r} (quadratic or cournot)")
    except (ContractError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        rd.fail("game", str(exc))
    return game


def _build_set(spec, n, rd, where):
    kind = spec.get("kind")
    try:
        if kind == "box":
            return Box(spec["lo"], spec["hi"])
        if kind == "ball":
            return Ball(spec.get("center", [0.0] * n), float(spec["radius"]))
        if kind == "simplex":
            return Simplex(n, float(spec.get("scale", 1.0)))
        if kind == "halfspaces":
            box = spec.get("box")
            return HalfspaceIntersection(spec["normals"], spec["offsets"], spec["interior_point"],
                                         box=tuple(box) if box is not None else None)
        if kind == "whole":
            return WholeSpace(n)
    except KeyError as exc:
        rd.fail(where, f"{kind} set needs {exc.args[0]}")
    except ContractError as exc:
        rd.fail(where, str(exc))
    rd.fail(where, f"unknown set kind {kind!r}")


def _build_sets(spec, N, n, rd):
    if spec is None:
        return [WholeSpace(n) for _ in range(N)]
    if isinstance(spec, dict):
        if "players" in spec:
            items = spec["players"]
            if len(items) != N:
                rd.fail("sets.players", f"expected {N} set descriptions, got {len(items)}")
            out = [_build_set(s, n, rd, "sets.players") for s in items]
        else:
            out = [_build_set(spec, n, rd, "sets.kind") for _ in range(N)]
    else:
        rd.fail("sets", "must be a table")
    if any(s.dim != n for s in out):
        rd.fail("sets", f"every set must have dimension {n}")
    return out


def _build_constants(c, rd):
    if c is None:
        return None
    try:
        return GameConstants(mu=float(c["mu"]), theta=float(c["theta"]),
                             theta_hat=float(c.get("theta_hat", 0.0)), l=float(c.get("l", 1.0)),
                             p=None if c.get("p") is None else float(c["p"]))
    except KeyError as exc:
        rd.fail("constants", f"missing {exc.args[0]}")
    except ContractError as exc:
        rd.fail("constants", str(exc))


def _build_schedule(net, N, cfg, rd):
    graphs = []
    for k, gspec in enumerate(net.get("graphs", [])):
        try:
            if isinstance(gspec, str):
                graphs.append(named_graph(gspec, N))
            else:
                W = np.asarray(gspec, dtype=float)
                if W.shape != (N, N):
                    rd.fail("network.graphs", f"graph {k} must be {N}x{N}")
                graphs.append(WeightedDigraph(W, name=f"matrix{k}"))
        except ConfigError as exc:
            if str(exc).startswith(rd.path):
                raise
            rd.fail("network.graphs", f"graph {k}: {exc}")
        except ContractError as exc:
            rd.fail("network.graphs", f"graph {k}: {exc}")
    if not graphs:
        rd.fail("network.graphs", "at least one graph is required")
    pattern = net.get("pattern", [0])
    dwell = net.get("dwell")
    if dwell is None:
        rd.fail("network.dwell", "dwell per segment is required")
    periodic = bool(net.get("periodic", True))
    # horizon is fixed later (it may depend on mu); use the pattern length now
    total = float(np.sum(np.broadcast_to(np.asarray(dwell, float), (len(pattern),))))
    horizon = float(cfg.t_end) if cfg.t_end is not None else total
    try:
        return SwitchingSchedule.from_pattern(graphs, pattern, dwell, horizon, periodic)
    except ConfigError as exc:
        rd.fail("network.pattern", str(exc))


def with_horizon(schedule, horizon):
    return SwitchingSchedule(schedule.graphs, schedule.instants, schedule.indices,
                             schedule.tau, float(horizon), schedule.periodic)
