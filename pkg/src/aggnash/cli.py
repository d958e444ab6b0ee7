"""Command-line entry point.

Subcommands: run, check-graph, solve-ne, bounds, batch.
Exit codes: 0 success, 1 error, 2 verdict failure.

Results are printed as ``key = value`` lines (machine-parseable) after a
short human-readable summary; run also writes the trajectory CSV, the
key-value report and a one-row CSV summary into ``--out``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from aggnash.config import load_config, resolve_t_end, with_horizon
from aggnash.diagnostics import make_report
from aggnash.dynamics import SimState, default_init, simulate
from aggnash.equilibrium import solve_ne, step_bounds, verify_vi
from aggnash.errors import ConfigError, ContractError, FeasibilityError, NonConvergenceError
from aggnash.game import estimate_constants
from aggnash.network import verify_assumption4

log = logging.getLogger("aggnash")

EXIT_OK, EXIT_ERROR, EXIT_VERDICT = 0, 1, 2


def _vec(v):
    return "[" + ", ".join(f"{x:.17g}" for x in np.asarray(v, dtype=float)) + "]"


def _window(cfg):
    if cfg.T is not None:
        return float(cfg.T)
    return 2 * cfg.schedule.tau if len(set(cfg.schedule.indices)) > 1 else cfg.schedule.tau


def _initial_state(cfg):
    init = cfg.init
    game = cfg.game
    base = default_init(game, cfg.seed)
    x = np.asarray(init.get("x", base.x), dtype=float).ravel()
    s = np.asarray(init.get("s", base.s), dtype=float).ravel()
    v = np.asarray(init.get("v", base.v), dtype=float).ravel()
    return SimState(0.0, x, s, v)


def run_config(cfg, out_dir, emit=print):
    """Execute one ``run``; returns the exit code."""
    if cfg.game is None or cfg.schedule is None or cfg.params is None:
        raise ConfigError(f"{cfg.path}: run needs [game], [network] and [params]")
    game = cfg.game
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    sol = solve_ne(game, cfg.ne)
    t_end = resolve_t_end(cfg)
    schedule = with_horizon(cfg.schedule, t_end)
    a4 = verify_assumption4(schedule, _window(cfg))
    vi = verify_vi(game, sol.x, sample_count=500, seed=cfg.seed, tol=1e-8)

    verdicts = {
        "weight_balanced": a4.all_balanced,
        "jointly_connected": a4.jointly_connected,
        "ne_residual": sol.residual <= max(cfg.ne.tol, 1e-10),
        "variational_inequality": vi.passed,
    }
    if cfg.require_assumptions and not (a4.all_balanced and a4.jointly_connected):
        for line in a4.lines():
            emit(line)
        emit("verdict = assumption check failed; set require_assumptions = false to simulate anyway")
        return EXIT_VERDICT

    traj = simulate(game, cfg.params, schedule, _initial_state(cfg), cfg.integrator, t_end,
                    require_balanced=cfg.require_assumptions, seed=cfg.seed)
    traj.metadata["config"] = cfg.path
    traj.to_csv(out / cfg.outputs["trajectory"])

    report = make_report(
        traj, game, cfg.params, schedule, sol.x, verdicts,
        conservation_tol=cfg.integrator.conservation_tol,
        feasibility_tol=1e-12 if cfg.integrator.method == "euler" else cfg.integrator.feasibility_tol,
        extra_params={"t_end": t_end, "seed": cfg.seed, "method": cfg.integrator.method,
                      "h_max": traj.metadata["integrator"]["h_max"], "steps": traj.metadata["steps"],
                      "T": a4.T, "ne_residual": sol.residual, "ne_iterations": sol.iterations,
                      "ne_k": sol.k, "vi_min": vi.min_value},
    )
    crit = cfg.criteria
    for key, attr in (("max_err_x", "err_x"), ("max_err_s", "err_s"), ("max_err_v", "err_v")):
        if key in crit:
            report.verdicts[key] = getattr(report, attr) <= float(crit[key])
    if crit.get("require_decay", False):
        report.verdicts["decay"] = report.rate < 0 and report.rate_r2 >= float(crit.get("min_r2", 0.0))

    (out / cfg.outputs["report"]).write_text(report.to_text())
    (out / cfg.outputs["summary"]).write_text(report.csv_header() + "\n" + report.csv_row() + "\n")

    emit(f"# run {cfg.path}: |x-x*|={report.err_x:.3e} |s-s*|={report.err_s:.3e} "
         f"|v-v*|={report.err_v:.3e} rate={report.rate:.4g} (r2={report.rate_r2:.4f})")
    emit(report.to_text().rstrip("\n"))
    return EXIT_OK if report.passed() else EXIT_VERDICT


def cmd_run(args):
    cfg = load_config(args.config, args.seed)
    return run_config(cfg, args.out)


def cmd_check_graph(args):
    cfg = load_config(args.config, args.seed)
    if cfg.schedule is None:
        raise ConfigError(f"{cfg.path}: check-graph needs a [network] table")
    schedule = cfg.schedule
    rep = verify_assumption4(schedule, _window(cfg))
    print(f"# {len(schedule.graphs)} graph(s), dwell {schedule.tau:g}, "
          f"{'periodic' if schedule.periodic else 'aperiodic'}")
    for line in rep.lines():
        print(line)
    return EXIT_OK if rep.all_balanced and rep.jointly_connected else EXIT_VERDICT


def cmd_solve_ne(args):
    cfg = load_config(args.config, args.seed)
    if cfg.game is None:
        raise ConfigError(f"{cfg.path}: solve-ne needs a [game] table")
    sol = solve_ne(cfg.game, cfg.ne)
    X = sol.x.reshape(cfg.game.N, cfg.game.n)
    print(f"# Nash equilibrium after {sol.iterations} iterations (residual {sol.residual:.3e})")
    for i, row in enumerate(X, 1):
        print(f"# player {i}: {np.array2string(row, precision=6)}")
    print(f"x_star = {_vec(sol.x)}")
    print(f"residual = {sol.residual:.17g}")
    print(f"iterations = {sol.iterations}")
    print(f"k = {sol.k:.17g}")
    return EXIT_OK


def cmd_bounds(args):
    cfg = load_config(args.config, args.seed)
    consts = cfg.constants
    if consts is None:
        if cfg.game is None:
            raise ConfigError(f"{cfg.path}: bounds needs [constants] or a [game]")
        consts = estimate_constants(cfg.game)
    p = args.p if args.p is not None else cfg.bounds.get("p", consts.p)
    if p is not None:
        consts = consts.with_p(float(p))
    delta1 = args.delta1 if args.delta1 is not None else cfg.bounds.get("delta1")
    alpha = args.alpha if args.alpha is not None else cfg.bounds.get("alpha")
    if delta1 is None and cfg.params is not None:
        delta1 = cfg.params.delta1
    if alpha is None and cfg.params is not None:
        alpha = cfg.params.alpha
    if delta1 is None or alpha is None:
        raise ConfigError(f"{cfg.path}: bounds needs delta1 and alpha ([bounds] table or flags)")
    print(f"# delta1_star = 2*mu/theta^2 = {2 * consts.mu / consts.theta**2:.6g}")
    b = step_bounds(consts, float(delta1), float(alpha))
    print(f"# any delta2 < {b.delta2_star:.6g} is sufficient for delta1 = {b.delta1:g}")
    for line in b.lines():
        print(line)
    return EXIT_OK


def _batch_one(path, out, seed):
    lines = []
    try:
        cfg = load_config(path, seed)
        code = run_config(cfg, Path(out) / Path(path).stem, emit=lines.append)
    except (ConfigError, ContractError, NonConvergenceError, FeasibilityError, OSError) as exc:
        lines.append(f"error: {exc}")
        code = EXIT_ERROR
    return path, code, lines


def cmd_batch(args):
    paths = list(args.configs) + ([args.config] if args.config else [])
    if not paths:
        raise ConfigError("batch needs at least one config")
    worst = EXIT_OK
    with ProcessPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        futures = [pool.submit(_batch_one, p, args.out, args.seed) for p in paths]
        for fut in futures:
            path, code, lines = fut.result()
            print(f"# {path}: exit {code}")
            for line in lines:
                print(line)
            worst = max(worst, code)
    return worst


def build_parser():
    parser = argparse.ArgumentParser(prog="aggnash", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="TOML run configuration")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, help="parallel runs (batch only)")

    common(sub.add_parser("run", help="solve, check, simulate and report"))
    common(sub.add_parser("check-graph", help="verify weight balance and joint connectivity"))
    common(sub.add_parser("solve-ne", help="centralized Nash equilibrium oracle"))
    pb = sub.add_parser("bounds", help="sufficient gains delta1*, delta2*")
    common(pb)
    pb.add_argument("--delta1", type=float)
    pb.add_argument("--alpha", type=float)
    pb.add_argument("--p", type=float, help="bound on the consensus Lyapunov matrix")
    pbat = sub.add_parser("batch", help="run several configs, optionally in parallel")
    common(pbat, config_required=False)
    pbat.add_argument("configs", nargs="*")
    return parser


COMMANDS = {
    "run": cmd_run,
    "check-graph": cmd_check_graph,
    "solve-ne": cmd_solve_ne,
    "bounds": cmd_bounds,
    "batch": cmd_batch,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ContractError, NonConvergenceError, FeasibilityError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
