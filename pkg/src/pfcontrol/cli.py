"""Command-line entry point: ``pfcontrol <subcommand> --config run.cfg``.

Data go to CSV files in the output directory, everything else to stderr.
Exit codes: 0 success, 1 solver failure, 2 configuration or input error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .adjoint import duality_sides, gradient_check, solve_adjoint
from .config import RunConfig, check_k_list, eval_control, parse_config
from .diagnostics import (boundedness_check, delay_convergence_study, solution_norm_table,
                          stability_experiment)
from .errors import ConfigError, DegenerateInput, PhaseFieldError, ShapeMismatch, SolverError
from .optimize import optimize
from .state import solve_state
from .tangent import solve_tangent, taylor_remainder_test

log = logging.getLogger("pfcontrol")

COMMANDS = {
    "simulate": "forward solve: state.csv, diagnostics.csv",
    "taylor-test": "tangent Taylor remainders: taylor.csv",
    "gradient-check": "adjoint gradient vs finite differences: gradcheck.csv, duality.csv",
    "optimize": "projected-gradient optimal control: trace.csv, control_opt.csv",
    "stability": "control-to-state stability ratios: stability.csv",
    "bounds": "uniform bounds on rho and mu: bounds.csv",
    "delay-study": "distance between delays k: delay-study.csv",
    "norms": "a priori norm table: norms.csv",
}


class Run:
    """Objects built from a config, shared by every subcommand."""

    def __init__(self, cfg: RunConfig, out: Path, seed: int):
        self.cfg = cfg
        self.out = out
        self.rng = np.random.default_rng(seed)
        self.mesh = cfg.mesh()
        self.params = cfg.params(self.mesh)
        self.spec = cfg.potential()
        self.init = cfg.initial(self.mesh)

    def control(self):
        return self.cfg.control(self.mesh, self.params)

    def direction(self):
        d = self.rng.standard_normal((self.params.N + 1, self.mesh.n_boundary))
        return d / np.abs(d).max()

    def write(self, name, header, rows):
        if self.cfg.wants(name):
            path = io.write_rows(self.out / name, header, rows)
            log.info("wrote %s", path)


def cmd_simulate(run: Run):
    sol = solve_state(run.mesh, run.params, run.spec, run.init, run.control())
    if sol.refinements:
        log.warning("time step refined %d time(s): N=%d", sol.refinements, sol.N)
    if run.cfg.wants("state.csv"):
        io.write_state_csv(run.out / "state.csv", sol)
    if run.cfg.wants("diagnostics.csv"):
        io.write_diagnostics_csv(run.out / "diagnostics.csv", sol)
    log.info("min rho %.6g  max rho %.6g  min mu %.6g  max mu %.6g",
             sol.rho.min(), sol.rho.max(), sol.mu.min(), sol.mu.max())


def cmd_taylor(run: Run):
    spec = run.cfg["taylor.direction"]
    h = eval_control(spec, run.mesh, run.params.times) if spec else run.direction()
    rows = taylor_remainder_test(run.mesh, run.params, run.spec, run.init, run.control(), h,
                                 run.cfg["taylor.scales"])
    run.write("taylor.csv", ["epsilon", "remainder", "order"],
              [(r.epsilon, r.remainder, r.order) for r in rows])
    for r in rows:
        log.info("eps %.3e  remainder %.6e  order %.4f", r.epsilon, r.remainder, r.order)


def cmd_gradient(run: Run):
    u = run.control()
    cost = run.cfg.cost(run.mesh, run.params, run.spec, run.init)
    dirs = [run.direction() for _ in range(run.cfg["gradcheck.directions"])]
    rows = gradient_check(run.mesh, run.params, run.spec, run.init, cost, u, dirs,
                          run.cfg["gradcheck.steps"])
    run.write("gradcheck.csv", ["direction_id", "fd_value", "adjoint_value", "rel_error", "fd_step"],
              [(r.direction_id, r.fd_value, r.adjoint_value, r.rel_error, r.fd_step) for r in rows])
    state = solve_state(run.mesh, run.params, run.spec, run.init, u, adaptive=False,
                        nonnegative=False)
    adj = solve_adjoint(state, cost)
    dual = [duality_sides(state, solve_tangent(state, d), adj, cost) for d in dirs]
    run.write("duality.csv", ["instance", "lhs", "rhs", "residual"],
              [(i, d.lhs, d.rhs, d.residual) for i, d in enumerate(dual)])
    log.info("max gradient rel error %.3e, max duality residual %.3e",
             max(r.rel_error for r in rows), max(d.residual for d in dual))


def cmd_optimize(run: Run):
    cfg = run.cfg
    cost = cfg.cost(run.mesh, run.params, run.spec, run.init)
    aset = cfg.admissible(run.mesh, run.params)
    u0 = run.control() if cfg["control.file"] else None
    u, trace = optimize(run.mesh, run.params, run.spec, run.init, cost, aset, cfg.optimizer(), u0)
    run.write("trace.csv", ["iter", "J", "J_terminal", "J_control", "J_tracking", "vi_residual",
                            "step", "active_fraction", "rate_active"],
              [(r.iter, r.J, r.J_terminal, r.J_control, r.J_tracking, r.vi_residual, r.step,
                r.active_fraction, r.rate_active) for r in trace.rows])
    if cfg.wants("control_opt.csv"):
        io.write_trajectory_csv(run.out / "control_opt.csv", u, run.mesh, run.params.times)
    if not trace.converged:
        log.warning("optimizer stopped after %d iterations (vi %.3e)", len(trace.rows) - 1,
                    trace.rows[-1].vi_residual)


def cmd_stability(run: Run):
    u1 = run.control()
    shape = eval_control(run.cfg["stability.direction"], run.mesh, run.params.times)
    try:
        stability_experiment(run.mesh, run.params, run.spec, run.init, u1, u1)
    except DegenerateInput as exc:
        zero = exc.report
    rows = [(0.0, zero.lhs1, zero.rhs1, zero.ratio1, zero.lhs2, zero.rhs2, zero.ratio2,
             zero.ratio2_no_u0)]
    for p in run.cfg["stability.perturbations"]:
        r = stability_experiment(run.mesh, run.params, run.spec, run.init, u1, u1 + p * shape)
        rows.append((p, r.lhs1, r.rhs1, r.ratio1, r.lhs2, r.rhs2, r.ratio2, r.ratio2_no_u0))
        log.info("perturbation %.1e  ratio1 %.6g  ratio2 %.6g", p, r.ratio1, r.ratio2)
    run.write("stability.csv", ["perturbation", "lhs1", "rhs1", "ratio1", "lhs2", "rhs2", "ratio2",
                                "ratio2_no_u0"], rows)


def cmd_bounds(run: Run):
    b = boundedness_check(solve_state(run.mesh, run.params, run.spec, run.init, run.control()))
    run.write("bounds.csv", ["phi0", "sup_mu", "sup_mu_ratio", "min_rho", "max_rho", "min_mu",
                             "holds"],
              [(b.phi0, b.sup_mu, b.sup_mu_ratio, b.min_rho, b.max_rho, b.min_mu, b.holds)])


def cmd_delay(run: Run):
    check_k_list(run.cfg)
    rows = delay_convergence_study(run.mesh, run.params, run.spec, run.init, run.control(),
                                   run.cfg["delay.k_list"])
    run.write("delay-study.csv", ["k", "tau", "distance", "order"],
              [(r.k, r.tau, r.distance, r.order) for r in rows])


def cmd_norms(run: Run):
    table = solution_norm_table(solve_state(run.mesh, run.params, run.spec, run.init,
                                            run.control()))
    run.write("norms.csv", ["norm", "value"], list(table.items()))


HANDLERS = {
    "simulate": cmd_simulate, "taylor-test": cmd_taylor, "gradient-check": cmd_gradient,
    "optimize": cmd_optimize, "stability": cmd_stability, "bounds": cmd_bounds,
    "delay-study": cmd_delay, "norms": cmd_norms,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pfcontrol", description="Optimal boundary control of a "
                                "delayed phase-field system. Results are written as CSV.")
    sub = p.add_subparsers(dest="command", metavar="SUBCOMMAND", required=True)
    for name, summary in COMMANDS.items():
        s = sub.add_parser(name, help=summary, description=summary)
        s.add_argument("--config", required=True, help="flat section.key = value file")
        s.add_argument("--out", help="output directory (default: output.directory)")
        s.add_argument("--seed", type=int, default=0, help="seed for random directions")
        s.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
        s.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(stream=sys.stderr, level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text, args.override)
        out = Path(args.out or cfg["output.directory"])
        HANDLERS[args.command](Run(cfg, out, args.seed))
    except (ConfigError, ShapeMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        for earlier in getattr(exc, "history", []):
            print(f"failed: {earlier}", file=sys.stderr)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PhaseFieldError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
