"""Command line entry point: ``gridmdp <subcommand> --config FILE``.

Subcommands
-----------
validate   check the configuration and exit
solve      write the optimal policy (policy.csv)
analyze    policy plus stationary analysis tables
simulate   as ``analyze``, with Monte Carlo rows added to summary.csv

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
4 I/O error.
"""

import argparse
import csv
import io
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import analyze, simulate_trajectory
from .config import ConfigError, MonteCarloConfig, load_config
from .devices import baseline_policy, build_device
from .exceptions import ConvergenceError, ValidationError
from .mdp import bellman_residual, policy_evaluation, policy_iteration, value_iteration
from .price import stationary_distribution

log = logging.getLogger("gridmdp")

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_IO = 0, 2, 3, 4
COMMANDS = ("validate", "solve", "analyze", "simulate")


@dataclass
class ExperimentResult:
    config: object
    chain: object
    model: object
    optimal_policy: np.ndarray
    optimal_value: np.ndarray
    policy: np.ndarray
    value: np.ndarray
    n_iter: int
    residual: float
    report: object = None
    baseline_report: object = None
    simulation: object = None


def run_experiment(config, command="analyze"):
    """Build, solve and analyse the experiment described by ``config``.

    ``command`` is one of ``solve``, ``analyze`` or ``simulate`` and
    controls how much of the pipeline runs.
    """
    chain = config.price.chain()
    model = build_device(config.device.spec(), chain)
    s = config.solver
    if s.algorithm == "value_iteration":
        value, optimal, n_iter = value_iteration(model, s.gamma, s.tol, s.max_iter, return_n_iter=True)
    else:
        value, optimal, n_iter = policy_iteration(model, s.gamma, return_n_iter=True)
    residual = bellman_residual(model, value, s.gamma)
    log.info("solved %s with %s in %d iterations (residual %.2e)",
             config.device.kind, s.algorithm, n_iter, residual)

    baseline = baseline_policy(model, config.analysis.baseline_action)
    if config.analysis.evaluate == "baseline":
        policy, policy_value = baseline, policy_evaluation(model, baseline, s.gamma)
    else:
        policy, policy_value = optimal, value
    result = ExperimentResult(config, chain, model, optimal, value, policy, policy_value, n_iter, residual)
    if command == "solve":
        return result

    initial = config.initial_distribution()
    result.report = analyze(model, policy, initial)
    result.baseline_report = analyze(model, baseline, initial)
    if command == "simulate":
        mc = config.analysis.monte_carlo or MonteCarloConfig()
        result.simulation = simulate_trajectory(model, policy, mc.steps, mc.seed, n_batches=mc.batches)
    return result


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _summary_rows(result):
    cfg, report, base = result.config, result.report, result.baseline_report
    rows = [
        ("device_kind", cfg.device.kind),
        ("algorithm", cfg.solver.algorithm),
        ("gamma", cfg.solver.gamma),
        ("solver_iterations", result.n_iter),
        ("bellman_residual", result.residual),
        ("evaluated_policy", cfg.analysis.evaluate),
        ("baseline_action", cfg.analysis.baseline_action),
    ]
    if report is None:
        return rows
    savings = 100.0 * (report.average_reward - base.average_reward) / abs(base.average_reward) \
        if base.average_reward != 0 else float("nan")
    extra = 100.0 * (report.average_consumption - base.average_consumption) / base.average_consumption \
        if base.average_consumption != 0 else float("nan")
    rows += [
        ("average_reward", report.average_reward),
        ("average_consumption", report.average_consumption),
        ("baseline_average_reward", base.average_reward),
        ("baseline_average_consumption", base.average_consumption),
        ("percent_savings", savings),
        ("percent_consumption_change", extra),
        ("expected_price", float(stationary_distribution(result.chain) @ result.chain.levels)),
        ("mean_discounted_value", float(report.joint_stationary @ result.value)),
        ("reducible", report.reducible),
        ("recurrent_classes", report.recurrent_classes),
    ]
    sim = result.simulation
    if sim is not None:
        rows += [
            ("mc_steps", sim.states.size - 1),
            ("mc_seed", sim.seed),
            ("mc_average_reward", sim.average_reward),
            ("mc_reward_stderr", sim.reward_stderr),
            ("mc_average_consumption", sim.average_consumption),
            ("mc_consumption_stderr", sim.consumption_stderr),
            ("mc_total_variation", 0.5 * float(np.abs(sim.occupancy - report.joint_stationary).sum())),
        ]
    return rows


def build_tables(result):
    """Rows for each output table, keyed by table name; headers first."""
    model, chain = result.model, result.chain
    labels = model.state_labels
    names = model.action_names
    tables = {
        "policy": [("x", "c", "action")]
        + [(x, c, names[a]) for (x, c), a in zip(labels, result.policy)],
    }
    report = result.report
    if report is not None:
        tables["stationary"] = [("x", "c", "probability")] + [
            (x, c, p) for (x, c), p in zip(labels, report.joint_stationary)
        ]
        tables["price_marginal"] = [("c", "price", "probability")] + [
            (c, chain.levels[c], p) for c, p in enumerate(report.price_marginal)
        ]
        tables["machine_marginal"] = [("x", "probability")] + list(enumerate(report.machine_marginal))
        tables["demand_curve"] = [("c", "price", "expected_demand")] + [
            (c, chain.levels[c], e) for c, e in enumerate(report.demand_curve)
        ]
    tables["summary"] = [("metric", "value")] + _summary_rows(result)
    return tables


def _render(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def emit_tables(tables, directory, selection=None):
    """Write ``tables`` as ``<name>.csv`` files into ``directory``.

    Files are first written to a scratch directory next to the target and
    then moved into place, so a failure leaves no partial output.

    Returns
    -------
    list of Path
    """
    directory = Path(directory)
    names = [n for n in tables if selection is None or n in selection]
    directory.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".gridmdp-", dir=directory.parent))
    try:
        for name in names:
            with open(scratch / f"{name}.csv", "w", encoding="utf-8", newline="") as fh:
                fh.write(_render(tables[name]))
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for name in names:
            target = directory / f"{name}.csv"
            os.replace(scratch / f"{name}.csv", target)
            written.append(target)
        return written
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def _parser():
    parser = argparse.ArgumentParser(prog="gridmdp", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON experiment configuration")
    parser.add_argument("--out", help="output directory (overrides output.directory)")
    parser.add_argument("--baseline-policy", metavar="ACTION",
                        help="evaluate the price-ignoring policy that always plays ACTION")
    parser.add_argument("--gamma", type=float, help="discount factor (overrides solver.gamma)")
    parser.add_argument("--seed", type=int, help="Monte Carlo seed (overrides analysis.monte_carlo.seed)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _apply_overrides(config, args):
    changes = {}
    if args.out is not None:
        changes["output.directory"] = args.out
    if args.gamma is not None:
        changes["solver.gamma"] = args.gamma
    if args.seed is not None:
        changes["analysis.monte_carlo.seed"] = args.seed
    if args.baseline_policy is not None:
        changes["analysis.baseline_action"] = args.baseline_policy
        changes["analysis.evaluate"] = "baseline"
    return config.override(**changes) if changes else config


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _apply_overrides(load_config(args.config), args)
    except OSError as exc:
        print(f"gridmdp: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"gridmdp: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print("config OK")
        return EXIT_OK

    try:
        result = run_experiment(config, args.command)
    except ConvergenceError as exc:
        print(f"gridmdp: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ValidationError as exc:
        print(f"gridmdp: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        written = emit_tables(build_tables(result), config.output.directory, config.output.tables)
    except OSError as exc:
        print(f"gridmdp: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in written:
        log.info("wrote %s", path)
    if result.report is not None:
        print(f"average_reward={result.report.average_reward:.6f} "
              f"average_consumption={result.report.average_consumption:.6f}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
