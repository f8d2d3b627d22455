import argparse
import logging
import os
import sys
from collections import OrderedDict
from dataclasses import dataclass, field
from logging.handlers import RotatingFileHandler
from multiprocessing import Pool
from typing import List
# noinspection PyProtectedMember
from timeit import default_timer as timer

import numpy as np

from decaycert.constant import MiB
from decaycert.engine.discrete import evolve_extremal, verify_discrete_bound
from decaycert.engine.inequality import InequalityCheck, check_majorant_condition, solve_comparison_ode, verify_bound
from decaycert.engine.simulator import END_TO_END_RTOL, dissipativity_margin, end_to_end_verify, integrate
from decaycert.engine.synthesis import (Regime, lambda_min_power, sweep_forced_nu, sweep_power_epsilon,
                                        synthesize)
from decaycert.errors import (ArtifactWriteError, QuadratureOverflowError, ScenarioParseError,
                              ScenarioValidationError)
from . import version
from .artifacts import ArtifactStore
from .config import Mode, load_scenario

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_PARSE_ERROR = 2
EXIT_VALIDATION_ERROR = 3
EXIT_IO_ERROR = 4

LOG_FORMAT = "%(asctime)s - %(levelname)-7s - %(module)s - %(message)s"


# noinspection PySameParameterValue
def log_option_value(label, value, padding=27):
    logger.info("{0:{2}}: {1}".format(label, value, padding))


@dataclass
class Outcome(object):
    """Everything one pipeline produced, ready for the report, the summary and the CSV tables."""
    passed: bool
    verdict: str
    checks: List[InequalityCheck] = field(default_factory=list)
    values: dict = field(default_factory=OrderedDict)
    stages: list = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    tables: dict = field(default_factory=dict)


def _trajectory_table(trajectory, mu):
    """Rows t, g, bound, slack; bound and slack stay empty without a majorant."""
    if mu is None:
        return [(t, g, None, None) for t, g in zip(trajectory.times, trajectory.norms)]
    bound = 1.0 / np.asarray(mu.value(trajectory.times), dtype=float)
    return [(t, g, b, b - g) for t, g, b in zip(trajectory.times, trajectory.norms, bound)]


class ScenarioRunner(object):
    def __init__(self, scenario, logfile=None, debug=False, configure_logging=True):
        self._scenario = scenario
        self.logfile = logfile or os.path.join(scenario.output, "decaycert.log")
        self.debug = debug
        self.configure_logging = configure_logging
        self._log_handler = None

    @property
    def scenario(self):
        return self._scenario

    def initialize_logging(self):
        os.makedirs(os.path.dirname(os.path.abspath(self.logfile)), exist_ok=True)

        root_logger = logging.getLogger()
        root_logger.setLevel(logging.DEBUG if self.debug else logging.getLevelName(self._scenario.log_level))
        for handler in root_logger.handlers:
            handler.close()
        root_logger.handlers = []

        rlh = RotatingFileHandler(self.logfile, maxBytes=10 * MiB, backupCount=10)
        rlh.setFormatter(logging.Formatter(fmt=LOG_FORMAT))
        self._log_handler = rlh
        root_logger.addHandler(rlh)
        console = logging.StreamHandler(sys.stderr)
        console.setFormatter(logging.Formatter(fmt=LOG_FORMAT))
        root_logger.addHandler(console)

    def run(self):
        """Runs the scenario's pipeline and writes its artifacts.

        :return: exit code (0 pass, 1 infeasible or violated, 4 I/O failure)
        """
        start = timer()
        if self.configure_logging:
            try:
                self.initialize_logging()
            except (IOError, OSError) as e:
                sys.stderr.write("Output Error: could not open log file {0}: {1}\n".format(self.logfile, e))
                return EXIT_IO_ERROR
        logger.info("starting decaycert {0} | scenario {1} | mode {2}".format(
            version.__version__, self._scenario.name, self._scenario.mode))
        log_option_value("Output directory", self._scenario.output)
        log_option_value("Grid", repr(self._scenario.grid))

        outcome = self.execute()
        try:
            report = ArtifactStore(self._scenario.output).write_all(self._scenario, outcome)
        except ArtifactWriteError as e:
            sys.stderr.write("Output Error: {}\n".format(e))
            logger.error(e)
            return EXIT_IO_ERROR
        logger.info("{0}: {1} ({2:.3f} seconds), report at {3}".format(
            self._scenario.name, outcome.verdict, timer() - start, report))
        return EXIT_PASS if outcome.passed else EXIT_FAIL

    def execute(self):
        pipelines = {Mode.Certify: self._certify,
                     Mode.Simulate: self._simulate,
                     Mode.Synthesize: self._synthesize,
                     Mode.Discrete: self._discrete,
                     Mode.End2End: self._end_to_end}
        logger.debug("Running {0} pipeline".format(self._scenario.mode))
        return pipelines[self._scenario.mode]()

    def _certify(self):
        s = self._scenario
        certificate = check_majorant_condition(s.alpha, s.beta, s.gamma, s.majorant, s.g0, s.grid, tol=s.tol)
        outcome = Outcome(passed=certificate.feasible, verdict=certificate.status, checks=list(certificate.checks))
        outcome.values.update([("majorant", s.majorant.describe()), ("g0", s.g0),
                               ("initial_product", certificate.initial_product),
                               ("decays_to_zero", certificate.decays_to_zero)])
        if certificate.lipschitz is not None:
            outcome.values["lipschitz_bound"] = certificate.lipschitz
        if certificate.reduction:
            outcome.notes.append(certificate.reduction)
        if certificate.borderline:
            outcome.notes.append("mu(0) g(0) = 1 within tolerance: the bound holds with <= only")
        if certificate.first_violation is not None:
            outcome.notes.append("majorant condition first fails at t = {0:.6g}".format(certificate.first_violation))

        try:
            comparison = solve_comparison_ode(s.alpha, s.beta, s.gamma, s.g0, s.grid, mu=s.majorant)
        except QuadratureOverflowError as e:
            outcome.notes.append("comparison solution skipped: {0}".format(e))
            return outcome
        reached = comparison.w.size
        outcome.tables["comparison.csv"] = (("t", "w", "a_over_mu"),
                                            list(zip(comparison.times[:reached], comparison.w,
                                                     comparison.a_over_mu[:reached])))
        if comparison.blew_up:
            outcome.notes.append("comparison solution escapes near t = {0:.6g}".format(comparison.escape_time))
        if certificate.feasible:
            envelope = comparison.a_over_mu[:reached]
            dominated = comparison.dominated(END_TO_END_RTOL) and not comparison.blew_up
            outcome.checks.append(InequalityCheck("bound", "w(t) <= a(t)/mu(t) on the grid",
                                                  float(np.min((envelope - comparison.w) / envelope)), dominated))
            if not dominated:
                outcome.passed = False
                outcome.verdict = "comparison solution exceeds a/mu"
        return outcome

    def _simulate(self):
        s = self._scenario
        trajectory = integrate(s.problem, s.grid)
        outcome = Outcome(passed=not trajectory.blew_up,
                          verdict="escaped" if trajectory.blew_up else "integrated")
        outcome.values.update([("dimension", s.problem.dim),
                               ("dissipativity_margin_t0", dissipativity_margin(s.problem.a, 0.0)),
                               ("g0", float(np.linalg.norm(s.problem.u0)))])
        outcome.values.update((key, value) for key, value in trajectory.diagnostics.items())
        if trajectory.blew_up:
            outcome.values["escape_time"] = trajectory.escape_time
        if s.majorant is not None:
            report = verify_bound(trajectory.times, trajectory.norms, s.majorant, rtol=END_TO_END_RTOL)
            outcome.values["majorant"] = s.majorant.describe()
            outcome.checks.append(InequalityCheck("bound", "|u(t)| <= 1/mu(t) on the grid",
                                                  report.min_relative_margin, report.passed))
            if not report.passed:
                outcome.passed = False
                outcome.verdict = "bound violated"
                outcome.notes.append("bound first violated at t = {0:.6g}".format(report.violations[0]))
            elif outcome.passed:
                outcome.verdict = "bound holds on the grid"
        outcome.tables["trajectory.csv"] = (("t", "g", "bound", "slack"), _trajectory_table(trajectory, s.majorant))
        return outcome

    def _synthesize(self):
        s = self._scenario
        c = s.constants
        result = synthesize(s.regime, c)
        outcome = Outcome(passed=result.feasible, verdict="feasible" if result.feasible else "infeasible",
                          checks=list(result.checks))
        outcome.values.update(result.constants)
        outcome.values.update([("initial_radius", result.initial_radius), ("majorant", result.majorant.describe()),
                               ("decay", result.decay_description)])
        if s.regime is Regime.Power:
            outcome.values["lambda_min"] = lambda_min_power(c.c1, c.c0, c.p)
        if s.sweep and s.regime is Regime.Power:
            best = sweep_power_epsilon(c.c1, c.q1, c.c0, c.p, count=s.sweep)
            outcome.notes.append("epsilon sweep: " + ("no feasible epsilon" if best is None else
                                                      "largest radius {0:.6g} at nu = {1:.6g}".format(
                                                          best.initial_radius, best.constants["nu"])))
        if s.sweep and s.regime is Regime.Forced:
            best = sweep_forced_nu(c.c1, c.q1, c.c0, c.p, c.c2, c.q2, count=s.sweep)
            outcome.notes.append("nu sweep: " + ("no feasible nu" if best is None else
                                                 "largest admissible nu {0:.6g}".format(best.constants["nu"])))
        if result.feasible:
            t = s.grid.points
            outcome.tables["bound.csv"] = (("t", "bound"), list(zip(t, 1.0 / np.asarray(result.majorant.value(t)))))
        return outcome

    def _discrete(self):
        s = self._scenario
        scheme = s.scheme
        report = verify_discrete_bound(scheme, s.g0, tol=s.tol)
        check = report.check
        outcome = Outcome(passed=report.passed, verdict="bound holds" if report.passed else
                          ("engine defect" if report.engine_bug else "infeasible"))
        outcome.checks.append(InequalityCheck(
            "discrete_majorant_condition",
            "alpha(n, 1/mu[n]) + beta[n] <= (1/mu[n]) (gamma[n] - (mu[n+1] - mu[n]) / (h mu[n])) for every n",
            float(np.min(check.slack)), bool(np.all(check.step_ok))))
        outcome.checks.append(InequalityCheck("discrete_initial_condition", "g[0] mu[0] <= 1",
                                              1.0 - s.g0 * float(scheme.mu_seq[0]), bool(check.initial_ok)))
        sequence = report.sequence
        if sequence is None:
            sequence = evolve_extremal(scheme, s.g0)
        else:
            outcome.checks.append(InequalityCheck("bound", "g[n] <= 1/mu[n] along the extremal sequence",
                                                  report.min_margin, not report.engine_bug))
        outcome.values.update([("h", s.discrete.h), ("n_max", scheme.n_max), ("majorant", s.majorant.describe())])
        if check.first_violation is not None:
            outcome.notes.append("discrete condition first fails at n = {0}".format(check.first_violation))
        if sequence.diverged_at is not None:
            outcome.notes.append("extremal sequence diverges at n = {0}".format(sequence.diverged_at))
        bound = 1.0 / np.asarray(scheme.mu_seq, dtype=float)
        outcome.tables["discrete.csv"] = (("n", "g", "bound"),
                                          [(n, g, b) for n, (g, b) in enumerate(zip(sequence.g, bound))])
        return outcome

    def _end_to_end(self):
        s = self._scenario
        report = end_to_end_verify(s.problem, s.regime, s.constants, s.grid, tol=s.tol)
        outcome = Outcome(passed=report.passed,
                          verdict="pass" if report.passed else "failed at stage {0}".format(report.failed_stage),
                          stages=list(report.stages))
        if report.synthesis is not None:
            outcome.checks.extend(report.synthesis.checks)
            outcome.values.update(report.synthesis.constants)
            outcome.values["initial_radius"] = report.synthesis.initial_radius
            outcome.values["majorant"] = report.synthesis.majorant.describe()
        if report.margins is not None and report.margins.size:
            outcome.values["min_dissipativity_margin"] = float(np.min(report.margins))
        if report.envelope is not None:
            outcome.values["envelope_max_ratio"] = report.envelope.max_ratio
        if report.certificate is not None:
            outcome.checks.extend(report.certificate.checks)
            outcome.values["certificate"] = report.certificate.status
        if report.bound_report is not None:
            outcome.checks.append(InequalityCheck("bound", "|u(t)| <= 1/mu(t) on the grid",
                                                  report.bound_report.min_relative_margin,
                                                  report.bound_report.passed))
        if report.trajectory is not None:
            outcome.tables["trajectory.csv"] = (("t", "g", "bound", "slack"),
                                                _trajectory_table(report.trajectory, report.synthesis.majorant))
        return outcome


def run(scenario, debug=False, configure_logging=True):
    """Executes a validated Scenario and writes report.txt, summary.json and its CSV tables.

    :return: exit code, 0 on pass and 1 on an infeasible certificate or a violated bound, 4 on I/O failure
    """
    return ScenarioRunner(scenario, debug=debug, configure_logging=configure_logging).run()


def _run_path(task):
    path, mode, overrides, out_root, debug = task
    try:
        scenario = load_scenario(path, mode=mode, overrides=overrides)
    except ScenarioParseError as e:
        sys.stderr.write("Scenario Error: {}\n".format(e))
        logger.error(e)
        return EXIT_PARSE_ERROR
    except ScenarioValidationError as e:
        logger.error("Scenario {0} is invalid: {1}".format(path, e))
        return EXIT_VALIDATION_ERROR
    if out_root is not None:
        scenario.output = os.path.join(out_root, scenario.name)
    return run(scenario, debug=debug)


def build_parser():
    parser = argparse.ArgumentParser(prog="decaycert",
                                     description="Certify decay bounds for dissipative evolution problems.")
    parser.add_argument("mode", choices=[m.value for m in Mode], help="Pipeline to run")
    parser.add_argument("scenario", nargs="+", help="YAML scenario file(s)")
    parser.add_argument("--out", default=None, help="Output directory (per scenario subdirectory in batch mode)")
    parser.add_argument("--grid-points", type=int, default=None, help="Number of grid points")
    parser.add_argument("--t-end", type=float, default=None, help="Grid horizon")
    parser.add_argument("--tol", type=float, default=None, help="Absolute slack tolerance")
    parser.add_argument("--jobs", type=int, default=1, help="Scenarios run concurrently in batch mode")
    parser.add_argument("--debug", action="store_true", help="Log at DEBUG level")
    parser.add_argument("--version", action="version", version="%(prog)s {0}".format(version.__version__))
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.debug else logging.INFO, format=LOG_FORMAT)

    overrides = {key: value for key, value in (("grid_points", args.grid_points), ("t_end", args.t_end),
                                               ("tol", args.tol)) if value is not None}
    mode = Mode.from_text(args.mode)
    batch = len(args.scenario) > 1
    if not batch and args.out:
        overrides["output"] = args.out
    out_root = (args.out or "out") if batch else None
    tasks = [(path, mode, overrides, out_root, args.debug) for path in args.scenario]

    if batch and args.jobs > 1:
        with Pool(processes=min(args.jobs, len(tasks))) as pool:
            codes = pool.map(_run_path, tasks)
    else:
        codes = [_run_path(task) for task in tasks]
    return max(codes)
