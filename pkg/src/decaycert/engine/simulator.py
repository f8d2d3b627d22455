"""Finite-dimensional instances of  u' = A(t) u + F(t, u) + b(t).

The simulator measures the dissipativity margin of A(t), samples the nonlinearity envelope |F(t, u)| <= c0 |u|**p,
integrates the system with step-halving RK4 and runs the full synthesize / certify / integrate / verify pipeline
against the norm trajectory g(t) = |u(t)|.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from decaycert.constant import DEFAULT_T_END, DEFAULT_TOLERANCE, OVERFLOW_GUARD, RK4_AGREEMENT
from decaycert.engine.inequality import check_majorant_condition, verify_bound
from decaycert.engine.synthesis import Regime, certificate_families, synthesize
from decaycert.families import ZERO, CoefficientFunction, number_option
from decaycert.numerics.rk4 import integrate_on_grid

_logger = logging.getLogger(__name__)

# relative slack allowed when comparing |F| with c0 |u|**p
ENVELOPE_RTOL = 1e-12
# relative slack of the end-to-end bound check, absorbs integrator error on tight certificates
END_TO_END_RTOL = 1e-6


def _matrix(raw, label, square=True):
    try:
        matrix = np.array(raw, dtype=complex if _has_complex(raw) else float)
    except (TypeError, ValueError):
        raise ValueError("Invalid configuration option '{0}' - value must be a row-major nested list of numbers."
                         .format(label))
    if matrix.ndim != 2 or (square and matrix.shape[0] != matrix.shape[1]):
        raise ValueError("Invalid configuration option '{0}' - value must be a square matrix.".format(label))
    if not np.all(np.isfinite(matrix)):
        raise ValueError("Invalid configuration option '{0}' - entries must be finite.".format(label))
    return matrix


def _has_complex(raw):
    if isinstance(raw, (list, tuple)):
        return any(_has_complex(x) for x in raw)
    return isinstance(raw, complex)


def _frozen(array):
    array = np.array(array)
    array.flags.writeable = False
    return array


def _kind(options, label):
    if not isinstance(options, dict) or "kind" not in options:
        raise ValueError("Invalid configuration option '{0}.kind' - option missing.".format(label))
    return str(options["kind"]).strip().lower().replace("-", "_").replace(" ", "_")


# ----- A(t) ---------------------------------------------------------------------------


class MatrixFunction(object):
    """Time-dependent square matrix A(t)."""

    def at(self, t):
        raise NotImplementedError()

    @property
    def dim(self):
        raise NotImplementedError()

    def margin_on_grid(self, times):
        return np.asarray([dissipativity_margin(self, float(t)) for t in times], dtype=float)

    @staticmethod
    def from_config(options, label="problem.A"):
        kind = _kind(options, label)
        if kind == "constant":
            return ConstantMatrix(_matrix(options.get("matrix"), label + ".matrix"))
        if kind == "scaled":
            return ScaledByCoefficient(_matrix(options.get("matrix"), label + ".matrix"),
                                       CoefficientFunction.from_config(options.get("s"), label + ".s"))
        raise ValueError("Invalid configuration option '{0}.kind' - '{1}' is not a matrix variant.".format(
            label, options["kind"]))


class ConstantMatrix(MatrixFunction):
    def __init__(self, matrix):
        self._matrix = _frozen(_square(matrix))

    def at(self, t):
        return self._matrix

    @property
    def matrix(self):
        return self._matrix

    @property
    def dim(self):
        return self._matrix.shape[0]

    def margin_on_grid(self, times):
        return np.full(np.shape(times), dissipativity_margin(self._matrix))


class ScaledByCoefficient(MatrixFunction):
    """s(t) M for a non-negative coefficient s."""

    def __init__(self, matrix, s):
        self._matrix = _frozen(_square(matrix))
        self._s = s

    def at(self, t):
        return self._s.value(t) * self._matrix

    @property
    def matrix(self):
        return self._matrix

    @property
    def s(self):
        return self._s

    @property
    def dim(self):
        return self._matrix.shape[0]

    def margin_on_grid(self, times):
        # the margin of s M is s times the margin of M since s >= 0
        return np.asarray(self._s.value(np.asarray(times, dtype=float))) * dissipativity_margin(self._matrix)


def _square(matrix):
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("matrix must be square, got shape {0}".format(matrix.shape))
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix must be finite")
    return matrix


def dissipativity_margin(a, t=0.0):
    """-(largest eigenvalue of (A(t) + A(t)^H) / 2): the largest gamma with Re(A u, u) <= -gamma |u|**2.

    :param a: MatrixFunction or a plain square matrix
    :param t: time at which a MatrixFunction is evaluated
    """
    matrix = a.at(t) if isinstance(a, MatrixFunction) else _square(a)
    hermitian = 0.5 * (matrix + np.conj(matrix).T)
    return float(-np.max(np.linalg.eigvalsh(hermitian)))


# ----- F(t, u) ------------------------------------------------------------------------


class NonlinearTerm(object):
    dim = None

    def value(self, t, u):
        raise NotImplementedError()

    @staticmethod
    def from_config(options, label="problem.F"):
        if options is None:
            return ZeroTerm()
        kind = _kind(options, label)
        if kind == "zero":
            return ZeroTerm()
        if kind == "norm_power":
            direction = options.get("D")
            return NormPower(number_option(options, "c0", label, lambda x: x >= 0, "non-negative"),
                             number_option(options, "p", label, lambda x: x > 1, "greater than 1"),
                             _matrix(direction, label + ".D") if direction is not None else None)
        raise ValueError("Invalid configuration option '{0}.kind' - '{1}' is not a nonlinear term.".format(
            label, options["kind"]))


class ZeroTerm(NonlinearTerm):
    def value(self, t, u):
        return np.zeros_like(u)


class NormPower(NonlinearTerm):
    """c0 |u|**(p-1) D u with operator norm |D| <= 1; D = None means the identity."""

    def __init__(self, c0, p, direction=None):
        if not c0 >= 0:
            raise ValueError("NormPower needs c0 >= 0, got {0}".format(c0))
        if not p > 1:
            raise ValueError("p must exceed 1, got {0}".format(p))
        if direction is not None:
            direction = _frozen(_square(direction))
            if np.linalg.norm(direction, 2) > 1.0 + ENVELOPE_RTOL:
                raise ValueError("direction matrix D must have operator norm <= 1")
            self.dim = direction.shape[0]
        self.c0 = float(c0)
        self.p = float(p)
        self._direction = direction

    @property
    def direction(self):
        return self._direction

    def value(self, t, u):
        scale = self.c0 * np.linalg.norm(u) ** (self.p - 1.0)
        if self._direction is None:
            return scale * u
        return scale * (self._direction @ u)


# ----- b(t) ---------------------------------------------------------------------------


class Forcing(object):
    dim = None

    def value(self, t):
        raise NotImplementedError()

    def envelope(self):
        """The coefficient beta(t) bounding |b(t)|."""
        raise NotImplementedError()

    @staticmethod
    def from_config(options, label="problem.b"):
        if options is None:
            return ZeroForcing()
        kind = _kind(options, label)
        if kind == "zero":
            return ZeroForcing()
        if kind == "envelope":
            e = np.asarray(_matrix([options.get("e")], label + ".e", square=False)[0])
            return EnvelopeVector(CoefficientFunction.from_config(options.get("beta"), label + ".beta"), e)
        raise ValueError("Invalid configuration option '{0}.kind' - '{1}' is not a forcing variant.".format(
            label, options["kind"]))


class ZeroForcing(Forcing):
    def value(self, t):
        return 0.0

    def envelope(self):
        return ZERO


class EnvelopeVector(Forcing):
    """beta(t) e with a unit vector e."""

    def __init__(self, beta, e):
        e = np.asarray(e)
        if e.ndim != 1 or abs(np.linalg.norm(e) - 1.0) > DEFAULT_TOLERANCE:
            raise ValueError("forcing direction e must be a unit vector")
        self._beta = beta
        self._e = _frozen(e)
        self.dim = e.size

    @property
    def beta(self):
        return self._beta

    @property
    def e(self):
        return self._e

    def value(self, t):
        return self._beta.value(t) * self._e

    def envelope(self):
        return self._beta


# ----- Problem and trajectory ---------------------------------------------------------


class EvolutionProblem(object):
    """u' = A(t) u + F(t, u) + b(t), u(0) = u0."""

    def __init__(self, a, f=None, b=None, u0=None):
        self._a = a
        self._f = f if f is not None else ZeroTerm()
        self._b = b if b is not None else ZeroForcing()
        u0 = np.array(u0, dtype=complex if np.iscomplexobj(u0) else float).reshape(-1)
        if u0.size != a.dim:
            raise ValueError("u0 has {0} components, A is {1} x {1}".format(u0.size, a.dim))
        if not np.all(np.isfinite(u0)):
            raise ValueError("u0 must be finite")
        for part, name in ((self._f, "F"), (self._b, "b")):
            if part.dim is not None and part.dim != a.dim:
                raise ValueError("{0} acts on dimension {1}, A on {2}".format(name, part.dim, a.dim))
        self._u0 = _frozen(u0)

    @classmethod
    def from_config(cls, options, label="problem"):
        if not isinstance(options, dict):
            raise ValueError("Invalid configuration option '{0}' - section missing.".format(label))
        a = MatrixFunction.from_config(options.get("A"), label + ".A")
        raw_u0 = options.get("u0")
        if not isinstance(raw_u0, (list, tuple)) or not raw_u0:
            raise ValueError("Invalid configuration option '{0}.u0' - value must be a non-empty list.".format(label))
        u0 = _matrix([raw_u0], label + ".u0", square=False)[0]
        try:
            return cls(a, NonlinearTerm.from_config(options.get("F"), label + ".F"),
                       Forcing.from_config(options.get("b"), label + ".b"), u0)
        except ValueError as e:
            if "Invalid configuration option" in str(e):
                raise
            raise ValueError("Invalid configuration option '{0}' - {1}".format(label, e))

    @property
    def a(self):
        return self._a

    @property
    def f(self):
        return self._f

    @property
    def b(self):
        return self._b

    @property
    def u0(self):
        return self._u0

    @property
    def dim(self):
        return self._a.dim

    def rhs(self, t, u):
        return self._a.at(t) @ u + self._f.value(t, u) + self._b.value(t)


@dataclass
class Trajectory(object):
    times: np.ndarray
    states: np.ndarray
    norms: np.ndarray
    escape_time: Optional[float]
    diagnostics: dict

    @property
    def blew_up(self):
        return self.escape_time is not None


def integrate(problem, grid, rtol=RK4_AGREEMENT, guard=OVERFLOW_GUARD):
    """RK4 with step halving until whole and half steps agree within rtol; states and norms at the grid points.

    A blow-up ends the trajectory at the last grid point reached and sets `escape_time`.

    :param problem: EvolutionProblem
    :param grid: TimeGrid
    :return: Trajectory
    """
    solution = integrate_on_grid(problem.rhs, np.array(problem.u0), grid.points, rtol=rtol, guard=guard)
    states = np.asarray(solution.states).reshape(solution.reached, problem.dim)
    norms = np.linalg.norm(states, axis=1)
    _logger.debug("Integrated {0} grid points ({1} accepted, {2} rejected steps)".format(
        solution.reached, solution.diagnostics.accepted, solution.diagnostics.rejected))
    return Trajectory(times=solution.times[:solution.reached], states=states, norms=norms,
                      escape_time=solution.escape_time, diagnostics=solution.diagnostics.as_dict())


# ----- Nonlinearity envelope ----------------------------------------------------------


@dataclass
class EnvelopeReport(object):
    samples: int
    max_ratio: float
    violations: List = field(default_factory=list)

    @property
    def passed(self):
        return not self.violations


def verify_nonlinearity_envelope(f, c0, p, samples, rng=None, dim=None, t_end=DEFAULT_T_END):
    """Samples (t, u) with |u| log-uniform in [1e-6, 10] and checks |F(t, u)| <= c0 |u|**p (1 + 1e-12).

    :param f: NonlinearTerm
    :param dim: state dimension when F does not fix one
    :return: EnvelopeReport with the largest ratio |F| / (c0 |u|**p) and every witnessing (t, u)
    """
    if samples < 1:
        raise ValueError("samples must be at least 1, got {0}".format(samples))
    rng = rng if rng is not None else np.random.default_rng(0)
    dim = f.dim or dim or 1
    report = EnvelopeReport(samples=int(samples), max_ratio=0.0)
    for _ in range(int(samples)):
        t = float(rng.uniform(0.0, t_end))
        direction = rng.standard_normal(dim)
        direction /= np.linalg.norm(direction)
        radius = 10.0 ** rng.uniform(-6.0, 1.0)
        u = radius * direction
        size = float(np.linalg.norm(f.value(t, u)))
        limit = c0 * radius ** p
        ratio = size / limit if limit > 0 else (0.0 if size == 0 else math.inf)
        report.max_ratio = max(report.max_ratio, ratio)
        if size > limit * (1.0 + ENVELOPE_RTOL):
            report.violations.append((t, u))
    if report.violations:
        _logger.warning("Nonlinearity exceeds c0 |u|^p at {0} of {1} samples (max ratio {2:.6g})".format(
            len(report.violations), samples, report.max_ratio))
    return report


# ----- Closed form oracle -------------------------------------------------------------


@dataclass
class OracleResult(object):
    value: float
    escape_time: Optional[float]

    @property
    def exists(self):
        return not math.isinf(self.value)


def bernoulli_escape_time(k, c0, p, u0):
    """Blow-up time of g' = -k g + c0 g**p from u0, None when the solution exists for all t."""
    x = c0 * u0 ** (p - 1.0)
    if x <= k:
        return None
    return math.log(x / (x - k)) / ((p - 1.0) * k)


def bernoulli_oracle(k, c0, p, u0, t):
    """Closed form solution of g' = -k g + c0 g**p, g(0) = u0 > 0.

    With v = g**(1-p) the equation becomes linear:
    g(t) = [(u0**(1-p) - c0/k) exp((p-1) k t) + c0/k]**(-1/(p-1)). The solution exists for all t iff
    c0 u0**(p-1) <= k; otherwise `escape_time` is finite and the value past it is inf.

    :param t: time, or numpy array of times
    :return: OracleResult
    """
    if not (u0 > 0 and k > 0 and p > 1 and c0 >= 0):
        raise ValueError("the oracle needs u0 > 0, k > 0, c0 >= 0 and p > 1")
    escape = bernoulli_escape_time(k, c0, p, u0)
    times = np.asarray(t, dtype=float)
    ratio = c0 / k
    excess = u0 ** (1.0 - p) - ratio
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        # g = exp(-k t) [excess + ratio exp(-(p-1) k t)]**(-1/(p-1)), stable for large t
        inner = excess + ratio * np.exp(-(p - 1.0) * k * times)
        value = np.exp(-k * times) * np.power(inner, -1.0 / (p - 1.0))
    if escape is not None:
        value = np.where(times >= escape, np.inf, value)
    value = float(value) if np.ndim(t) == 0 else value
    return OracleResult(value=value, escape_time=escape)


# ----- End to end ---------------------------------------------------------------------


@dataclass
class StageResult(object):
    name: str
    passed: bool
    detail: str


@dataclass
class EndToEndReport(object):
    regime: Regime
    stages: List[StageResult] = field(default_factory=list)
    synthesis: Optional[object] = None
    certificate: Optional[object] = None
    trajectory: Optional[Trajectory] = None
    bound_report: Optional[object] = None
    margins: Optional[np.ndarray] = None
    envelope: Optional[EnvelopeReport] = None

    @property
    def passed(self):
        return len(self.stages) == 5 and all(s.passed for s in self.stages)

    @property
    def failed_stage(self):
        for stage in self.stages:
            if not stage.passed:
                return stage.name
        return None

    def _record(self, name, passed, detail):
        self.stages.append(StageResult(name, bool(passed), detail))
        if passed:
            _logger.info("Stage {0}: passed ({1})".format(name, detail))
        else:
            _logger.warning("Stage {0}: failed ({1}), later stages skipped".format(name, detail))
        return passed


def _check_preconditions(problem, gamma, beta, constants, grid, envelope_samples, rng, tol):
    t = grid.points
    margins = problem.a.margin_on_grid(t)
    shortfall = np.asarray(gamma.value(t)) - margins
    envelope = verify_nonlinearity_envelope(problem.f, constants.c0, constants.p, envelope_samples, rng=rng,
                                            dim=problem.dim, t_end=grid.t_end)
    forcing = np.asarray([np.linalg.norm(problem.b.value(float(s))) for s in t]) - np.asarray(beta.value(t))
    problems = []
    if np.any(shortfall > tol):
        problems.append("measured margin below declared gamma at t = {0:.6g}".format(
            float(t[np.argmax(shortfall > tol)])))
    if not envelope.passed:
        problems.append("nonlinearity envelope violated (max ratio {0:.6g})".format(envelope.max_ratio))
    if np.any(forcing > tol):
        problems.append("forcing exceeds its envelope at t = {0:.6g}".format(float(t[np.argmax(forcing > tol)])))
    return margins, envelope, problems


def end_to_end_verify(problem, regime, constants, grid, envelope_samples=200, rng=None, tol=DEFAULT_TOLERANCE,
                      rtol=END_TO_END_RTOL):
    """Synthesize, certify, integrate and verify, after checking the problem matches the declared constants.

    Stages: preconditions (measured margin dominates the declared gamma, |F| <= c0 |u|**p on samples,
    |b| <= beta), synthesize, certify, integrate, verify. The first failing stage ends the run.

    :param problem: EvolutionProblem
    :param regime: Regime or its name
    :param constants: ProblemConstants
    :param grid: TimeGrid
    :return: EndToEndReport
    """
    regime = Regime.from_text(regime) if not isinstance(regime, Regime) else regime
    report = EndToEndReport(regime=regime)
    alpha, beta, gamma = certificate_families(regime, constants)

    margins, envelope, problems = _check_preconditions(problem, gamma, beta, constants, grid, envelope_samples,
                                                       rng, tol)
    report.margins, report.envelope = margins, envelope
    if not report._record("preconditions", not problems, "; ".join(problems) or "margin, envelope and forcing ok"):
        return report

    synthesis = synthesize(regime, constants)
    report.synthesis = synthesis
    if not report._record("synthesize", synthesis.feasible,
                          synthesis.majorant.describe() if synthesis.feasible else "; ".join(synthesis.reasons)):
        return report
    mu = synthesis.majorant

    g0 = float(np.linalg.norm(problem.u0))
    certificate = check_majorant_condition(alpha, beta, gamma, mu, g0, grid, tol=tol)
    report.certificate = certificate
    if not report._record("certify", certificate.feasible,
                          "{0}, initial product {1:.6g}".format(certificate.status, certificate.initial_product)):
        return report

    trajectory = integrate(problem, grid)
    report.trajectory = trajectory
    if not report._record("integrate", not trajectory.blew_up,
                          "escape near t = {0:.6g}".format(trajectory.escape_time) if trajectory.blew_up
                          else "{0} grid points".format(trajectory.times.size)):
        return report

    bound_report = verify_bound(trajectory.times, trajectory.norms, mu, rtol=rtol)
    report.bound_report = bound_report
    report._record("verify", bound_report.passed,
                   "min relative margin {0:.6g}".format(bound_report.min_relative_margin) if bound_report.passed
                   else "{0} violation(s), first at t = {1:.6g}".format(len(bound_report.violations),
                                                                       bound_report.violations[0]))
    return report
