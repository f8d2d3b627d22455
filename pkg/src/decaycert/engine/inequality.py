"""Continuous majorant certificates.

For the inequality  g' <= -gamma(t) g + alpha(t, g) + beta(t)  a positive C1 majorant mu(t) certifies
0 <= g(t) < 1/mu(t) for all t >= 0 when

    alpha(t, 1/mu) + beta(t) <= (1/mu) (gamma(t) - mu'(t)/mu(t))     for every t >= 0      (majorant condition)
    mu(0) g(0) < 1                                                                          (initial condition)

and with mu(0) g(0) = 1 the conclusion holds with <= instead of <.
"""
import functools
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from decaycert.constant import (DEFAULT_GRID_POINTS, DEFAULT_T_END, DEFAULT_TOLERANCE, MAX_EXPONENT,
                                OVERFLOW_GUARD, QUADRATURE_TOLERANCE, RK4_AGREEMENT)
from decaycert.errors import QuadratureOverflowError
from decaycert.families import (Constant, ExponentialDecay, Exponential, Generic, Power, PowerDecay, PowerLaw,
                                Tabulated, local_lipschitz)
from decaycert.numerics.quadrature import adaptive_simpson, piecewise_simpson
from decaycert.numerics.rk4 import integrate_on_grid

_logger = logging.getLogger(__name__)


class TimeGrid(object):
    """Strictly increasing, finite sample times starting at t = 0."""

    def __init__(self, points):
        points = np.array(points, dtype=float)
        if points.ndim != 1 or points.size < 2:
            raise ValueError("a time grid needs at least 2 points, got {0}".format(points.size))
        if points[0] != 0:
            raise ValueError("a time grid must start at t = 0, got {0}".format(points[0]))
        if not np.all(np.isfinite(points)) or np.any(np.diff(points) <= 0):
            raise ValueError("time grid points must be finite and strictly increasing")
        points.flags.writeable = False
        self._points = points

    @classmethod
    def geometric(cls, t_end=DEFAULT_T_END, count=DEFAULT_GRID_POINTS):
        """Points t_i = (1 + T)**(i / (n - 1)) - 1: dense near 0, wide near T."""
        if not (t_end > 0 and count >= 2):
            raise ValueError("geometric grid needs t_end > 0 and count >= 2")
        x = np.linspace(0.0, 1.0, int(count))
        points = np.expm1(x * math.log1p(t_end))
        points[0] = 0.0
        points[-1] = t_end
        return cls(points)

    @classmethod
    def uniform(cls, t_end=DEFAULT_T_END, count=DEFAULT_GRID_POINTS):
        if not (t_end > 0 and count >= 2):
            raise ValueError("uniform grid needs t_end > 0 and count >= 2")
        return cls(np.linspace(0.0, t_end, int(count)))

    @property
    def points(self):
        return self._points

    @property
    def t_end(self):
        return float(self._points[-1])

    def __len__(self):
        return self._points.size

    def __repr__(self):
        return "TimeGrid({0} points on [0, {1:g}])".format(len(self), self.t_end)


@dataclass(frozen=True)
class InequalityCheck(object):
    """One named inequality, its slack (right side minus left side) and whether it passed."""
    tag: str
    statement: str
    slack: float
    passed: bool


@dataclass
class Certificate(object):
    times: np.ndarray
    slack: np.ndarray
    bound: np.ndarray
    feasible: bool
    initial_ok: bool
    borderline: bool
    strict: bool
    initial_product: float
    first_violation: Optional[float]
    proven_for_all_t: bool
    reduction: Optional[str]
    decays_to_zero: bool
    lipschitz: Optional[float]
    checks: List[InequalityCheck] = field(default_factory=list)

    @property
    def status(self):
        if not self.feasible:
            return "infeasible"
        if self.proven_for_all_t:
            return "proven for all t"
        return "grid-verified, not proven for all t"


# ----- Integrating factor ---------------------------------------------------------------


@functools.lru_cache(maxsize=64)
def _tabulated_table_integral(gamma):
    """Integral of a Tabulated gamma over its whole table, [0, last knot]."""
    value, _ = piecewise_simpson(gamma.value, 0.0, gamma.knots[-1], breakpoints=gamma.knots)
    return value


def _tabulated_exponent(gamma, t):
    last = gamma.knots[-1]
    if t > last:
        # constant extrapolation beyond the last knot
        return _tabulated_table_integral(gamma) + gamma.values[-1] * (t - last)
    value, _ = piecewise_simpson(gamma.value, 0.0, t, breakpoints=gamma.knots)
    return value


def log_integrating_factor(gamma, t):
    """The exponent of the integrating factor, i.e. the integral of gamma over [0, t]."""
    if t < 0:
        raise ValueError("time must be non-negative, got {0}".format(t))
    t = float(t)
    if isinstance(gamma, Constant):
        return gamma.c * t
    if isinstance(gamma, PowerDecay):
        if gamma.q == 1:
            return gamma.c * math.log1p(t)
        return gamma.c * ((1.0 + t) ** (1.0 - gamma.q) - 1.0) / (1.0 - gamma.q)
    if isinstance(gamma, ExponentialDecay):
        if gamma.r == 0:
            return gamma.c * t
        return gamma.c * -math.expm1(-gamma.r * t) / gamma.r
    if isinstance(gamma, Tabulated):
        return _tabulated_exponent(gamma, t)
    value, _ = adaptive_simpson(gamma.value, 0.0, t, QUADRATURE_TOLERANCE)
    return value


def integrating_factor(gamma, t):
    """a(t) = exp(integral of gamma over [0, t]).

    Analytic for Constant, PowerDecay and ExponentialDecay, Simpson quadrature (restarted at every knot) for
    Tabulated.

    :raises QuadratureOverflowError: if the exponent is beyond the double precision range
    """
    if np.ndim(t) > 0:
        return np.asarray([integrating_factor(gamma, float(s)) for s in np.asarray(t)], dtype=float)
    exponent = log_integrating_factor(gamma, t)
    if exponent > MAX_EXPONENT:
        raise QuadratureOverflowError(exponent)
    if isinstance(gamma, PowerDecay) and gamma.q == 1:
        return (1.0 + float(t)) ** gamma.c
    return math.exp(exponent)


def integral_diverges(gamma):
    """True when the integral of gamma over [0, infinity) is infinite, i.e. a(t) grows without bound."""
    if isinstance(gamma, Constant):
        return gamma.c > 0
    if isinstance(gamma, PowerDecay):
        return gamma.c > 0 and gamma.q <= 1
    if isinstance(gamma, ExponentialDecay):
        return gamma.c > 0 and gamma.r == 0
    if isinstance(gamma, Tabulated):
        return gamma.values[-1] > 0
    return False


def integrating_factor_majorant(gamma):
    """mu = a(t) with mu' = gamma(t) a(t): the majorant that makes the zero-forcing slack vanish."""
    return Generic(eval_fn=lambda t: integrating_factor(gamma, t),
                   deriv_fn=lambda t: gamma.value(t) * integrating_factor(gamma, t),
                   name="a", grows_unbounded=integral_diverges(gamma))


def bound_at(mu, t):
    """The certified bound 1/mu(t)."""
    return 1.0 / mu.value(t)


def eta_at(gamma, mu, t):
    """a(t)/mu(t), the envelope of the transformed variable v = a g."""
    return integrating_factor(gamma, t) / mu.value(t)


# ----- Majorant condition -------------------------------------------------------------


def _power_profile(gamma):
    """(c, q) when gamma is c/(1+t)**q; Constant counts as q = 0."""
    if isinstance(gamma, PowerDecay):
        return gamma.c, gamma.q
    if isinstance(gamma, Constant):
        return gamma.c, 0.0
    return None


def _reduction(alpha, beta, gamma, mu, tol):
    """Checks whether the majorant condition for every t >= 0 reduces to its value at t = 0.

    For a power law alpha, constant or power decaying gamma and beta, and an exponential or power majorant, the
    condition divided by the dissipation profile is nonincreasing in t under explicit exponent constraints, so it
    holds for all t once it holds at t = 0.

    :return: (InequalityCheck list, reduction description) or (None, None) when no reduction applies
    """
    if not isinstance(alpha, PowerLaw):
        return None, None
    c0, p = alpha.c0, alpha.p
    beta_zero = beta.is_zero
    if isinstance(mu, Exponential) and beta_zero and isinstance(gamma, Constant):
        if mu.b < 0:
            return None, None
        k, lam, b = gamma.c, mu.lam, mu.b
        budget = k - (c0 / lam ** (p - 1) + b)
        return [InequalityCheck("exp_rate_budget", "c0 / lambda^(p-1) + b <= k", budget, budget >= -tol)], \
            "exponential majorant, constant dissipation: monotone in t, checked at t = 0"
    profile = _power_profile(gamma)
    if not isinstance(mu, Power) or profile is None or mu.nu < 0:
        return None, None
    c1, q1 = profile
    lam, nu = mu.lam, mu.nu
    if beta_zero:
        shape_ok = q1 <= 1 and (p - 1) * nu >= q1
        budget = c1 - (c0 / lam ** (p - 1) + nu)
        return [InequalityCheck("power_monotonicity", "q1 <= 1 and (p - 1) nu >= q1",
                                min(1 - q1, (p - 1) * nu - q1), shape_ok),
                InequalityCheck("power_rate_budget", "c0 / lambda^(p-1) + nu <= c1", budget, budget >= -tol)], \
            "power majorant, power dissipation: monotone in t, checked at t = 0"
    beta_profile = _power_profile(beta)
    if beta_profile is None:
        return None, None
    c2, q2 = beta_profile
    shape_slack = min(1.0, q2 - nu, nu * (p - 1)) - q1
    budget = c1 - (c0 / lam ** (p - 1) + lam * c2 + nu)
    return [InequalityCheck("forced_monotonicity", "q1 <= min(1, q2 - nu, nu (p - 1))", shape_slack,
                            shape_slack >= 0),
            InequalityCheck("forced_rate_budget", "c0 / lambda^(p-1) + lambda c2 + nu <= c1", budget,
                            budget >= -tol)], \
        "power majorant, power forcing: monotone in t, checked at t = 0"


def _initial_verdict(product, tol):
    """(initial_ok, borderline) for mu(0) g(0)."""
    if product < 1.0 - tol:
        return True, False
    if abs(product - 1.0) <= tol:
        return True, True
    return False, False


def check_majorant_condition(alpha, beta, gamma, mu, g0, grid, tol=DEFAULT_TOLERANCE):
    """Evaluates the majorant condition and the initial condition on a grid.

    An infeasible certificate is a normal return value.

    :param alpha: Nonlinearity
    :param beta: CoefficientFunction, the forcing envelope
    :param gamma: CoefficientFunction, the dissipation
    :param mu: Majorant
    :param g0: g(0) >= 0
    :param grid: TimeGrid
    :param tol: absolute tolerance on the slack
    :return: Certificate
    """
    if g0 < 0:
        raise ValueError("g0 must be non-negative, got {0}".format(g0))
    if tol < 0:
        raise ValueError("tol must be non-negative, got {0}".format(tol))
    t = grid.points
    m = np.asarray(mu.value(t), dtype=float)
    dm = np.asarray(mu.derivative(t), dtype=float)
    inverse = 1.0 / m
    lhs = alpha.on_grid(t, inverse) + np.asarray(beta.value(t), dtype=float)
    rhs = inverse * (np.asarray(gamma.value(t), dtype=float) - dm / m)
    slack = rhs - lhs

    # NaN slack (mu overflowing to inf) counts as a violation
    violated = np.nonzero(~(slack >= -tol))[0]
    first_violation = float(t[violated[0]]) if violated.size else None
    product = float(m[0]) * float(g0)
    initial_ok, borderline = _initial_verdict(product, tol)

    checks = [InequalityCheck("majorant_condition",
                              "alpha(t, 1/mu) + beta(t) <= (1/mu)(gamma(t) - mu'/mu) on the grid",
                              float(np.min(slack)), not violated.size),
              InequalityCheck("initial_condition", "mu(0) g(0) < 1" if not borderline else "mu(0) g(0) <= 1",
                              1.0 - product, initial_ok)]
    reduction_checks, reduction = _reduction(alpha, beta, gamma, mu, tol)
    proven = False
    if reduction_checks is not None:
        checks.extend(reduction_checks)
        proven = all(c.passed for c in reduction_checks)
        if not proven:
            reduction = None

    feasible = initial_ok and not violated.size
    lipschitz = None
    try:
        lipschitz = float(local_lipschitz(alpha, grid.t_end, float(np.max(inverse))))
    except NotImplementedError:
        pass
    certificate = Certificate(times=t, slack=slack, bound=inverse, feasible=feasible, initial_ok=initial_ok,
                              borderline=borderline, strict=initial_ok and not borderline,
                              initial_product=product, first_violation=first_violation,
                              proven_for_all_t=feasible and proven, reduction=reduction,
                              decays_to_zero=mu.unbounded, lipschitz=lipschitz, checks=checks)
    if feasible:
        _logger.info("Majorant {0} certified ({1}).".format(mu.describe(), certificate.status))
    else:
        _logger.warning("Majorant {0} rejected: initial product {1:.6g}, first violation at {2}".format(
            mu.describe(), product, first_violation))
    return certificate


# ----- Comparison ODE -----------------------------------------------------------------


@dataclass
class ComparisonTrajectory(object):
    times: np.ndarray
    w: np.ndarray
    a: np.ndarray
    a_over_mu: Optional[np.ndarray]
    escape_time: Optional[float]
    diagnostics: dict

    @property
    def blew_up(self):
        return self.escape_time is not None

    def dominated(self, rtol=1e-6):
        """w(t_i) <= a(t_i)/mu(t_i) (1 + rtol) at every grid point reached."""
        if self.a_over_mu is None:
            raise ValueError("domination needs a majorant")
        n = self.w.size
        return bool(np.all(self.w <= self.a_over_mu[:n] * (1.0 + rtol)))


def solve_comparison_ode(alpha, beta, gamma, v0, grid, mu=None, rtol=RK4_AGREEMENT, guard=OVERFLOW_GUARD):
    """Integrates w' = a(t) [alpha(t, w/a(t)) + beta(t)], w(0) = v0.

    The solution dominates every solution of the transformed inequality; for a feasible majorant it stays below
    a(t)/mu(t). A blow-up ends the trajectory early and sets `escape_time`.

    :param mu: optional Majorant; when given, a/mu is returned alongside w
    :return: ComparisonTrajectory
    """
    if v0 < 0:
        raise ValueError("v0 must be non-negative, got {0}".format(v0))

    def rhs(t, w):
        a = integrating_factor(gamma, t)
        return a * (alpha.value(t, max(w, 0.0) / a) + beta.value(t))

    t = grid.points
    a = integrating_factor(gamma, t)
    solution = integrate_on_grid(rhs, float(v0), t, rtol=rtol, guard=guard)
    w = np.asarray(solution.states, dtype=float)
    a_over_mu = a / np.asarray(mu.value(t), dtype=float) if mu is not None else None
    if solution.blew_up:
        _logger.warning("Comparison solution escapes near t = {0:.10g}".format(solution.escape_time))
    return ComparisonTrajectory(times=t, w=w, a=a, a_over_mu=a_over_mu, escape_time=solution.escape_time,
                                diagnostics=solution.diagnostics.as_dict())


# ----- Bound verification -------------------------------------------------------------


@dataclass
class BoundReport(object):
    times: np.ndarray
    values: np.ndarray
    bound: np.ndarray
    violations: List[float]
    min_margin: float
    min_relative_margin: float
    max_relative_margin: float
    decays_to_zero: bool

    @property
    def passed(self):
        return not self.violations


def verify_bound(times, values, mu, tol=0.0, rtol=0.0):
    """Checks g(t_i) <= (1/mu(t_i)) (1 + rtol) + tol along a sampled trajectory.

    Violations are data in the report, never exceptions.

    :param times: sample times (non-negative)
    :param values: g at the sample times
    :param mu: Majorant
    :param tol: absolute tolerance
    :param rtol: relative tolerance
    :return: BoundReport
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape:
        raise ValueError("times and values must have the same length")
    bound = 1.0 / np.asarray(mu.value(times), dtype=float)
    margin = bound - values
    violated = ~(values <= bound * (1.0 + rtol) + tol)
    violations = [float(t) for t in times[violated]]
    relative = margin / bound
    report = BoundReport(times=times, values=values, bound=bound, violations=violations,
                         min_margin=float(np.min(margin)) if margin.size else float("inf"),
                         min_relative_margin=float(np.min(relative)) if relative.size else float("inf"),
                         max_relative_margin=float(np.max(relative)) if relative.size else float("inf"),
                         decays_to_zero=mu.unbounded)
    if violations:
        _logger.warning("Bound {0} violated at {1} point(s), first at t = {2:.6g}".format(
            mu.describe(), len(violations), violations[0]))
    return report
