"""Explicit majorants for power-law nonlinearities.

With alpha(t, g) = c0 g**p the majorant condition can be solved in closed form for three dissipation/forcing
regimes:

* exponential: constant dissipation k, mu = lambda exp((k - eps) t), lambda = (c0/eps)**(1/(p-1));
* power: dissipation c1/(1+t)**q1 with q1 <= 1, mu = lambda (1+t)**(c1 - eps), same lambda;
* forced: power dissipation plus forcing below c2/(1+t)**q2, mu = lambda0 (1+t)**nu where lambda0 minimises
  h(lambda) = c0/lambda**(p-1) + lambda c2.

The smallest admissible lambda is always used, since the initial radius is 1/lambda. Infeasible constants give a
result with feasible=False and the violated inequalities named; only malformed input raises.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

from decaycert.constant import DEFAULT_TOLERANCE
from decaycert.engine.inequality import InequalityCheck
from decaycert.families import ZERO, Constant, Exponential, Majorant, Power, PowerDecay, PowerLaw

_logger = logging.getLogger(__name__)


class Regime(Enum):
    Exponential = "EXPONENTIAL"
    SmallData = "SMALL_DATA"
    Power = "POWER"
    Forced = "FORCED"

    @classmethod
    def from_text(cls, text, default=None):
        """Converts text into a Regime.

        :param text: The regime in text form.
        :param default: If text is empty or None, returns this value.
        """
        if text:
            return cls(str(text).strip().upper().replace("-", "_"))
        return default

    def __repr__(self):
        return self.name

    def __str__(self):
        return self.value.lower()


@dataclass(frozen=True)
class ProblemConstants(object):
    c0: float
    p: float
    k: Optional[float] = None
    c1: Optional[float] = None
    q1: Optional[float] = None
    c2: Optional[float] = None
    q2: Optional[float] = None
    epsilon: Optional[float] = None
    nu: Optional[float] = None
    u0_norm: Optional[float] = None

    # keys each regime needs besides c0 and p
    required = {Regime.Exponential: ("k", "epsilon"),
                Regime.SmallData: ("k", "u0_norm"),
                Regime.Power: ("c1", "q1", "epsilon"),
                Regime.Forced: ("c1", "q1", "c2", "q2", "nu")}

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValueError("Invalid configuration option 'constants.c0' - value must be positive.")
        if not self.p > 1:
            raise ValueError("Invalid configuration option 'constants.p' - p must exceed 1.")
        for name in ("k", "c1", "c2", "q2", "epsilon", "nu", "u0_norm"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError("Invalid configuration option 'constants.{0}' - value must be positive.".format(name))
        if self.q1 is not None:
            if not self.q1 >= 0:
                raise ValueError("Invalid configuration option 'constants.q1' - value must be non-negative.")
            if self.q1 > 1:
                raise ValueError("Invalid configuration option 'constants.q1' - q1 must not exceed 1.")

    def missing_for(self, regime):
        return [name for name in self.required[regime] if getattr(self, name) is None]

    def as_dict(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass
class SynthesisResult(object):
    regime: Regime
    majorant: Majorant
    initial_radius: float
    decay_description: str
    feasible: bool
    checks: List[InequalityCheck] = field(default_factory=list)
    constants: dict = field(default_factory=dict)

    @property
    def reasons(self):
        """Statements of the violated inequalities."""
        return ["{0}: {1} fails (slack {2:.6g})".format(c.tag, c.statement, c.slack) for c in self.checks
                if not c.passed]


def _rate_lambda(c0, p, epsilon):
    return (c0 / epsilon) ** (1.0 / (p - 1.0))


def _log_result(result):
    if result.feasible:
        _logger.info("{0} synthesis: {1}, initial radius {2:.6g}".format(
            result.regime, result.majorant.describe(), result.initial_radius))
    else:
        _logger.warning("{0} synthesis infeasible: {1}".format(result.regime, "; ".join(result.reasons)))
    return result


def synth_exponential(k, c0, p, epsilon):
    """Constant dissipation k: mu = lambda exp((k - eps) t) with lambda = (c0/eps)**(1/(p-1)).

    The solution then obeys |u(t)| <= exp(-(k - eps) t) / lambda for |u0| <= 1/lambda.
    """
    if not 0 < epsilon < k:
        raise ValueError("epsilon must lie in (0, k), got epsilon={0}, k={1}".format(epsilon, k))
    PowerLaw(c0, p)
    lam = _rate_lambda(c0, p, epsilon)
    b = k - epsilon
    budget = k - (c0 / lam ** (p - 1) + b)
    result = SynthesisResult(regime=Regime.Exponential, majorant=Exponential(lam, b), initial_radius=1.0 / lam,
                             decay_description="exp(-{0:.6g} t)".format(b), feasible=True,
                             checks=[InequalityCheck("exp_rate_budget", "c0 / lambda^(p-1) + b <= k", budget,
                                                     budget >= -DEFAULT_TOLERANCE)],
                             constants={"lambda": lam, "b": b})
    return _log_result(result)


def synth_exponential_from_u0(k, c0, p, u0_norm):
    """Constant dissipation with lambda = 1/|u0|: feasible iff c0 |u0|**(p-1) < k.

    The bound is |u(t)| <= |u0| exp(-(k - c0 |u0|**(p-1)) t).
    """
    if not u0_norm > 0:
        raise ValueError("u0_norm must be positive, got {0}".format(u0_norm))
    if not k > 0:
        raise ValueError("k must be positive, got {0}".format(k))
    PowerLaw(c0, p)
    correction = c0 * u0_norm ** (p - 1)
    b = k - correction
    result = SynthesisResult(regime=Regime.SmallData, majorant=Exponential(1.0 / u0_norm, b),
                             initial_radius=u0_norm,
                             decay_description="{0:.6g} exp(-{1:.6g} t)".format(u0_norm, b), feasible=b > 0,
                             checks=[InequalityCheck("small_data_rate", "c0 |u0|^(p-1) < k", b, b > 0)],
                             constants={"lambda": 1.0 / u0_norm, "b": b})
    return _log_result(result)


def synth_power(c1, q1, c0, p, epsilon):
    """Dissipation c1/(1+t)**q1: mu = lambda (1+t)**(c1 - eps), feasible iff (p - 1)(c1 - eps) >= q1."""
    if not 0 < epsilon < c1:
        raise ValueError("epsilon must lie in (0, c1), got epsilon={0}, c1={1}".format(epsilon, c1))
    if q1 > 1:
        raise ValueError("q1 must not exceed 1, got {0}".format(q1))
    if q1 < 0:
        raise ValueError("q1 must be non-negative, got {0}".format(q1))
    PowerLaw(c0, p)
    nu = c1 - epsilon
    lam = _rate_lambda(c0, p, epsilon)
    shape = (p - 1) * nu - q1
    budget = c1 - (c0 / lam ** (p - 1) + nu)
    checks = [InequalityCheck("power_monotonicity", "q1 <= 1 and (p - 1) nu >= q1", shape,
                              shape >= -DEFAULT_TOLERANCE),
              InequalityCheck("power_rate_budget", "c0 / lambda^(p-1) + nu <= c1", budget,
                              budget >= -DEFAULT_TOLERANCE)]
    result = SynthesisResult(regime=Regime.Power, majorant=Power(lam, nu), initial_radius=1.0 / lam,
                             decay_description="(1 + t)^-{0:.6g}".format(nu),
                             feasible=all(c.passed for c in checks), checks=checks,
                             constants={"lambda": lam, "nu": nu})
    return _log_result(result)


def lambda_zero(c0, p, c2):
    """The minimiser ((p - 1) c0 / c2)**(1/p) of h(lambda) = c0/lambda**(p-1) + lambda c2."""
    return ((p - 1.0) * c0 / c2) ** (1.0 / p)


def h_of_lambda(c0, p, c2, lam):
    return c0 / lam ** (p - 1.0) + lam * c2


def hmin(c0, p, c2):
    """min over lambda > 0 of c0/lambda**(p-1) + lambda c2, in closed form."""
    if not (c0 > 0 and c2 > 0 and p > 1):
        raise ValueError("hmin needs c0 > 0, c2 > 0 and p > 1")
    return c0 ** (1.0 / p) * c2 ** (1.0 - 1.0 / p) * (p - 1.0) ** (1.0 / p) * p / (p - 1.0)


def synth_forced(c1, q1, c0, p, c2, q2, nu):
    """Power dissipation with forcing below c2/(1+t)**q2: mu = lambda0 (1+t)**nu.

    Feasible iff q1 <= min(1, q2 - nu, nu (p - 1)) and h_min + nu <= c1. The rate budget is kept in the single
    form h_min + nu <= c1 with h_min = c0**(1/p) c2**(1-1/p) (p-1)**(1/p) p/(p-1); writing the factors in another
    order is the same inequality.
    """
    for name, value in (("c1", c1), ("c0", c0), ("c2", c2), ("q2", q2), ("nu", nu)):
        if not value > 0:
            raise ValueError("{0} must be positive, got {1}".format(name, value))
    if not q1 >= 0:
        raise ValueError("q1 must be non-negative, got {0}".format(q1))
    if not p > 1:
        raise ValueError("p must exceed 1, got {0}".format(p))
    lam0 = lambda_zero(c0, p, c2)
    h_min = hmin(c0, p, c2)
    shape = min(1.0, q2 - nu, nu * (p - 1)) - q1
    budget = c1 - (h_min + nu)
    checks = [InequalityCheck("forced_monotonicity", "q1 <= min(1, q2 - nu, nu (p - 1))", shape,
                              shape >= -DEFAULT_TOLERANCE),
              InequalityCheck("forced_rate_budget", "h_min + nu <= c1", budget, budget >= -DEFAULT_TOLERANCE)]
    result = SynthesisResult(regime=Regime.Forced, majorant=Power(lam0, nu), initial_radius=1.0 / lam0,
                             decay_description="(1 + t)^-{0:.6g}".format(nu),
                             feasible=all(c.passed for c in checks), checks=checks,
                             constants={"lambda0": lam0, "h_min": h_min, "nu": nu})
    return _log_result(result)


def lambda_min_power(c1, c0, p):
    """(c0/c1)**(1/(p-1)): the infimum of admissible lambda in the power regime as eps approaches c1."""
    return (c0 / c1) ** (1.0 / (p - 1.0))


def sweep_power_epsilon(c1, q1, c0, p, count=200):
    """Scans eps over (0, c1) and returns the feasible power synthesis with the largest initial radius."""
    best = None
    for i in range(1, count + 1):
        epsilon = c1 * i / (count + 1.0)
        result = synth_power(c1, q1, c0, p, epsilon)
        if result.feasible and (best is None or result.initial_radius > best.initial_radius):
            best = result
    return best


def sweep_forced_nu(c1, q1, c0, p, c2, q2, count=200):
    """Scans nu over (0, c1 - h_min] and returns the feasible forced synthesis with the largest nu."""
    upper = c1 - hmin(c0, p, c2)
    if upper <= 0:
        _logger.info("Forced sweep: h_min alone exceeds c1, no rate is admissible")
        return None
    for i in range(count, 0, -1):
        result = synth_forced(c1, q1, c0, p, c2, q2, upper * i / count)
        if result.feasible:
            return result
    return None


def synthesize(regime, constants):
    """Dispatches to the synthesis matching the regime.

    :param regime: Regime
    :param constants: ProblemConstants holding every key the regime needs
    :return: SynthesisResult
    """
    missing = constants.missing_for(regime)
    if missing:
        raise ValueError("Regime {0} needs constants {1}".format(regime, ", ".join(missing)))
    c = constants
    if regime is Regime.Exponential:
        return synth_exponential(c.k, c.c0, c.p, c.epsilon)
    if regime is Regime.SmallData:
        return synth_exponential_from_u0(c.k, c.c0, c.p, c.u0_norm)
    if regime is Regime.Power:
        return synth_power(c.c1, c.q1, c.c0, c.p, c.epsilon)
    return synth_forced(c.c1, c.q1, c.c0, c.p, c.c2, c.q2, c.nu)


def certificate_families(regime, constants):
    """The (alpha, beta, gamma) the synthesized majorant is meant for."""
    alpha = PowerLaw(constants.c0, constants.p)
    if regime in (Regime.Exponential, Regime.SmallData):
        return alpha, ZERO, Constant(constants.k)
    if regime is Regime.Power:
        return alpha, ZERO, PowerDecay(constants.c1, constants.q1)
    return alpha, PowerDecay(constants.c2, constants.q2), PowerDecay(constants.c1, constants.q1)
