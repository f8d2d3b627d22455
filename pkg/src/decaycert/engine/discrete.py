"""Discrete majorant certificates.

For sequences with

    g[n+1] <= (1 - h[n] gamma[n]) g[n] + h[n] alpha(n, g[n]) + h[n] beta[n],    h[n] > 0,  0 < h[n] gamma[n] < 1

a positive sequence mu certifies 0 <= g[n] <= 1/mu[n] for every n when

    alpha(n, 1/mu[n]) + beta[n] <= (1/mu[n]) (gamma[n] - (mu[n+1] - mu[n]) / (h[n] mu[n]))
    g[0] <= 1/mu[0]

Sequences may carry a trailing batch axis: h, gamma and beta of shape (n_max, B), mu of shape (n_max + 1, B).
Every operation then works on B independent schemes sharing one nonlinearity.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from decaycert.constant import DEFAULT_TOLERANCE, DISCRETE_RELATIVE_TOLERANCE, OVERFLOW_GUARD
from decaycert.families import PowerLaw

_logger = logging.getLogger(__name__)


class DiscreteScheme(object):
    """Step sizes, dissipation, forcing and majorant sequences of one (or a batch of) discrete inequality."""

    def __init__(self, h, gamma_seq, beta_seq, mu_seq, alpha, times=None):
        h = np.asarray(h, dtype=float)
        gamma_seq = np.asarray(gamma_seq, dtype=float)
        beta_seq = np.asarray(beta_seq, dtype=float)
        mu_seq = np.asarray(mu_seq, dtype=float)
        if h.ndim == 0 or h.shape[0] < 1:
            raise ValueError("a discrete scheme needs at least one step")
        n_max = h.shape[0]
        h, gamma_seq, beta_seq = np.broadcast_arrays(h, gamma_seq, beta_seq)
        if mu_seq.shape[0] != n_max + 1:
            raise ValueError("mu needs n_max + 1 = {0} entries, got {1}".format(n_max + 1, mu_seq.shape[0]))
        if not all(np.all(np.isfinite(x)) for x in (h, gamma_seq, beta_seq, mu_seq)):
            raise ValueError("scheme sequences must be finite")
        if np.any(h <= 0):
            raise ValueError("every step h[n] must be positive")
        rate = h * gamma_seq
        if np.any(rate <= 0) or np.any(rate >= 1):
            raise ValueError("every h[n] gamma[n] must lie in (0, 1)")
        if np.any(beta_seq < 0):
            raise ValueError("beta[n] must be non-negative")
        if np.any(mu_seq <= 0):
            raise ValueError("mu[n] must be positive")
        if times is not None:
            times = np.array(times, dtype=float)
            if times.shape[0] != n_max + 1:
                raise ValueError("the time map needs n_max + 1 entries")
        # private read-only copies
        self._h, self._gamma, self._beta, self._mu = (np.array(x) for x in (h, gamma_seq, beta_seq, mu_seq))
        for array in (self._h, self._gamma, self._beta, self._mu):
            array.flags.writeable = False
        if times is not None:
            times.flags.writeable = False
        self._alpha = alpha
        self._times = times

    @classmethod
    def from_continuous(cls, alpha, beta, gamma, mu, h, n_max):
        """Samples a continuous problem at t[n] = n h; the scheme keeps t[n] as its time map."""
        times = h * np.arange(n_max + 1, dtype=float)
        return cls(np.full(n_max, h), gamma.value(times[:-1]), beta.value(times[:-1]), mu.value(times), alpha,
                   times=times)

    @property
    def h(self):
        return self._h

    @property
    def gamma_seq(self):
        return self._gamma

    @property
    def beta_seq(self):
        return self._beta

    @property
    def mu_seq(self):
        return self._mu

    @property
    def alpha(self):
        return self._alpha

    @property
    def times(self):
        return self._times

    @property
    def n_max(self):
        return self._h.shape[0]

    @property
    def batch_shape(self):
        return self._h.shape[1:]

    def time_of(self, n):
        """The time at which alpha is evaluated for step n: t[n] from the time map, else n itself."""
        return float(self._times[n]) if self._times is not None else float(n)


@dataclass
class DiscreteCheck(object):
    slack: np.ndarray
    step_ok: np.ndarray
    initial_ok: np.ndarray
    feasible: np.ndarray
    first_violation: Optional[int]

    @property
    def all_feasible(self):
        return bool(np.all(self.feasible))


def check_discrete_condition(s, g0, tol=DEFAULT_TOLERANCE):
    """Checks the discrete majorant condition at every n < n_max and g0 <= 1/mu[0].

    :param s: DiscreteScheme
    :param g0: initial value, scalar or one per scheme in the batch
    :param tol: absolute tolerance on each slack
    :return: DiscreteCheck with per-n slack, per-n verdicts and the overall verdict (per scheme)
    """
    g0 = np.asarray(g0, dtype=float)
    if np.any(g0 < 0):
        raise ValueError("g0 must be non-negative")
    mu = s.mu_seq
    inverse = 1.0 / mu[:-1]
    growth = (mu[1:] - mu[:-1]) / (s.h * mu[:-1])
    rhs = inverse * (s.gamma_seq - growth)
    if isinstance(s.alpha, PowerLaw):
        # time independent, one call covers the whole batch
        lhs = np.asarray(s.alpha.value(0.0, inverse), dtype=float)
    else:
        lhs = np.empty_like(rhs)
        for n in range(s.n_max):
            lhs[n] = s.alpha.value(s.time_of(n), inverse[n])
    lhs = lhs + s.beta_seq
    slack = rhs - lhs
    step_ok = slack >= -tol
    initial_ok = g0 * mu[0] <= 1.0 + tol
    feasible = np.logical_and(np.all(step_ok, axis=0), initial_ok)
    bad = np.nonzero(~np.all(step_ok.reshape(s.n_max, -1), axis=1))[0]
    first_violation = int(bad[0]) if bad.size else None
    if not np.all(feasible):
        _logger.info("Discrete condition fails for {0} scheme(s); first violating step {1}".format(
            int(np.size(feasible) - np.count_nonzero(feasible)), first_violation))
    return DiscreteCheck(slack=slack, step_ok=step_ok, initial_ok=initial_ok, feasible=feasible,
                         first_violation=first_violation)


@dataclass
class ExtremalSequence(object):
    g: np.ndarray
    diverged_at: Optional[int]


def evolve_extremal(s, g0, guard=OVERFLOW_GUARD):
    """Iterates g[n+1] = (1 - h gamma) g[n] + h alpha(n, g[n]) + h beta[n], the largest admissible sequence.

    :return: ExtremalSequence with g of shape (n_max + 1,) + batch shape; `diverged_at` is the first index whose
             value exceeds the guard (later entries are inf)
    """
    g0 = np.asarray(g0, dtype=float)
    if np.any(g0 < 0):
        raise ValueError("g0 must be non-negative")
    g = np.empty((s.n_max + 1,) + s.batch_shape)
    g[0] = g0
    diverged_at = None
    keep = 1.0 - s.h * s.gamma_seq
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(s.n_max):
            current = g[n]
            g[n + 1] = keep[n] * current + s.h[n] * (s.alpha.value(s.time_of(n), current) + s.beta_seq[n])
            over = ~(g[n + 1] <= guard)
            if np.any(over):
                if diverged_at is None:
                    diverged_at = n + 1
                if np.all(over):
                    g[n + 1:] = np.inf
                    break
                g[n + 1] = np.where(over, np.inf, g[n + 1])
    if diverged_at is not None:
        _logger.warning("Extremal recursion diverges at index {0}".format(diverged_at))
    return ExtremalSequence(g=g, diverged_at=diverged_at)


@dataclass
class DiscreteBoundReport(object):
    claimed: np.ndarray
    violations: int
    first_violation: Optional[int]
    min_margin: float
    max_margin: float
    check: DiscreteCheck
    sequence: Optional[ExtremalSequence]

    @property
    def engine_bug(self):
        return self.violations > 0

    @property
    def passed(self):
        return bool(np.all(self.claimed)) and self.violations == 0


def verify_discrete_bound(s, g0, rtol=DISCRETE_RELATIVE_TOLERANCE, tol=DEFAULT_TOLERANCE):
    """Runs the extremal recursion and checks g[n] <= 1/mu[n] wherever the discrete condition holds.

    Schemes failing the condition get no bound claimed. A violation on a feasible scheme can only come from a
    defect in this engine and is logged as such.

    :return: DiscreteBoundReport
    """
    check = check_discrete_condition(s, g0, tol=tol)
    claimed = np.asarray(check.feasible)
    if not np.any(claimed):
        _logger.info("Discrete condition does not hold, no bound claimed")
        return DiscreteBoundReport(claimed=claimed, violations=0, first_violation=None, min_margin=float("nan"),
                                   max_margin=float("nan"), check=check, sequence=None)
    sequence = evolve_extremal(s, g0)
    bound = 1.0 / s.mu_seq
    margin = bound - sequence.g
    violated = np.logical_and(sequence.g > bound * (1.0 + rtol), claimed)
    violations = int(np.count_nonzero(violated))
    bad_steps = np.nonzero(np.any(violated.reshape(s.n_max + 1, -1), axis=1))[0]
    claimed_margin = margin[..., claimed] if margin.ndim > 1 else margin
    if violations:
        _logger.error("Engine defect: feasible discrete scheme violates its bound {0} time(s), first at n = {1}"
                      .format(violations, int(bad_steps[0])))
    return DiscreteBoundReport(claimed=claimed, violations=violations,
                               first_violation=int(bad_steps[0]) if bad_steps.size else None,
                               min_margin=float(np.min(claimed_margin)), max_margin=float(np.max(claimed_margin)),
                               check=check, sequence=sequence)


def random_feasible_schemes(rng, count, n_max, alpha=None, rate_cap=0.05, forcing=True):
    """Builds a batch of schemes that satisfy the discrete condition by construction.

    Steps h[n] are drawn from (0, 1] and rates h[n] gamma[n] from [0.2, 1) * rate_cap. mu starts above the level
    where the nonlinear term is absorbed by the smallest gamma; each next mu is mu[n] plus a random share in
    [0.5, 1] of the largest increment the condition admits. With `forcing`, beta[n] takes a random part of the
    room left at mu[n], so increments stay non-negative and mu never collapses.

    :param rng: numpy Generator
    :param count: batch size B
    :param n_max: steps per scheme
    :param alpha: PowerLaw shared by the batch; drawn at random when omitted
    :return: tuple (DiscreteScheme, g0 array of shape (B,))
    """
    if alpha is None:
        alpha = PowerLaw(float(rng.uniform(0.1, 2.0)), float(rng.uniform(1.5, 3.0)))
    h = 1.0 - rng.random((n_max, count))
    rate = rate_cap * (0.2 + 0.8 * rng.random((n_max, count)))
    gamma_seq = rate / h
    gamma_min = np.min(gamma_seq, axis=0)
    mu = np.empty((n_max + 1, count))
    level = (alpha.c0 / gamma_min) ** (1.0 / (alpha.p - 1.0))
    mu[0] = np.maximum(level, 1.0) * rng.uniform(1.0, 2.0, count)
    beta_seq = np.zeros((n_max, count))
    for n in range(n_max):
        room = gamma_seq[n] - mu[n] * alpha.value(float(n), 1.0 / mu[n])
        if forcing:
            beta_seq[n] = np.maximum(0.5 * rng.random(count) * room / mu[n], 0.0)
        increment = mu[n] * h[n] * (room - mu[n] * beta_seq[n])
        mu[n + 1] = np.where(increment >= 0, mu[n] + rng.uniform(0.5, 1.0, count) * increment, mu[n] + increment)
    g0 = rng.random(count) / mu[0]
    return DiscreteScheme(h, gamma_seq, beta_seq, mu, alpha), g0
