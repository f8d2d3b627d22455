"""Classical fourth order Runge-Kutta with step halving.

Every step is taken twice: once whole and once as two halves. The step is accepted when both agree within the
relative tolerance; otherwise it is halved and retried. After an accepted step the step size doubles again, never
beyond the current grid interval, so every grid point is hit exactly.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from decaycert.constant import OVERFLOW_GUARD, RK4_AGREEMENT
from decaycert.errors import BlowUpError

_logger = logging.getLogger(__name__)

# a step shorter than this fraction of max(1, t) means the solution is escaping
_MIN_STEP_FRACTION = 1e-13


def rk4_step(rhs, t, y, h):
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + (0.5 * h) * k1)
    k3 = rhs(t + 0.5 * h, y + (0.5 * h) * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _norm(y):
    return float(np.linalg.norm(y))


@dataclass
class Diagnostics(object):
    accepted: int = 0
    rejected: int = 0
    max_error: float = 0.0

    def as_dict(self):
        return {"accepted_steps": self.accepted, "rejected_steps": self.rejected, "max_error": self.max_error}


@dataclass
class GridSolution(object):
    """States at the grid points that were reached, plus the escape time if the solution blew up."""
    times: np.ndarray
    states: List = field(default_factory=list)
    escape_time: Optional[float] = None
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    @property
    def blew_up(self):
        return self.escape_time is not None

    @property
    def reached(self):
        return len(self.states)


def advance(rhs, t0, t1, y0, rtol=RK4_AGREEMENT, guard=OVERFLOW_GUARD, h=None, diagnostics=None):
    """Integrates from t0 to t1.

    :param rhs: f(t, y) returning dy/dt, same shape as y
    :param t0: start time
    :param t1: end time, t1 > t0
    :param y0: start state (numpy array or float)
    :param rtol: relative agreement between the whole step and two half steps
    :param guard: a state norm above this counts as escape
    :param h: first trial step, defaults to t1 - t0
    :param diagnostics: Diagnostics updated in place
    :return: tuple (state at t1, last accepted step size)
    :raises BlowUpError: with the last time reached when the step collapses or the state overflows
    """
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    t = t0
    y = y0
    h = t1 - t0 if h is None else min(h, t1 - t0)
    while t < t1:
        remaining = t1 - t
        last = h >= remaining
        step = remaining if last else h
        if step <= _MIN_STEP_FRACTION * max(1.0, abs(t)):
            raise BlowUpError(t, _norm(y))

        try:
            with np.errstate(over="ignore", invalid="ignore"):
                whole = rk4_step(rhs, t, y, step)
                half = rk4_step(rhs, t, y, 0.5 * step)
                fine = rk4_step(rhs, t + 0.5 * step, half, 0.5 * step)
                scale = max(_norm(fine), _norm(whole))
                difference = _norm(fine - whole)
        except (OverflowError, ValueError):
            # negative bases from a wildly overshooting trial step land here too
            diagnostics.rejected += 1
            h = 0.5 * step
            continue
        if not np.isfinite(scale) or not np.isfinite(difference) or scale > guard:
            diagnostics.rejected += 1
            h = 0.5 * step
            continue
        if difference > rtol * scale:
            diagnostics.rejected += 1
            h = 0.5 * step
            continue

        diagnostics.accepted += 1
        diagnostics.max_error = max(diagnostics.max_error, difference / 15.0)
        y = fine
        t = t1 if last else t + step
        h = 2.0 * step
    return y, h


def integrate_on_grid(rhs, y0, times, rtol=RK4_AGREEMENT, guard=OVERFLOW_GUARD):
    """Integrates dy/dt = rhs(t, y) and records the state at every grid time.

    A blow-up stops the integration; the returned solution then holds the states reached so far and the escape
    time, never an exception.

    :param rhs: f(t, y)
    :param y0: state at times[0]
    :param times: strictly increasing grid
    :return: GridSolution
    """
    solution = GridSolution(times=np.asarray(times, dtype=float))
    y = y0
    if _norm(y) > guard or not np.all(np.isfinite(y)):
        solution.escape_time = float(times[0])
        return solution
    solution.states.append(y)
    h = None
    for t0, t1 in zip(solution.times[:-1], solution.times[1:]):
        try:
            y, h = advance(rhs, float(t0), float(t1), y, rtol=rtol, guard=guard, h=h,
                           diagnostics=solution.diagnostics)
        except BlowUpError as e:
            _logger.warning(str(e))
            solution.escape_time = e.time
            break
        solution.states.append(y)
    return solution
