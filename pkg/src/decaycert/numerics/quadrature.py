import logging

from decaycert.constant import QUADRATURE_TOLERANCE

_logger = logging.getLogger(__name__)


def _simpson(fa, fm, fb, h):
    return h / 3.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(f, a, b, tol=QUADRATURE_TOLERANCE, max_depth=50):
    """Integrates f over [a, b] with recursive Simpson bisection.

    Each half inherits half of the tolerance; a panel is accepted once the two-panel and one-panel rules differ by
    less than 15 * tol, and the accepted value carries the Richardson correction.

    :param f: the scalar integrand
    :param a: lower limit
    :param b: upper limit
    :param tol: absolute error tolerance
    :param max_depth: bisection depth after which a panel is accepted regardless
    :return: tuple (integral, error estimate)
    """
    if a == b:
        return 0.0, 0.0
    if a > b:
        value, error = adaptive_simpson(f, b, a, tol, max_depth)
        return -value, error

    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = _simpson(fa, fm, fb, 0.5 * (b - a))

    total = 0.0
    error = 0.0
    # explicit stack instead of recursion: (a, b, fa, fm, fb, whole, tol, depth)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, panel, panel_tol, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        h = 0.5 * (hi - lo)
        flm = f(0.5 * (lo + mid))
        frm = f(0.5 * (mid + hi))
        left = _simpson(flo, flm, fmid, 0.5 * h)
        right = _simpson(fmid, frm, fhi, 0.5 * h)
        estimate = (left + right - panel) / 15.0
        if depth >= max_depth or abs(estimate) <= panel_tol:
            if depth >= max_depth:
                _logger.debug("Simpson panel [{0:.6g}, {1:.6g}] hit the depth limit".format(lo, hi))
            total += left + right + estimate
            error += abs(estimate)
            continue
        stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * panel_tol, depth + 1))
        stack.append((lo, mid, flo, flm, fmid, left, 0.5 * panel_tol, depth + 1))
    return total, error


def piecewise_simpson(f, a, b, breakpoints=(), tol=QUADRATURE_TOLERANCE):
    """Adaptive Simpson over [a, b], restarted at every breakpoint strictly inside the interval.

    Kinks of piecewise smooth integrands then sit on panel edges, where Simpson stays exact for linear pieces.
    """
    cuts = [a] + sorted(x for x in breakpoints if a < x < b) + [b]
    share = tol / max(1, len(cuts) - 1)
    total = 0.0
    error = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        value, err = adaptive_simpson(f, lo, hi, share)
        total += value
        error += err
    return total, error
