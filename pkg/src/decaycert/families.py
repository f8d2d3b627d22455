"""Scalar time functions, the nonlinearity and the majorant.

Every family evaluates on floats and on numpy arrays, never mutates after construction and can be read from
(and written back to) the scenario config mapping (keys `kind`, `c`, `q`, `r`, `lambda`, `b`, `nu`, `knots`,
`values`, ...).
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

_logger = logging.getLogger(__name__)


class FamilyKind(Enum):
    """The `kind` tag used in scenario files for every family."""

    Constant = "CONSTANT"
    PowerDecay = "POWER_DECAY"
    ExponentialDecay = "EXPONENTIAL_DECAY"
    Tabulated = "TABULATED"
    PowerLaw = "POWER_LAW"
    TabulatedInG = "TABULATED_IN_G"
    Exponential = "EXPONENTIAL"
    Power = "POWER"
    Generic = "GENERIC"

    @classmethod
    def from_text(cls, text):
        """Converts text into a FamilyKind; `power-decay`, `Power Decay` and `power_decay` are all accepted.

        :param text: The kind in text form.
        :return: The matching FamilyKind.
        """
        return cls(str(text).strip().upper().replace("-", "_").replace(" ", "_"))

    def __repr__(self):
        return self.name

    def __str__(self):
        return self.value.lower()


def _check_time(t):
    if np.any(np.asarray(t) < 0):
        raise ValueError("time must be non-negative, got {0}".format(t))


def _as_result(value, t):
    """Return a plain float for scalar input, an array otherwise."""
    return float(value) if np.ndim(t) == 0 else np.asarray(value, dtype=float)


def number_option(options, key, label, verify_func=None, requirement_message="", default=None):
    """Pulls a real number out of a config mapping, raising ValueError naming the dotted field path."""
    path = "{0}.{1}".format(label, key) if label else key
    if key not in options or options[key] is None:
        if default is not None:
            return default
        raise ValueError("Invalid configuration option '{0}' - option missing.".format(path))
    try:
        value = float(options[key])
    except (TypeError, ValueError):
        raise ValueError("Invalid configuration option '{0}' - value must be a number.".format(path))
    if not math.isfinite(value) or (verify_func is not None and not verify_func(value)):
        raise ValueError("Invalid configuration option '{0}' - value must be {1}.".format(
            path, requirement_message or "finite"))
    return value


def _numbers(options, key, label):
    path = "{0}.{1}".format(label, key) if label else key
    raw = options.get(key)
    if not isinstance(raw, (list, tuple)) or not raw:
        raise ValueError("Invalid configuration option '{0}' - value must be a non-empty list.".format(path))
    try:
        values = np.asarray([float(v) for v in raw], dtype=float)
    except (TypeError, ValueError):
        raise ValueError("Invalid configuration option '{0}' - every entry must be a number.".format(path))
    if not np.all(np.isfinite(values)):
        raise ValueError("Invalid configuration option '{0}' - every entry must be finite.".format(path))
    return values


# ----- Coefficient functions: gamma(t), beta(t) -----------------------------------


class CoefficientFunction(object):
    """A continuous non-negative function of time, used for gamma(t) and beta(t)."""

    kind = None

    def value(self, t):
        raise NotImplementedError()

    def __call__(self, t):
        return self.value(t)

    @property
    def is_zero(self):
        return False

    def to_config(self):
        raise NotImplementedError()

    @staticmethod
    def from_config(options, label=""):
        """Builds a coefficient function from its config mapping.

        :param options: mapping with `kind` and the family parameters
        :param label: dotted field path used in error messages
        :return: the CoefficientFunction
        """
        if isinstance(options, (int, float)) and not isinstance(options, bool):
            return Constant(float(options))
        if not isinstance(options, dict) or "kind" not in options:
            raise ValueError("Invalid configuration option '{0}.kind' - option missing.".format(label))
        try:
            kind = FamilyKind.from_text(options["kind"])
        except ValueError:
            raise ValueError("Invalid configuration option '{0}.kind' - '{1}' is not a coefficient family.".format(
                label, options["kind"]))
        nonneg = dict(verify_func=lambda x: x >= 0, requirement_message="non-negative")
        if kind is FamilyKind.Constant:
            return Constant(number_option(options, "c", label, **nonneg))
        if kind is FamilyKind.PowerDecay:
            return PowerDecay(number_option(options, "c", label, **nonneg), number_option(options, "q", label, **nonneg))
        if kind is FamilyKind.ExponentialDecay:
            return ExponentialDecay(number_option(options, "c", label, **nonneg), number_option(options, "r", label, **nonneg))
        if kind is FamilyKind.Tabulated:
            try:
                return Tabulated(tuple(_numbers(options, "knots", label)), tuple(_numbers(options, "values", label)))
            except ValueError as e:
                if "Invalid configuration option" in str(e):
                    raise
                raise ValueError("Invalid configuration option '{0}' - {1}".format(label, e))
        raise ValueError("Invalid configuration option '{0}.kind' - '{1}' is not a coefficient family.".format(
            label, options["kind"]))


@dataclass(frozen=True)
class Constant(CoefficientFunction):
    c: float

    kind = FamilyKind.Constant

    def __post_init__(self):
        if not self.c >= 0:
            raise ValueError("Constant coefficient must be non-negative, got c={0}".format(self.c))

    def value(self, t):
        _check_time(t)
        return _as_result(np.full(np.shape(t), self.c), t)

    @property
    def is_zero(self):
        return self.c == 0

    def to_config(self):
        return {"kind": str(self.kind), "c": self.c}


@dataclass(frozen=True)
class PowerDecay(CoefficientFunction):
    """c / (1 + t)**q"""
    c: float
    q: float

    kind = FamilyKind.PowerDecay

    def __post_init__(self):
        if not (self.c >= 0 and self.q >= 0):
            raise ValueError("PowerDecay needs c >= 0 and q >= 0, got c={0}, q={1}".format(self.c, self.q))

    def value(self, t):
        _check_time(t)
        return _as_result(self.c / np.power(1.0 + np.asarray(t, dtype=float), self.q), t)

    @property
    def is_zero(self):
        return self.c == 0

    def to_config(self):
        return {"kind": str(self.kind), "c": self.c, "q": self.q}


@dataclass(frozen=True)
class ExponentialDecay(CoefficientFunction):
    """c * exp(-r t)"""
    c: float
    r: float

    kind = FamilyKind.ExponentialDecay

    def __post_init__(self):
        if not (self.c >= 0 and self.r >= 0):
            raise ValueError("ExponentialDecay needs c >= 0 and r >= 0, got c={0}, r={1}".format(self.c, self.r))

    def value(self, t):
        _check_time(t)
        return _as_result(self.c * np.exp(-self.r * np.asarray(t, dtype=float)), t)

    @property
    def is_zero(self):
        return self.c == 0

    def to_config(self):
        return {"kind": str(self.kind), "c": self.c, "r": self.r}


@dataclass(frozen=True)
class Tabulated(CoefficientFunction):
    """Piecewise linear through (knots, values), constant beyond the last knot."""
    knots: Sequence[float]
    values: Sequence[float]

    kind = FamilyKind.Tabulated

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if knots.ndim != 1 or knots.size < 1 or knots.shape != values.shape:
            raise ValueError("Tabulated needs matching one-dimensional knots and values")
        if knots[0] != 0:
            raise ValueError("Tabulated knots must start at t = 0, got {0}".format(knots[0]))
        if np.any(np.diff(knots) <= 0):
            raise ValueError("Tabulated knots must be strictly increasing")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("Tabulated values must be finite and non-negative")
        object.__setattr__(self, "knots", tuple(float(k) for k in knots))
        object.__setattr__(self, "values", tuple(float(v) for v in values))

    def value(self, t):
        _check_time(t)
        return _as_result(np.interp(t, self.knots, self.values), t)

    @property
    def is_zero(self):
        return not any(self.values)

    def to_config(self):
        return {"kind": str(self.kind), "knots": list(self.knots), "values": list(self.values)}


ZERO = Constant(0.0)


# ----- Nonlinearity: alpha(t, g) ----------------------------------------------------


class Nonlinearity(object):
    """alpha(t, g) >= 0, nondecreasing in g."""

    kind = None

    def value(self, t, g):
        raise NotImplementedError()

    def __call__(self, t, g):
        return self.value(t, g)

    def on_grid(self, times, g):
        """alpha(t_i, g_i) for paired arrays of times and states."""
        return np.asarray([self.value(float(t), float(x)) for t, x in zip(times, g)], dtype=float)

    def lipschitz_bound(self, t_end, m):
        """An upper bound of the Lipschitz constant of alpha in g on [0, t_end] x [0, m]."""
        raise NotImplementedError()

    @property
    def is_zero(self):
        return False

    def to_config(self):
        raise NotImplementedError()

    @staticmethod
    def from_config(options, label=""):
        if not isinstance(options, dict) or "kind" not in options:
            raise ValueError("Invalid configuration option '{0}.kind' - option missing.".format(label))
        try:
            kind = FamilyKind.from_text(options["kind"])
        except ValueError:
            kind = None
        if kind is FamilyKind.PowerLaw:
            return PowerLaw(number_option(options, "c0", label, lambda x: x >= 0, "non-negative"),
                            number_option(options, "p", label, lambda x: x > 1, "greater than 1"))
        if kind is FamilyKind.TabulatedInG:
            rows = options.get("values")
            if not isinstance(rows, (list, tuple)) or not rows:
                raise ValueError("Invalid configuration option '{0}.values' - value must be a list of rows.".format(
                    label))
            try:
                return TabulatedInG(tuple(_numbers(options, "knots", label)),
                                    tuple(_numbers(options, "g_knots", label)),
                                    tuple(tuple(float(v) for v in row) for row in rows))
            except (TypeError, ValueError) as e:
                if "Invalid configuration option" in str(e):
                    raise
                raise ValueError("Invalid configuration option '{0}' - {1}".format(label, e))
        raise ValueError("Invalid configuration option '{0}.kind' - '{1}' is not a nonlinearity family.".format(
            label, options["kind"]))


def _check_state(g):
    if np.any(np.asarray(g) < 0):
        raise ValueError("alpha is defined for g >= 0 only, got {0}".format(g))


@dataclass(frozen=True)
class PowerLaw(Nonlinearity):
    """c0 * g**p; c0 = 0 is the zero nonlinearity."""
    c0: float
    p: float

    kind = FamilyKind.PowerLaw

    def __post_init__(self):
        if not self.c0 >= 0:
            raise ValueError("PowerLaw needs c0 >= 0, got {0}".format(self.c0))
        if not self.p > 1:
            raise ValueError("p must exceed 1, got {0}".format(self.p))

    def value(self, t, g):
        _check_state(g)
        return _as_result(self.c0 * np.power(np.asarray(g, dtype=float), self.p), g)

    def on_grid(self, times, g):
        return np.asarray(self.value(0.0, np.asarray(g, dtype=float)), dtype=float)

    def lipschitz_bound(self, t_end, m):
        return self.c0 * self.p * m ** (self.p - 1)

    @property
    def is_zero(self):
        return self.c0 == 0

    def to_config(self):
        return {"kind": str(self.kind), "c0": self.c0, "p": self.p}


@dataclass(frozen=True)
class TabulatedInG(Nonlinearity):
    """alpha sampled on a (t, g) lattice.

    Rows belong to the time knots and are blended linearly in t (constant beyond the last knot); each row is
    interpolated linearly in g and held constant beyond the last g knot.
    """
    knots: Sequence[float]
    g_knots: Sequence[float]
    values: Sequence[Sequence[float]]

    kind = FamilyKind.TabulatedInG

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        g_knots = np.asarray(self.g_knots, dtype=float)
        table = np.asarray(self.values, dtype=float)
        if knots.ndim != 1 or knots[0] != 0 or np.any(np.diff(knots) <= 0):
            raise ValueError("TabulatedInG time knots must be strictly increasing from t = 0")
        if g_knots.ndim != 1 or g_knots[0] != 0 or np.any(np.diff(g_knots) <= 0):
            raise ValueError("TabulatedInG g knots must be strictly increasing from g = 0")
        if table.shape != (knots.size, g_knots.size):
            raise ValueError("TabulatedInG needs one row of {0} values per time knot".format(g_knots.size))
        if not np.all(np.isfinite(table)) or np.any(table < 0):
            raise ValueError("TabulatedInG values must be finite and non-negative")
        if np.any(np.diff(table, axis=1) < 0):
            raise ValueError("TabulatedInG rows must be nondecreasing in g")
        object.__setattr__(self, "knots", tuple(float(k) for k in knots))
        object.__setattr__(self, "g_knots", tuple(float(k) for k in g_knots))
        object.__setattr__(self, "values", tuple(tuple(float(v) for v in row) for row in table))

    def _row(self, t):
        _check_time(t)
        table = np.asarray(self.values)
        if t >= self.knots[-1]:
            return table[-1]
        j = int(np.searchsorted(self.knots, t, side="right")) - 1
        w = (t - self.knots[j]) / (self.knots[j + 1] - self.knots[j])
        return (1.0 - w) * table[j] + w * table[j + 1]

    def value(self, t, g):
        _check_state(g)
        return _as_result(np.interp(g, self.g_knots, self._row(float(t))), g)

    def lipschitz_bound(self, t_end, m):
        table = np.asarray(self.values)
        g_knots = np.asarray(self.g_knots)
        slopes = np.diff(table, axis=1) / np.diff(g_knots)
        # only segments starting below m matter
        mask = g_knots[:-1] < m
        if not np.any(mask):
            return 0.0
        rows = np.asarray(self.knots) <= t_end
        rows[0] = True
        return float(np.max(slopes[np.ix_(rows, mask)]))

    @property
    def is_zero(self):
        return not any(any(row) for row in self.values)

    def to_config(self):
        return {"kind": str(self.kind), "knots": list(self.knots), "g_knots": list(self.g_knots),
                "values": [list(row) for row in self.values]}


# ----- Majorants: mu(t) -------------------------------------------------------------


class Majorant(object):
    """A positive C1 function mu(t) whose reciprocal is the certified bound."""

    kind = None

    def value(self, t):
        raise NotImplementedError()

    def derivative(self, t):
        raise NotImplementedError()

    def __call__(self, t):
        return self.value(t)

    @property
    def scale(self):
        """mu(0); the initial radius of the certificate is its reciprocal."""
        return float(self.value(0.0))

    @property
    def unbounded(self):
        """True when mu provably tends to infinity, which forces g(t) -> 0."""
        return False

    def describe(self):
        return repr(self)

    def to_config(self):
        raise NotImplementedError()

    @staticmethod
    def from_config(options, label=""):
        if not isinstance(options, dict) or "kind" not in options:
            raise ValueError("Invalid configuration option '{0}.kind' - option missing.".format(label))
        try:
            kind = FamilyKind.from_text(options["kind"])
        except ValueError:
            kind = None
        positive = dict(verify_func=lambda x: x > 0, requirement_message="positive")
        if kind is FamilyKind.Exponential:
            return Exponential(number_option(options, "lambda", label, **positive), number_option(options, "b", label))
        if kind is FamilyKind.Power:
            return Power(number_option(options, "lambda", label, **positive), number_option(options, "nu", label))
        raise ValueError("Invalid configuration option '{0}.kind' - '{1}' is not a majorant family.".format(
            label, options["kind"]))


@dataclass(frozen=True)
class Exponential(Majorant):
    """lambda * exp(b t)"""
    lam: float
    b: float

    kind = FamilyKind.Exponential

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("majorant scale lambda must be positive, got {0}".format(self.lam))

    def value(self, t):
        _check_time(t)
        return _as_result(self.lam * np.exp(self.b * np.asarray(t, dtype=float)), t)

    def derivative(self, t):
        return _as_result(self.b * np.asarray(self.value(t)), t)

    @property
    def scale(self):
        return self.lam

    @property
    def unbounded(self):
        return self.b > 0

    def describe(self):
        return "exp(-{0:.6g} t) / {1:.6g}".format(self.b, self.lam)

    def to_config(self):
        return {"kind": str(self.kind), "lambda": self.lam, "b": self.b}


@dataclass(frozen=True)
class Power(Majorant):
    """lambda * (1 + t)**nu"""
    lam: float
    nu: float

    kind = FamilyKind.Power

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("majorant scale lambda must be positive, got {0}".format(self.lam))

    def value(self, t):
        _check_time(t)
        return _as_result(self.lam * np.power(1.0 + np.asarray(t, dtype=float), self.nu), t)

    def derivative(self, t):
        _check_time(t)
        return _as_result(self.lam * self.nu * np.power(1.0 + np.asarray(t, dtype=float), self.nu - 1.0), t)

    @property
    def scale(self):
        return self.lam

    @property
    def unbounded(self):
        return self.nu > 0

    def describe(self):
        return "1 / ({0:.6g} (1 + t)^{1:.6g})".format(self.lam, self.nu)

    def to_config(self):
        return {"kind": str(self.kind), "lambda": self.lam, "nu": self.nu}


@dataclass(frozen=True)
class Generic(Majorant):
    """A caller supplied mu with its exact derivative. Holds callables, so it has no config form."""
    eval_fn: Callable = field(compare=False)
    deriv_fn: Callable = field(compare=False)
    name: str = "generic"
    grows_unbounded: bool = False

    kind = FamilyKind.Generic

    def value(self, t):
        _check_time(t)
        if np.ndim(t) == 0:
            result = float(self.eval_fn(float(t)))
            if not result > 0:
                raise ValueError("majorant {0} must be positive, got {1} at t={2}".format(self.name, result, t))
            return result
        result = np.asarray([self.eval_fn(float(s)) for s in np.asarray(t)], dtype=float)
        if np.any(~(result > 0)):
            raise ValueError("majorant {0} must be positive on the whole grid".format(self.name))
        return result

    def derivative(self, t):
        _check_time(t)
        if np.ndim(t) == 0:
            return float(self.deriv_fn(float(t)))
        return np.asarray([self.deriv_fn(float(s)) for s in np.asarray(t)], dtype=float)

    @property
    def unbounded(self):
        return self.grows_unbounded

    def describe(self):
        return "1 / {0}(t)".format(self.name)


# ----- Operations ---------------------------------------------------------------------


def eval_coeff(f, t):
    """Value of a coefficient function at t >= 0."""
    return f.value(t)


def eval_alpha(alpha, t, g):
    """alpha(t, g) for g >= 0."""
    return alpha.value(t, g)


def eval_majorant(mu, t):
    return mu.value(t)


def deriv_majorant(mu, t):
    return mu.derivative(t)


def local_lipschitz(alpha, t_end, m):
    """Bound on the Lipschitz constant L(T, M) of alpha in g on [0, t_end] x [0, m]."""
    if not (t_end >= 0 and m >= 0):
        raise ValueError("local_lipschitz needs t_end >= 0 and m >= 0")
    return alpha.lipschitz_bound(t_end, m)
