import logging
import math
import os
import sys
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
import yaml

from decaycert.constant import DEFAULT_GRID_POINTS, DEFAULT_T_END, DEFAULT_TOLERANCE
from decaycert.engine.discrete import DiscreteScheme
from decaycert.engine.inequality import TimeGrid
from decaycert.engine.simulator import EvolutionProblem
from decaycert.engine.synthesis import ProblemConstants, Regime, certificate_families, synthesize
from decaycert.errors import ScenarioParseError, ScenarioValidationError
from decaycert.families import ZERO, CoefficientFunction, Majorant, Nonlinearity

_logger = logging.getLogger(__name__)


class Mode(Enum):
    Certify = "certify"
    Simulate = "simulate"
    Synthesize = "synthesize"
    Discrete = "discrete"
    End2End = "end2end"

    @classmethod
    def from_text(cls, text, default=None):
        """Converts text into a Mode.

        :param text: The mode in text form.
        :param default: If text is empty or None, returns this value.
        :return: The matching Mode, or default.
        """
        if text:
            return cls(str(text).strip().lower())
        return default

    def __repr__(self):
        return self.name

    def __str__(self):
        return self.value


class Config(object):
    """Validated access to one mapping of scenario options.

    Errors are collected rather than raised, so a scenario reports every problem at once. Labels are logged
    and reported as dotted paths below `section`.
    """

    def __init__(self, config_options, section=""):
        self._options = config_options if isinstance(config_options, dict) else {}
        self._section = section
        self._errors = []

    def get(self, key, default=None):
        return self._options.get(key, default)

    @property
    def errored(self):
        return len(self._errors)

    @property
    def errors(self):
        return self._errors

    def _path(self, label):
        return "{0}.{1}".format(self._section, label) if self._section else label

    @staticmethod
    def _log_option_value(label, value, padding=27):
        _logger.info("{0:{2}}: {1}".format(label, value, padding))

    def _log_error(self, message):
        sys.stderr.write("Configuration Error: {}\n".format(message))
        _logger.error(message)
        self._errors.append(message)

    def _get_int(self, label, default=0, required=False, verify_func=None, requirement_message=""):
        """
        Convert a configuration parameter value designated as integer into an actual int value.

        :param label: the parameter name
        :param default: default value if not specified (0)
        :param required: True if required
        :param verify_func: function used to verify integer value range; if None no validation
        :param requirement_message: message about allowed numeric range
        :return: integer value (default if there was an error)
        """
        error_message = "The config option `{}` is {} integer{}.".format(
            self._path(label), "a required" if required else "an",
            " and must be {}".format(requirement_message) if requirement_message and verify_func is not None else "")
        if label not in self._options or self._options[label] is None:
            if required:
                self._log_error(error_message)
                return default
            value = default
        else:
            try:
                value = self._options[label]
                if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                    raise ValueError(value)
                value = int(value)
            except (TypeError, ValueError):
                self._log_error(error_message)
                return default
        if verify_func is not None and value is not None:
            if not verify_func(value):
                self._log_error(error_message)
                return default
        self._log_option_value(self._path(label), value)
        return value

    def _get_float(self, label, default=None, required=False, verify_func=None, requirement_message=""):
        """
        Convert a configuration parameter value designated as a real number into a finite float.

        :param label: the parameter name
        :param default: default value if not specified (None)
        :param required: True if required
        :param verify_func: function used to verify the value range; if None only finiteness is checked
        :param requirement_message: message about the allowed range
        :return: float value (default if there was an error)
        """
        error_message = "The config option `{}` is a{} number{}.".format(
            self._path(label), " required" if required else "",
            " and must be {}".format(requirement_message) if requirement_message and verify_func is not None else "")
        if label not in self._options or self._options[label] is None:
            if required:
                self._log_error(error_message)
            return default
        try:
            if isinstance(self._options[label], bool):
                raise ValueError(self._options[label])
            value = float(self._options[label])
        except (TypeError, ValueError):
            self._log_error(error_message)
            return default
        if not math.isfinite(value) or (verify_func is not None and not verify_func(value)):
            self._log_error(error_message)
            return default
        self._log_option_value(self._path(label), value)
        return value

    def _get_string(self, label, default="", required=False, valid=None, unmatched_ok=False, to_upper=False,
                    to_lower=False):
        """
        Get the value of a configuration parameter as a string.

        :param label: the parameter name
        :param default: the default value if not supplied ("") -- if None, it is passed through unmolested
        :param required: True if required (False)
        :param valid: If defined, list of allow values (None)
        :param unmatched_ok: if True and valid is defined, return the default instead of an error when the value is
                             not one of the allowed values (False)
        :param to_upper: if True, convert to upper case (False)
        :param to_lower: if True, convert to lower case (False)
        :return: string value (default if there was an error)
        """
        if valid is None:
            valid = []
        error_message = "The config option `{}`{}{}{}".format(self._path(label),
                                                              " is required" if required else "",
                                                              " and " if required and valid else "",
                                                              "" if not valid else " must be one of {}".format(valid))
        if to_upper and to_lower:
            self._log_error("Only specify one of `to_upper` and `to_lower`")

        if required and (label not in self._options or not self._options[label]):
            self._log_error(error_message)
            return default
        value = self._options.get(label, default)
        if value is not None:
            value = str(value)
            value = value.upper() if to_upper else value.lower() if to_lower else value
            value = value.strip()
        if valid and value not in valid:
            if unmatched_ok:
                value = default
            else:
                self._log_error(error_message)
                return default
        self._log_option_value(self._path(label), value)
        return value

    def _get_section(self, label, required=False):
        """A nested mapping as a child Config sharing this config's error list."""
        raw = self._options.get(label)
        if raw is None:
            if required:
                self._log_error("The config section `{}` is required.".format(self._path(label)))
            return None
        if not isinstance(raw, dict):
            self._log_error("The config section `{}` must be a mapping.".format(self._path(label)))
            return None
        child = Config(raw, self._path(label))
        child._errors = self._errors
        return child

    def _build(self, factory, *args):
        """Runs a from_config style factory, recording its ValueError as a configuration error."""
        try:
            return factory(*args)
        except ValueError as e:
            self._log_error(str(e))
            return None


@dataclass
class DiscreteSettings(object):
    h: float
    n_max: int


@dataclass
class Scenario(object):
    name: str
    mode: Mode
    output: str
    grid: TimeGrid
    tol: float = DEFAULT_TOLERANCE
    log_level: str = "INFO"
    regime: Optional[Regime] = None
    constants: Optional[ProblemConstants] = None
    alpha: Optional[Nonlinearity] = None
    beta: Optional[CoefficientFunction] = None
    gamma: Optional[CoefficientFunction] = None
    majorant: Optional[Majorant] = None
    g0: Optional[float] = None
    problem: Optional[EvolutionProblem] = None
    discrete: Optional[DiscreteSettings] = None
    scheme: Optional[DiscreteScheme] = None
    sweep: int = 0
    source: Optional[str] = None


class ScenarioConfig(Config):
    """Reads and validates a whole scenario document.

    The mode given on the command line wins over a `mode` key in the file. `overrides` holds command line values
    for `output`, `grid.points`, `grid.t_end` and `tol`.
    """

    _constant_keys = ("k", "c1", "q1", "c2", "q2", "epsilon", "nu", "u0_norm")

    def __init__(self, config_options, mode=None, overrides=None, source=None):
        super(ScenarioConfig, self).__init__(config_options)
        overrides = overrides or {}
        self.source = source

        self.name = self._get_string("name", default=_default_name(source))
        file_mode = None
        if self.get("mode") is not None:
            file_mode = self._get_string("mode", default=None, to_lower=True, valid=[m.value for m in Mode])
        self.mode = mode if mode is not None else Mode.from_text(file_mode)
        if self.mode is None:
            self._log_error("The config option `mode` is required when no mode is given on the command line")
        elif file_mode and file_mode != self.mode.value:
            _logger.warning("Scenario declares mode '{0}', running '{1}' as requested".format(file_mode, self.mode))
        self.log_level = self._get_string("log_level", default="INFO", valid=["DEBUG", "INFO", "WARNING", "ERROR"],
                                          unmatched_ok=True, to_upper=True)
        self.output = overrides.get("output") or self._get_string("output", default=os.path.join("out", self.name))
        self.tol = overrides.get("tol")
        if self.tol is None:
            self.tol = self._get_float("tol", default=DEFAULT_TOLERANCE, verify_func=lambda x: x >= 0,
                                       requirement_message="non-negative")
        self.sweep = self._get_int("sweep", default=0, verify_func=lambda x: x >= 0,
                                   requirement_message="non-negative")

        self.grid = self._read_grid(overrides)
        self.regime = None
        if self.get("regime") is not None:
            self.regime = Regime.from_text(self._get_string("regime", default=None, to_upper=True,
                                                            valid=[r.value for r in Regime]))
        self.constants = self._read_constants()
        self.alpha, self.beta, self.gamma = self._read_families()
        self.majorant = self._read_majorant()
        self.problem = None
        problem_options = self.get("problem")
        if problem_options is not None:
            self.problem = self._build(EvolutionProblem.from_config, problem_options)
        self.g0 = self._read_g0()
        self.discrete, self.scheme = self._read_discrete()
        if self.mode is not None:
            self._check_mode_requirements()
        if self.sweep and self.mode is not None and self.mode is not Mode.Synthesize:
            _logger.warning("Option `sweep` only applies to synthesize, ignored in {0}".format(self.mode))

    def _read_grid(self, overrides):
        section = self._get_section("grid") or Config({}, "grid")
        section._errors = self._errors
        t_end = overrides.get("t_end")
        if t_end is None:
            t_end = section._get_float("t_end", default=DEFAULT_T_END, verify_func=lambda x: x > 0,
                                       requirement_message="positive")
        points = overrides.get("grid_points")
        if points is None:
            points = section._get_int("points", default=DEFAULT_GRID_POINTS, verify_func=lambda x: x >= 2,
                                      requirement_message="at least 2")
        spacing = section._get_string("spacing", default="geometric", to_lower=True, valid=["geometric", "uniform"])
        if t_end is None or points is None or not t_end > 0 or not points >= 2:
            self._log_error("The time grid needs `grid.t_end` > 0 and at least 2 `grid.points`")
            return None
        return self._build(TimeGrid.uniform if spacing == "uniform" else TimeGrid.geometric, t_end, points)

    def _read_constants(self):
        section = self._get_section("constants")
        if section is None:
            return None
        c0 = section._get_float("c0", required=True)
        p = section._get_float("p", required=True)
        values = {key: section._get_float(key) for key in self._constant_keys}
        if c0 is None or p is None:
            return None
        return self._build(ProblemConstants, c0, p, *[values[key] for key in self._constant_keys])

    def _read_families(self):
        families = self._get_section("families")
        alpha = beta = gamma = None
        if families is not None:
            if families.get("alpha") is not None:
                alpha = self._build(Nonlinearity.from_config, families.get("alpha"), "families.alpha")
            if families.get("beta") is not None:
                beta = self._build(CoefficientFunction.from_config, families.get("beta"), "families.beta")
            if families.get("gamma") is not None:
                gamma = self._build(CoefficientFunction.from_config, families.get("gamma"), "families.gamma")
        if self.regime is not None and self.constants is not None and not self.constants.missing_for(self.regime):
            derived = certificate_families(self.regime, self.constants)
            alpha = derived[0] if alpha is None else alpha
            beta = derived[1] if beta is None else beta
            gamma = derived[2] if gamma is None else gamma
        if alpha is not None and beta is None:
            beta = ZERO
        return alpha, beta, gamma

    def _read_majorant(self):
        families = self.get("families")
        if isinstance(families, dict) and families.get("mu") is not None:
            return self._build(Majorant.from_config, families["mu"], "families.mu")
        if self.regime is None or self.constants is None or self.constants.missing_for(self.regime):
            return None
        try:
            return synthesize(self.regime, self.constants).majorant
        except ValueError as e:
            self._log_error("Invalid configuration option 'constants' - {0}".format(e))
        return None

    def _read_g0(self):
        g0 = self._get_float("g0", verify_func=lambda x: x >= 0, requirement_message="non-negative")
        if g0 is None and self.problem is not None:
            g0 = float(np.linalg.norm(self.problem.u0))
        if g0 is None and self.constants is not None and self.constants.u0_norm is not None:
            g0 = self.constants.u0_norm
        return g0

    def _read_discrete(self):
        section = self._get_section("discrete")
        if section is None:
            return None, None
        h = section._get_float("h", required=True, verify_func=lambda x: x > 0, requirement_message="positive")
        n_max = section._get_int("n_max", default=None, required=True, verify_func=lambda x: x >= 1,
                                 requirement_message="at least 1")
        if h is None or n_max is None:
            return None, None
        settings = DiscreteSettings(h=h, n_max=n_max)
        if None in (self.alpha, self.gamma, self.majorant):
            return settings, None
        try:
            scheme = DiscreteScheme.from_continuous(self.alpha, self.beta, self.gamma, self.majorant, h, n_max)
        except ValueError as e:
            self._log_error("Invalid configuration option 'discrete' - {0}".format(e))
            return settings, None
        return settings, scheme

    def _check_mode_requirements(self):
        def need(condition, message):
            if not condition:
                self._log_error("Mode {0} needs {1}".format(self.mode, message))

        if self.mode in (Mode.Synthesize, Mode.End2End):
            need(self.regime is not None, "a `regime`")
            need(self.get("constants") is not None, "a `constants` section")
            if self.regime is not None and self.constants is not None:
                missing = self.constants.missing_for(self.regime)
                need(not missing, "constants {0}".format(", ".join("constants." + m for m in missing)))
        if self.mode in (Mode.Simulate, Mode.End2End):
            need(self.get("problem") is not None, "a `problem` section")
        if self.mode in (Mode.Certify, Mode.Discrete):
            need(self.alpha is not None and self.gamma is not None,
                 "`families.alpha` and `families.gamma` (or a regime with its constants)")
            need(self.majorant is not None, "`families.mu` (or a regime with its constants)")
            need(self.g0 is not None, "`g0`")
        if self.mode is Mode.Discrete:
            need(self.get("discrete") is not None, "a `discrete` section")

    @property
    def scenario(self):
        if self.errored:
            raise ScenarioValidationError(self.errors)
        return Scenario(name=self.name, mode=self.mode, output=self.output, grid=self.grid, tol=self.tol,
                        log_level=self.log_level, regime=self.regime, constants=self.constants, alpha=self.alpha,
                        beta=self.beta, gamma=self.gamma, majorant=self.majorant, g0=self.g0, problem=self.problem,
                        discrete=self.discrete, scheme=self.scheme, sweep=self.sweep, source=self.source)


def _default_name(source):
    if not source:
        return "scenario"
    return os.path.splitext(os.path.basename(source))[0]


def parse_scenario(text, source=None):
    """Parses a YAML scenario document into its top level mapping.

    :raises ScenarioParseError: on YAML syntax errors or a non-mapping document
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ScenarioParseError("Could not parse scenario {0}: {1}".format(source or "<text>", e))
    if not isinstance(raw, dict):
        raise ScenarioParseError("Scenario {0} must be a mapping at the top level".format(source or "<text>"))
    return raw


def load_scenario(path, mode=None, overrides=None):
    """Reads, parses and validates a scenario file.

    :param path: path to the YAML scenario
    :param mode: Mode from the command line, authoritative over the file
    :param overrides: command line values (`output`, `grid_points`, `t_end`, `tol`)
    :return: Scenario
    :raises ScenarioParseError: file missing, unreadable or not YAML (exit code 2)
    :raises ScenarioValidationError: with every field error found (exit code 3)
    """
    _logger.debug("Loading scenario {0}".format(path))
    try:
        with open(path, "r") as f:
            text = f.read()
    except (IOError, OSError) as e:
        raise ScenarioParseError("Could not read scenario {0}: {1}".format(path, e))
    config = ScenarioConfig(parse_scenario(text, path), mode=mode, overrides=overrides, source=path)
    return config.scenario
