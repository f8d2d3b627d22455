class DecayCertError(Exception):
    """Base class for errors raised by decaycert."""


class ScenarioParseError(DecayCertError):
    """The scenario file could not be read or is not a YAML mapping."""


class ScenarioValidationError(DecayCertError):
    """The scenario parsed but one or more fields are invalid.

    :param errors: list of messages, each naming the offending field path
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super(ScenarioValidationError, self).__init__("; ".join(self.errors))


class ArtifactWriteError(DecayCertError):
    """A report or CSV file could not be written."""


class BlowUpError(DecayCertError):
    """A trajectory left every bounded set before the end of its grid."""

    def __init__(self, time, value=None):
        self.time = time
        self.value = value
        super(BlowUpError, self).__init__("Trajectory escaped to infinity near t = {0:.10g}".format(time))


class QuadratureOverflowError(DecayCertError):
    """The exponent of an integrating factor exceeds the representable range."""

    def __init__(self, exponent):
        self.exponent = exponent
        super(QuadratureOverflowError, self).__init__(
            "Integrating factor exponent {0:.6g} exceeds the double precision range".format(exponent))
