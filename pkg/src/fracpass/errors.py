class FracpassError(Exception):
    """Base class for errors raised by fracpass."""


class ConfigurationError(FracpassError, ValueError):
    pass


class SamplingError(FracpassError, ValueError):
    pass


class CalibrationError(FracpassError, RuntimeError):
    pass


class ThresholdError(FracpassError, RuntimeError):
    """No admissible radius / threshold for the requested perturbation size."""


class HypothesisH1Error(FracpassError, ValueError):
    """The weight h is not bounded below by a positive constant on any grid ball."""


class DegeneratePathError(FracpassError, RuntimeError):
    pass


class PathResolutionError(FracpassError, RuntimeError):
    pass
