"""Exception types shared by the engines, the analysis layer and the CLI."""


class EvotreeError(Exception):
    """Base class for all package errors."""


class ModelError(EvotreeError, ValueError):
    """A model or model parameter violates its contract."""


class ValidationError(ModelError):
    """Input data (fitness, mutation matrix, state) failed validation."""


class ZeroMeanFitness(EvotreeError, ArithmeticError):
    """Mean fitness is zero: the finite population is extinct."""


class NotMutationFree(EvotreeError, ValueError):
    pass


class NotSymmetric(EvotreeError, ValueError):
    pass


class NoConvergence(EvotreeError, RuntimeError):
    """Power iteration did not settle. ``result`` holds the best iterate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class Extinction(EvotreeError):
    """Mean fitness of a tree frontier is zero.

    ``frontier`` is the (empty) frontier left after the failed step and
    ``record`` the step record describing it.
    """

    def __init__(self, message, frontier=None, record=None):
        super().__init__(message)
        self.frontier = frontier
        self.record = record


class TooShort(EvotreeError, ValueError):
    pass


class FrontierExplosion(EvotreeError):
    """A node cap was exceeded. ``partial`` carries whatever was computed."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class MissingCoordinateLabels(EvotreeError, KeyError):
    pass


class ConfigError(EvotreeError, ValueError):
    """Experiment configuration is invalid. ``field`` names the culprit."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
