"""Exception hierarchy shared across the package."""


class PicolError(Exception):
    """Base class for all package errors."""


# network
class GraphError(PicolError, ValueError):
    pass


class DuplicateEdge(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class EmptyGraph(GraphError):
    pass


class UnknownNode(GraphError, KeyError):
    pass


class UnknownEdge(GraphError, KeyError):
    pass


class IsolatedNode(GraphError):
    pass


# shapes
class DimensionMismatch(PicolError, ValueError):
    pass


ShapeMismatch = DimensionMismatch


# simulator / trace io
class InvalidIncident(PicolError, ValueError):
    pass


class IncidentOutOfRange(InvalidIncident):
    pass


class TraceFormatError(PicolError, ValueError):
    pass


class MalformedRow(TraceFormatError):
    pass


class LengthMismatch(TraceFormatError):
    pass


# objectives / routing
class NotAPath(PicolError, ValueError):
    pass


class Unreachable(PicolError):
    pass


# predictor
class WindowTooShort(PicolError, ValueError):
    pass


class SingularSystem(PicolError, ArithmeticError):
    pass


class PredictorUnavailable(PicolError, RuntimeError):
    pass


# metrics / harness
class Misaligned(PicolError, ValueError):
    pass


class ConfigInvalid(PicolError, ValueError):
    """Raised with a list of ``field: message`` problems."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class IncompatibleRuns(PicolError, ValueError):
    pass
