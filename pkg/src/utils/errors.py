# ============================================================
# File: errors.py
# Revision: Rev.1
# Purpose: Exception hierarchy raised by the verifier modules.
# ============================================================


class ResinetError(Exception):
    """Base class for every error raised by the verifier."""


class InputShapeError(ResinetError):
    pass


class NetworkParseError(ResinetError):
    """Malformed network or query document.

    `location` is a JSON path such as ``layers[1].weights[0]``.
    """

    def __init__(self, message: str, location: str = "$"):
        super().__init__(f"{location}: {message}")
        self.location = location


class QueryError(ResinetError):
    pass


class NotPureError(ResinetError):
    def __init__(self, neuron):
        super().__init__(f"neuron {neuron} has mixed outgoing classes")
        self.neuron = neuron


class AbstractionError(ResinetError):
    pass


class CannotRefineError(ResinetError):
    pass


class LPIterationLimitError(ResinetError):
    pass


class SplitConsistencyError(ResinetError):
    pass


class OracleLimitError(ResinetError):
    pass


class TraceFormatError(ResinetError):
    pass
