"""Exception hierarchy shared by every layer of the package."""


class CutBrokerError(Exception):
    """Base class for all package errors."""


class InvalidArgument(CutBrokerError, ValueError):
    pass


class CircuitValidationError(CutBrokerError, ValueError):
    pass


class QasmParseError(CutBrokerError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CapacityError(CutBrokerError):
    pass


class CutError(CutBrokerError):
    pass


class IncompleteResultsError(CutBrokerError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        preview = ", ".join(self.missing[:8])
        more = "" if len(self.missing) <= 8 else f" (+{len(self.missing) - 8} more)"
        super().__init__(f"missing variant results: {preview}{more}")


class DegenerateScoresError(CutBrokerError):
    pass


class CalibrationError(CutBrokerError):
    pass


class JobError(CutBrokerError):
    def __init__(self, qpu_id, message):
        self.qpu_id = qpu_id
        super().__init__(f"QPU {qpu_id!r}: {message}")


class SelfInconsistencyError(CutBrokerError):
    pass


class ConfigError(CutBrokerError):
    pass


class ReportError(CutBrokerError):
    def __init__(self, path, message):
        self.path = str(path)
        super().__init__(f"{path}: {message}")


# errors caused by the caller's input rather than by running it
INPUT_ERRORS = (ConfigError, QasmParseError, CircuitValidationError, CutError, InvalidArgument)


def is_input_error(exc: BaseException) -> bool:
    return isinstance(exc, INPUT_ERRORS)
