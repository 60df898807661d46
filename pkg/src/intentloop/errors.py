"""Exception types shared across the package."""


class IntentLoopError(Exception):
    """Base class for all package errors."""


class EmptyPrompt(IntentLoopError):
    """Prompt contains no tokens after normalization."""


class GrammarError(IntentLoopError):
    """Prompt does not match the restricted grammar.

    Carries the zero-based position of the offending token.
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (token {position})")
        self.position = position


class UnknownCategory(GrammarError):
    pass


class UnknownAttribute(GrammarError):
    pass


class RuleConflict(IntentLoopError):
    """A defaults rule would add a relation contradicting an existing one."""


class UnsatisfiableConstraints(IntentLoopError):
    """Spatial constraints contain a per-axis cycle.

    ``cycle`` lists the instance ids forming the contradiction.
    """

    def __init__(self, axis: str, cycle: list):
        super().__init__(f"cyclic {axis}-axis constraints: {' -> '.join(cycle)}")
        self.axis = axis
        self.cycle = cycle


class TooManyInstances(IntentLoopError):
    """Scene graph exceeds the solver's instance limit."""


class InvalidTarget(IntentLoopError):
    """An update or edit references an id that does not exist."""


class InvariantViolation(IntentLoopError):
    """A mutation would leave a structure in an invalid state."""


class InvalidUpdate(IntentLoopError):
    """An update signal could not be applied.

    ``index`` is the position of the failing signal in the update list.
    """

    def __init__(self, message: str, index: int):
        super().__init__(f"update[{index}]: {message}")
        self.index = index


class CalibrationFailed(IntentLoopError):
    """Search budget exhausted without reaching the accuracy targets."""


class UnsupportedFormat(IntentLoopError):
    """Requested report format is not one of json/csv/md."""
