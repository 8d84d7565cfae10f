"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map error families to
process exit statuses without a lookup table.
"""


class VortexError(Exception):
    exit_code = 1


class UsageError(VortexError):
    exit_code = 2


class ArchiveIOError(VortexError):
    exit_code = 3


class ValidationFailure(VortexError):
    """Base for anything that fails a data check (safeguards, parsing, ranges)."""

    exit_code = 4


class BackendError(VortexError):
    exit_code = 5


class ProtocolError(VortexError):
    exit_code = 6


# core-model
class ParseError(ValidationFailure):
    pass


class RangeError(ValidationFailure):
    pass


class RosterError(ValidationFailure):
    pass


# physiology
class NumericalError(VortexError):
    """A non-finite value appeared inside the engine. Always a model bug."""


class InvalidIntervention(ValidationFailure):
    pass


class ScenarioError(ValidationFailure):
    pass


# statistics
class NoData(ValidationFailure):
    pass


class InvalidResponse(ValidationFailure):
    pass


class UndefinedCorrelation(ValidationFailure):
    pass


class ArityError(ValidationFailure):
    pass
