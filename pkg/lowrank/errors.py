"""Exceptions and warnings raised by `lowrank`.

Every error is a `ValueError`, so callers that only guard against bad input
keep working.
"""

__all__ = ['LowRankError', 'ShapeMismatch', 'NonFiniteEntries',
           'RankDeficient', 'ClippedToRankDeficient', 'DidNotConverge',
           'ZeroMatrix', 'DegenerateInit', 'NotOrthonormal',
           'EmptyPartition', 'IndexOutOfBounds', 'DuplicateEntries', 'OutOfRange',
           'InsufficientTrace', 'ConfigInvalid', 'MalformedFile', 'SingularSubproblem']


class LowRankError(ValueError):
    """Base class of all `lowrank` errors."""


class ShapeMismatch(LowRankError):
    pass


class NonFiniteEntries(LowRankError):
    pass


class RankDeficient(LowRankError):
    pass


class ClippedToRankDeficient(RankDeficient):
    """Clipping zeroed enough entries to collapse the column rank."""


class DidNotConverge(LowRankError):
    pass


class ZeroMatrix(LowRankError):
    pass


class DegenerateInit(LowRankError):
    """The spectral initializer cannot identify k directions."""


class NotOrthonormal(LowRankError):
    pass


class EmptyPartition(LowRankError):
    pass


class IndexOutOfBounds(LowRankError):
    pass


class DuplicateEntries(LowRankError):
    """The same (i, j) index appears twice in an observation set."""


class OutOfRange(LowRankError):
    """A scalar argument (probability, count) outside its allowed range."""


class InsufficientTrace(LowRankError):
    pass


class ConfigInvalid(LowRankError):
    """Invalid configuration; `errors` maps field names to messages."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = {'config': errors}
        self.errors = dict(errors)
        lines = [f'{field}: {message}' for field, message in self.errors.items()]
        super().__init__('invalid configuration\n  ' + '\n  '.join(lines))


class MalformedFile(LowRankError):
    pass


class SingularSubproblem(UserWarning):
    """A least-squares half-step was rank-deficient; the minimum-norm
    solution was used instead."""
