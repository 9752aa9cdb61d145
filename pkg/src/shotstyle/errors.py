"""Exception hierarchy.

Every error raised for bad input derives from :class:`InputError`, which the
CLI maps to exit code 2. Anything else escaping a command is treated as an
internal failure.
"""

from __future__ import annotations


class ShotStyleError(Exception):
    """Base class for all package errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


class InputError(ShotStyleError, ValueError):
    """Invalid data or arguments supplied by the caller."""


# corpus ingestion
class MalformedTable(InputError):
    pass


class NonContiguous(InputError):
    pass


class NonPositiveDuration(InputError):
    pass


class DuplicateIndex(InputError):
    pass


class UnknownLabel(InputError):
    pass


class MissingSecond(InputError):
    pass


class DuplicateSecond(InputError):
    pass


class IncompleteMapping(InputError):
    pass


class EmptyCorpus(InputError):
    pass


class MissingAnnotation(InputError):
    pass


# features
class EmptyShotList(InputError):
    pass


class TooFewShots(InputError):
    pass


class EmptyTrack(InputError):
    pass


class TooShortTrack(InputError):
    pass


class DegenerateSample(InputError):
    pass


# learning
class EmptyClass(InputError):
    pass


class NonFiniteInput(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class InvalidK(InputError):
    pass


# evaluation
class UntrainableFold(InputError):
    pass


class InfeasibleStratification(InputError):
    pass


class UnknownBlock(InputError):
    pass


class OutOfRange(InputError):
    pass


class ZeroVariance(InputError):
    pass


class UnknownDirector(InputError):
    pass


# embedding
class PerplexityInfeasible(InputError):
    pass


# trends
class DegenerateX(InputError):
    pass


class NoConsensus(InputError):
    pass


class InsufficientFilms(InputError):
    pass


# synthesis / rendering
class InfeasibleProfile(InputError):
    pass


class ClassCountMismatch(InputError):
    pass
