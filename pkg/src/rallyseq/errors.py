"""Exception hierarchy.

``InputError`` subclasses map to CLI exit code 2, ``RuntimeFailure`` to 3.
"""

from __future__ import annotations


class RallySeqError(Exception):
    pass


class InputError(RallySeqError, ValueError):
    pass


class RuntimeFailure(RallySeqError, RuntimeError):
    pass


class InvalidEvent(InputError):
    pass


class AnnotationError(InputError):
    pass


class EmptySequence(InputError):
    pass


class InputMisaligned(InputError):
    pass


class TrackRequired(InputError):
    pass


class EmptyCoordinateList(InputError):
    pass


class BudgetTooSmall(InputError):
    pass


class FrameOutOfRange(InputError):
    pass


class UnknownRally(InputError):
    pass


class ConfigError(InputError):
    pass


class RunFailed(RuntimeFailure):
    def __init__(self, message: str, manifest=None):
        super().__init__(message)
        self.manifest = manifest
