"""Exception hierarchy.

Three branches map onto the CLI exit-code contract: ``DomainError`` (exit 1),
``UsageError`` (exit 2) and ``StorageError`` (exit 3). Every message names the
rule that was violated so callers can surface it verbatim.
"""

from __future__ import annotations


class AnnoglueError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class DomainError(AnnoglueError):
    """A domain rule was violated (validation, illegal transition, unknown id)."""

    exit_code = 1


class UsageError(AnnoglueError):
    """Malformed input that never reached the domain layer."""

    exit_code = 2


class StorageError(AnnoglueError):
    """I/O failure or on-disk corruption."""

    exit_code = 3


# --- annotation model ------------------------------------------------------


class InvalidBodyError(DomainError):
    pass


class DuplicateTargetError(DomainError):
    pass


class TargetIndexError(DomainError):
    """Target index out of range."""

    pass


class LastTargetError(DomainError):
    """Removing the only target of a persisted annotation is rejected."""

    pass


class InvalidPresentationError(DomainError):
    pass


class NotAVoteError(DomainError):
    pass


class AnnotationDisposedError(DomainError):
    pass


class ScenarioParseError(DomainError):
    """Base for scenario grammar failures; ``line_no`` is 1-based."""

    def __init__(self, message: str, line_no: int | None = None):
        super().__init__(message)
        self.line_no = line_no


class EmptyScenarioError(ScenarioParseError):
    pass


class BadKeywordError(ScenarioParseError):
    pass


class BadFirstStepError(ScenarioParseError):
    pass


class EmptyStepTextError(ScenarioParseError):
    pass


class IllegalTransitionError(DomainError):
    def __init__(self, current, requested):
        super().__init__(
            f"illegal lifecycle transition: {current.value} -> {requested.value}"
        )
        self.current = current
        self.requested = requested


# --- artefact registry -----------------------------------------------------


class ArtefactFileNotFoundError(StorageError):
    pass


class InvalidPathError(DomainError):
    """Artefact paths must be project-relative, forward-slash, without '..'."""

    pass


class DuplicateNameError(DomainError):
    pass


class IdenticalContentError(DomainError):
    """New version has the same digest as the current latest."""

    pass


class UnknownArtefactError(DomainError):
    pass


class UnknownVersionError(DomainError):
    pass


class IllegalStatusTransitionError(DomainError):
    def __init__(self, current, requested):
        super().__init__(
            f"illegal version-status transition: {current.value} -> {requested.value}"
        )
        self.current = current
        self.requested = requested


# --- repository ------------------------------------------------------------


class AlreadyInitializedError(DomainError):
    pass


class NotAProjectError(StorageError):
    pass


class CorruptIndexError(StorageError):
    def __init__(self, detail: str):
        super().__init__(f"corrupt project index: {detail}")
        self.detail = detail


class CorruptSetError(StorageError):
    def __init__(self, path: str, detail: str, position: int | None = None):
        at = f" at offset {position}" if position is not None else ""
        super().__init__(f"corrupt annotation set {path}{at}: {detail}")
        self.path = path
        self.detail = detail
        self.position = position


class IoFailureError(StorageError):
    pass


class LockHeldError(StorageError):
    pass


class ValidationFailedError(DomainError):
    """Persist-time validation failed; carries the violation list."""

    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class UnresolvedTargetError(DomainError):
    pass


class NotAnAnnotationError(DomainError):
    pass


class NoMappableTargetError(DomainError):
    pass


# --- linker ----------------------------------------------------------------


class UnknownAnnotationError(DomainError):
    pass


# --- cli -------------------------------------------------------------------


class SelectorSyntaxError(UsageError):
    def __init__(self, message: str, position: int = 0):
        super().__init__(f"bad selector syntax at position {position}: {message}")
        self.position = position


class UnknownUserError(DomainError):
    """Creator not declared in users.json while --strict-users is active."""

    pass
