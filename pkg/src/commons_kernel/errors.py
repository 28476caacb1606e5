"""Exception hierarchy for the kernel.

Ledger-level errors (``BadSignature``, ``UnknownAuthor``, ``InvalidPayload``,
``CorruptLog``) are raised by :mod:`commons_kernel.ledger`. Everything a
module handler can refuse is a :class:`DomainError`; the ledger wraps those
in ``InvalidPayload`` and leaves the log untouched.
"""

from __future__ import annotations


class KernelError(Exception):
    pass


class BadSignature(KernelError):
    pass


class UnknownAuthor(KernelError):
    pass


class CorruptLog(KernelError):
    def __init__(self, position: int, reason: str):
        super().__init__(f"corrupt log at position {position}: {reason}")
        self.position = position
        self.reason = reason


class InvalidPayload(KernelError):
    """A payload failed a module precondition; ``error`` holds the cause."""

    def __init__(self, error: Exception):
        super().__init__(f"{type(error).__name__}: {error}")
        self.error = error


class InvalidScenario(KernelError):
    """First failing field path and message; ``problems`` lists all of them."""

    def __init__(self, path: str, message: str, problems: list[str] | None = None):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message
        self.problems = problems or [f"{path}: {message}"]


class DomainError(KernelError):
    pass


class Malformed(DomainError):
    pass


class MechanismDisabled(DomainError):
    pass


class WrongTick(DomainError):
    pass


class Unauthorized(DomainError):
    pass


class AccessDenied(Unauthorized):
    pass


class OutOfScope(Unauthorized):
    pass


class UnknownClass(DomainError):
    pass


class NotFound(DomainError):
    pass


class Insufficient(DomainError):
    pass


class NonTransferable(DomainError):
    pass


class ZeroSpend(DomainError):
    pass


class NoApproval(DomainError):
    pass


class InsufficientReserve(DomainError):
    pass


class UnknownRule(DomainError):
    pass


class NoBids(DomainError):
    pass


class NotYetDeadline(DomainError):
    pass


class DuplicateBid(DomainError):
    pass


class MarketClosed(DomainError):
    pass


class AlreadyClosed(DomainError):
    pass


class MachineVoter(DomainError):
    pass


class OutsideWindow(DomainError):
    pass


class AlreadyExecuted(DomainError):
    pass


class NotPassed(DomainError):
    pass


class InsufficientStake(DomainError):
    pass


class DuplicateEntry(DomainError):
    pass


class AlreadyFinal(DomainError):
    pass


class IncompleteScores(DomainError):
    pass


class SelfReview(DomainError):
    pass


class OutOfOrder(DomainError):
    pass


class TooFewJurors(DomainError):
    pass


class DoubleVote(DomainError):
    pass


class NotAncestor(DomainError):
    pass


class NoMandate(DomainError):
    pass


class NoCompetentNode(DomainError):
    pass


class AtRoot(DomainError):
    pass


class NotEligible(DomainError):
    pass
