"""Exception hierarchy shared by the ledger, contracts, flows and simulator."""
from __future__ import annotations

import enum


class SmartMoneyError(Exception):
    """Base class for every error raised by this package."""


# -- ledger ---------------------------------------------------------------

class UnknownNode(SmartMoneyError):
    pass


class UnknownAccount(SmartMoneyError):
    pass


class DuplicateAccountName(SmartMoneyError):
    pass


class AccountKindConflict(SmartMoneyError):
    """A government account kind was created twice or outside the HMRC node."""


class UnknownInput(SmartMoneyError):
    pass


class SignerNotParticipant(SmartMoneyError):
    pass


class NotParticipant(SmartMoneyError):
    pass


class MissingSignature(SmartMoneyError):
    pass


class InvalidSignature(MissingSignature):
    pass


class DoubleSpend(SmartMoneyError):
    pass


class InsufficientFunds(SmartMoneyError):
    def __init__(self, message: str = "insufficient funds available"):
        super().__init__(message)


# -- contracts ------------------------------------------------------------

class Reason(str, enum.Enum):
    WRONG_VAT = "WrongVat"
    WRONG_NET = "WrongNet"
    WRONG_TOTAL = "WrongTotal"
    WRONG_MOVEMENTS = "WrongMovements"
    WRONG_SHAPE = "WrongShape"
    WRONG_MONEY_KIND = "WrongMoneyKind"
    WRONG_PARTICIPANTS = "WrongParticipants"
    WRONG_SIGNERS = "WrongSigners"
    ALREADY_PAID = "AlreadyPaid"
    DISALLOWED_GOODS = "DisallowedGoods"
    RATE_MISMATCH = "RateMismatch"
    INVALID_LINE = "InvalidLine"
    NOT_REQUESTER = "NotRequester"
    NOT_INVESTIGATOR = "NotInvestigator"
    WRONG_AUTHORITY = "WrongAuthority"
    ALREADY_EXECUTED = "AlreadyExecuted"
    UNKNOWN_WARRANT = "UnknownWarrant"
    UNAUTHORIZED_ISSUER = "UnauthorizedIssuer"
    NON_POSITIVE_AMOUNT = "NonPositiveAmount"
    UNKNOWN_RECIPIENT = "UnknownRecipient"


DISALLOWED_GOODS_MESSAGE = "you cannot pay for invalid goods with money from your token account"


class ContractViolation(SmartMoneyError):
    """A proposed transaction failed contract verification."""

    def __init__(self, reason: Reason, detail: str = ""):
        self.reason = reason
        self.detail = detail
        super().__init__(detail or reason.value)


class RateMismatch(ContractViolation):
    def __init__(self, detail: str = ""):
        super().__init__(Reason.RATE_MISMATCH, detail)


class InvalidLine(ContractViolation):
    def __init__(self, detail: str = ""):
        super().__init__(Reason.INVALID_LINE, detail)


class DisallowedGoods(ContractViolation):
    def __init__(self, detail: str = DISALLOWED_GOODS_MESSAGE):
        super().__init__(Reason.DISALLOWED_GOODS, detail)


def violation(reason: Reason, detail: str = "") -> ContractViolation:
    if reason is Reason.DISALLOWED_GOODS:
        return DisallowedGoods()
    if reason is Reason.RATE_MISMATCH:
        return RateMismatch(detail)
    if reason is Reason.INVALID_LINE:
        return InvalidLine(detail)
    return ContractViolation(reason, detail)


# -- flows ----------------------------------------------------------------

class UnknownInvoice(SmartMoneyError):
    pass


class WrongBuyer(SmartMoneyError):
    pass


class UnknownSubject(SmartMoneyError):
    pass


class WarrantRejected(SmartMoneyError):
    pass


class SessionFailure(SmartMoneyError):
    pass


# -- simulator ------------------------------------------------------------

class ConfigError(SmartMoneyError, ValueError):
    pass


class DuplicateNode(ConfigError):
    pass


class MissingNotary(ConfigError):
    pass


class MissingRole(ConfigError):
    pass


class WrongNode(SmartMoneyError):
    pass


class QueueOverflow(SmartMoneyError):
    pass


class DeadlockDetected(SmartMoneyError):
    pass


# -- harness / cli --------------------------------------------------------

class ConfigViolation(ConfigError):
    pass


class IncompleteRun(SmartMoneyError):
    pass


class EmptyRecords(SmartMoneyError, ValueError):
    pass


class CorruptRecords(SmartMoneyError, ValueError):
    pass


class IoError(SmartMoneyError, OSError):
    pass


class ParseError(SmartMoneyError, ValueError):
    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        self.message = message
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
