"""Exception types for the ledger engine.

``LedgerError`` subclasses signal rejected operations: a precondition did not
hold and the state is unchanged. ``EngineFault`` signals a defect (corrupted
forest, an internal invariant about to be violated); it is never raised for
ordinary bad requests and never silently recovered from.
"""

from __future__ import annotations


class LedgerError(Exception):
    """An operation was rejected; the ledger state is unchanged."""


class UnknownAccountError(LedgerError):
    pass


class DuplicateAccountError(LedgerError):
    pass


class InvalidAmountError(LedgerError):
    """Amount, delta, or principal outside its permitted range."""


class InsufficientCapacityError(LedgerError):
    """Requested delegation exceeds the delegator's free capacity."""


class NoSuchEdgeError(LedgerError):
    pass


class RevocationRaiseError(LedgerError):
    """Revocation cannot raise a delegation; use a delegation top-up."""


class InsolventRevocationError(LedgerError):
    """Revocation below the child's required-delegation floor."""

    def __init__(self, message: str, floor: int):
        super().__init__(message)
        self.floor = floor


class ActiveLoanError(LedgerError):
    """Borrower already has an active loan."""


class CreditLimitExceededError(LedgerError):
    pass


class InfeasibleLoanError(LedgerError):
    """A sponsor-path edge cannot back the requested principal."""

    def __init__(self, message: str, edge_index: int, report=None):
        super().__init__(message)
        self.edge_index = edge_index
        self.report = report


class LoanStateError(LedgerError):
    """Loan missing or not in the status the operation requires."""


class PricingInputError(LedgerError):
    """Pricing input out of range (default probability, term, seed budget)."""


class EngineFault(Exception):
    """Internal invariant violated or state corrupted; not a rejection."""
