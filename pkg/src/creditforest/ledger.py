"""Ledger engine: every admissible state transition.

Operations mutate the given ``LedgerState`` in place and return it; all
mutation is expected to flow through a single serialized caller. Take a
``state.clone()`` when an immutable snapshot is needed. Two global
invariants hold after every successful operation:

* conservation: the credit limits summed over all accounts equal total seed
  base budget plus total earned credit, exactly;
* solvency: every sponsor edge carries at least the child's required
  delegation.

Operations reject bad requests with ``LedgerError`` subclasses before
touching state. A violated invariant mid-operation is an ``EngineFault``;
amounts are never silently clamped.
"""

from __future__ import annotations

from . import pricing, solvency
from .errors import (
    ActiveLoanError,
    DuplicateAccountError,
    EngineFault,
    InsolventRevocationError,
    InsufficientCapacityError,
    InvalidAmountError,
    LoanStateError,
    NoSuchEdgeError,
    PricingInputError,
    RevocationRaiseError,
)
from .model import (
    DEFAULT_CONFIG,
    LOAN_ACTIVE,
    LOAN_DEFAULTED,
    LOAN_REPAID,
    Account,
    EngineConfig,
    LedgerState,
    Loan,
    credit_limit,
    free_capacity,
)
from .rates import PPM

__all__ = [
    "add_seed",
    "onboard",
    "adjust_delegation",
    "revoke",
    "borrow",
    "repay",
    "default",
    "credit_limit",
    "free_capacity",
    "total_credit",
]


def total_credit(state: LedgerState) -> int:
    """Aggregate credit capacity: sum of all credit limits."""
    return sum(credit_limit(state, account_id) for account_id in state.accounts)


def add_seed(state: LedgerState, account_id: str, base: int) -> LedgerState:
    """Create a seed account with an exogenous base budget."""
    if account_id in state.accounts:
        raise DuplicateAccountError(f"account {account_id!r} already exists")
    if base <= 0:
        raise InvalidAmountError(f"seed base budget must be positive, got {base}")
    state.accounts[account_id] = Account(id=account_id, base_budget=base)
    state.event_counter += 1
    return state


def onboard(state: LedgerState, sponsor_id: str, new_id: str, amount: int) -> LedgerState:
    """Sponsor a new account by delegating part of the sponsor's capacity.

    The gate is free capacity (credit limit minus the sponsor's own
    principal) so the sponsor's later default cannot strand the delegation.
    """
    sponsor = state.require(sponsor_id)
    if new_id in state.accounts:
        raise DuplicateAccountError(f"account {new_id!r} already exists")
    if amount <= 0:
        raise InvalidAmountError(f"delegation must be positive, got {amount}")
    available = free_capacity(state, sponsor_id)
    if amount > available:
        raise InsufficientCapacityError(
            f"{sponsor_id!r} has free capacity {available}, cannot delegate {amount}"
        )
    state.accounts[new_id] = Account(id=new_id, sponsor=sponsor_id, incoming=amount)
    sponsor.out_delegations[new_id] = amount
    state.event_counter += 1
    return state


def adjust_delegation(state: LedgerState, from_id: str, to_id: str, delta: int) -> LedgerState:
    """Top up an existing sponsor edge by delta."""
    sponsor = state.require(from_id)
    if to_id not in sponsor.out_delegations:
        raise NoSuchEdgeError(f"no delegation edge {from_id!r}->{to_id!r}")
    if delta <= 0:
        raise InvalidAmountError(f"top-up must be positive, got {delta}")
    available = free_capacity(state, from_id)
    if delta > available:
        raise InsufficientCapacityError(
            f"{from_id!r} has free capacity {available}, cannot add {delta}"
        )
    sponsor.out_delegations[to_id] += delta
    state.accounts[to_id].incoming += delta
    state.event_counter += 1
    return state


def revoke(state: LedgerState, from_id: str, to_id: str, new_amount: int) -> LedgerState:
    """Lower the edge into ``to_id`` to ``new_amount``; the freed capacity returns.

    Admissible only down to the child's required delegation, which keeps the
    whole subtree solvent. The edge persists structurally even at zero.
    """
    sponsor = state.require(from_id)
    current = sponsor.out_delegations.get(to_id)
    if current is None:
        raise NoSuchEdgeError(f"no delegation edge {from_id!r}->{to_id!r}")
    if new_amount < 0:
        raise InvalidAmountError(f"delegation cannot be negative, got {new_amount}")
    if new_amount > current:
        raise RevocationRaiseError(
            f"revocation cannot raise {from_id!r}->{to_id!r} from {current} to {new_amount}"
        )
    floor = solvency.required_delegation(state, to_id)
    if new_amount < floor:
        raise InsolventRevocationError(
            f"edge {from_id!r}->{to_id!r} must keep at least {floor}, got {new_amount}",
            floor=floor,
        )
    sponsor.out_delegations[to_id] = new_amount
    state.accounts[to_id].incoming = new_amount
    state.event_counter += 1
    return state


def borrow(
    state: LedgerState,
    borrower_id: str,
    principal: int,
    term: int,
    default_prob_ppm: int,
    config: EngineConfig = DEFAULT_CONFIG,
    protocol_rate_ppm: int | None = None,
) -> tuple[LedgerState, str]:
    """Originate a loan against the borrower's credit limit and sponsor path.

    The quote is computed from the state as it stands at this event and
    frozen onto the loan. Origination itself moves no budgets and no edges;
    it only records the principal. Loan ids are assigned deterministically
    in creation order.
    """
    borrower = state.require(borrower_id)
    if borrower.principal != 0:
        raise ActiveLoanError(f"{borrower_id!r} already has an active loan")
    if principal <= 0:
        raise InvalidAmountError(f"principal must be positive, got {principal}")
    if term < 1:
        raise PricingInputError(f"term must be at least one period, got {term}")
    if not 0 < default_prob_ppm < PPM:
        raise PricingInputError(
            f"default probability must be inside (0, {PPM}) ppm, got {default_prob_ppm}"
        )
    quote = pricing.quote_loan(
        state,
        borrower_id,
        principal,
        term,
        default_prob_ppm,
        config=config,
        protocol_rate_ppm=protocol_rate_ppm,
    )
    loan_id = f"loan-{len(state.loans) + 1}"
    if loan_id in state.loans:
        raise EngineFault(f"loan id {loan_id!r} already allocated")
    state.loans[loan_id] = Loan(
        id=loan_id,
        borrower=borrower_id,
        principal=principal,
        term=term,
        default_prob_ppm=default_prob_ppm,
        quote=quote,
    )
    borrower.principal = principal
    state.event_counter += 1
    return state, loan_id


def _active_loan(state: LedgerState, loan_id: str) -> Loan:
    loan = state.loans.get(loan_id)
    if loan is None:
        raise LoanStateError(f"unknown loan {loan_id!r}")
    if loan.status != LOAN_ACTIVE:
        raise LoanStateError(f"loan {loan_id!r} is {loan.status}, not active")
    return loan


def repay(state: LedgerState, loan_id: str) -> LedgerState:
    """Settle a loan: collect premiums, pay sponsors, award earned credit.

    The borrower pays both premium components; the protocol keeps the
    protocol premium and every payout goes to its path sponsor, so the cash
    legs net to zero. Aggregate credit rises by exactly the earned award.
    """
    loan = _active_loan(state, loan_id)
    borrower = state.require(loan.borrower)
    if borrower.principal != loan.principal:
        raise EngineFault(
            f"loan {loan_id!r} principal {loan.principal} does not match "
            f"borrower principal {borrower.principal}"
        )
    quote = loan.quote
    if quote.earned_award > quote.protocol_premium:
        raise EngineFault(f"loan {loan_id!r} quote breaches the earned-award cap")
    if quote.delegation_premium != sum(edge.payout for edge in quote.locked):
        raise EngineFault(f"loan {loan_id!r} quote payouts do not balance")
    borrower.principal = 0
    borrower.earned += quote.earned_award
    borrower.cash -= quote.protocol_premium + quote.delegation_premium
    state.protocol_cash += quote.protocol_premium
    for edge in quote.locked:
        state.require(edge.sponsor).cash += edge.payout
    loan.status = LOAN_REPAID
    state.event_counter += 1
    return state


def default(state: LedgerState, loan_id: str) -> LedgerState:
    """Write off a loan, propagating the loss up the sponsor path.

    The borrower's earned credit burns first; the residual then walks the
    path toward the seed, shrinking each sponsor edge by the residual and
    burning each sponsor's earned credit, until a seed absorbs what is left
    in base budget. Every path node except the borrower keeps its credit
    limit, and aggregate credit falls by exactly the principal; both are
    asserted, and a negative edge or base budget is a fault, never clamped.
    """
    loan = _active_loan(state, loan_id)
    borrower = state.require(loan.borrower)
    if borrower.principal != loan.principal:
        raise EngineFault(
            f"loan {loan_id!r} principal {loan.principal} does not match "
            f"borrower principal {borrower.principal}"
        )
    path = solvency.path_to_seed(state, loan.borrower)
    limits_before = {node: credit_limit(state, node) for node in path.nodes}

    absorbed = min(borrower.earned, borrower.principal)
    borrower.earned -= absorbed
    residual = borrower.principal - absorbed
    node = borrower
    while residual > 0 and node.sponsor is not None:
        parent = state.accounts[node.sponsor]
        edge = parent.out_delegations.get(node.id)
        if edge is None:
            raise EngineFault(f"missing delegation edge {parent.id!r}->{node.id!r}")
        if edge < residual:
            raise EngineFault(
                f"default would overdraw edge {parent.id!r}->{node.id!r}: "
                f"{edge} < {residual}"
            )
        parent.out_delegations[node.id] = edge - residual
        node.incoming = edge - residual
        absorbed = min(parent.earned, residual)
        parent.earned -= absorbed
        residual -= absorbed
        node = parent
    if residual > 0:
        if not node.is_seed:
            raise EngineFault(f"loss propagation stopped at non-seed {node.id!r}")
        if node.base_budget < residual:
            raise EngineFault(
                f"default would overdraw seed {node.id!r} base budget: "
                f"{node.base_budget} < {residual}"
            )
        node.base_budget -= residual

    borrower.principal = 0
    state.protocol_cash -= loan.principal
    loan.status = LOAN_DEFAULTED

    for path_node in path.nodes[:-1]:
        if credit_limit(state, path_node) != limits_before[path_node]:
            raise EngineFault(f"default changed credit limit of path node {path_node!r}")
    expected = limits_before[loan.borrower] - loan.principal
    if credit_limit(state, loan.borrower) != expected:
        raise EngineFault(
            f"borrower {loan.borrower!r} credit limit did not fall by the principal"
        )
    state.event_counter += 1
    return state
