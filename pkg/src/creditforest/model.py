"""Core domain types: accounts, loans, pricing quotes, and the ledger state.

The sponsor graph is a rooted forest. Seeds carry an exogenous base budget
and no sponsor; every other account has exactly one sponsor and receives all
of its capacity through the sponsor edge. Each delegation amount is stored
twice, on the sponsor's outgoing map and on the child's ``incoming`` field,
so that checkers can cross-verify the two sides and report a precise locus
when they disagree.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import UnknownAccountError

LOAN_ACTIVE = "active"
LOAN_REPAID = "repaid"
LOAN_DEFAULTED = "defaulted"


@dataclass(slots=True)
class Account:
    """One participant: a seed or a sponsored user."""

    id: str
    sponsor: str | None = None
    base_budget: int = 0  # seeds only; always 0 for sponsored accounts
    incoming: int = 0  # delegation on the sponsor edge; mirrors sponsor's out map
    earned: int = 0
    principal: int = 0
    out_delegations: dict[str, int] = field(default_factory=dict)
    cash: int = 0  # premium income/expense bookkeeping, not credit capacity

    @property
    def is_seed(self) -> bool:
        return self.sponsor is None

    @property
    def kind(self) -> str:
        return "seed" if self.sponsor is None else "non-seed"

    @property
    def budget(self) -> int:
        if self.sponsor is None:
            return self.base_budget + self.earned
        return self.incoming + self.earned

    def clone(self) -> Account:
        return replace(self, out_delegations=dict(self.out_delegations))


@dataclass(frozen=True, slots=True)
class LockedEdge:
    """One sponsor-path edge of a quote: capacity locked and the payout earned for it."""

    sponsor: str
    locked: int
    payout: int


@dataclass(frozen=True, slots=True)
class PricingQuote:
    """Premium breakdown frozen at origination from the pre-origination snapshot."""

    protocol_rate_ppm: int
    protocol_premium: int
    utilization_ppm: int
    delegation_rate_ppm: int
    locked: tuple[LockedEdge, ...]
    delegation_premium: int
    earned_award: int


@dataclass(slots=True)
class Loan:
    """One loan; the quote never changes after origination."""

    id: str
    borrower: str
    principal: int
    term: int
    default_prob_ppm: int
    quote: PricingQuote
    status: str = LOAN_ACTIVE

    def clone(self) -> Loan:
        return replace(self)


@dataclass(slots=True)
class LedgerState:
    """Entire ledger: sponsor forest, loans, and cash. Mutated only by engine ops.

    A ``clone()`` is a fully independent snapshot, safe to share across threads
    for read-only queries and verification.
    """

    accounts: dict[str, Account] = field(default_factory=dict)
    loans: dict[str, Loan] = field(default_factory=dict)
    event_counter: int = 0
    protocol_cash: int = 0

    def require(self, account_id: str) -> Account:
        try:
            return self.accounts[account_id]
        except KeyError:
            raise UnknownAccountError(f"unknown account {account_id!r}") from None

    def children(self, account_id: str) -> list[str]:
        return list(self.require(account_id).out_delegations)

    def clone(self) -> LedgerState:
        return LedgerState(
            accounts={aid: acct.clone() for aid, acct in self.accounts.items()},
            loans={lid: loan.clone() for lid, loan in self.loans.items()},
            event_counter=self.event_counter,
            protocol_cash=self.protocol_cash,
        )


def credit_limit(state: LedgerState, account_id: str) -> int:
    """Budget minus total outgoing delegations; signed.

    Negative values arise only through externally caused contraction (an
    upstream default or a sponsor revocation down to the solvency floor);
    such an account is reported as over-delegated and cannot borrow or
    delegate until its limit is positive again.
    """
    acct = state.require(account_id)
    return acct.budget - sum(acct.out_delegations.values())


def free_capacity(state: LedgerState, account_id: str) -> int:
    """Headroom for new actor-initiated delegation: credit limit minus own principal."""
    return credit_limit(state, account_id) - state.require(account_id).principal


@dataclass(frozen=True)
class EngineConfig:
    """Engine-level pricing policy knobs.

    ``gamma_ppm`` controls the earned-credit award per repaid loan:
    ``None`` awards the full protocol premium (the cap binds exactly),
    an integer awards ``min(gamma * L * T, protocol premium)``.
    """

    rdmax_ppm: int = 80_000
    gamma_ppm: int | None = None


DEFAULT_CONFIG = EngineConfig()
