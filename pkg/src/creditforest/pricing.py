"""Loan pricing: premium rates, premiums, sponsor payouts, and earned-credit awards.

All figures come from the pre-origination snapshot and are quoted in integer
minor units and ppm rates. The delegation premium is defined as the sum of
the individually rounded sponsor payouts, so the borrower's charge and the
payouts balance exactly by construction.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import CreditLimitExceededError, EngineFault, InfeasibleLoanError, PricingInputError
from .model import DEFAULT_CONFIG, EngineConfig, LedgerState, LockedEdge, PricingQuote
from .rates import PPM, apply_rate, round_half_even_div
from .solvency import check_feasibility


def break_even_rate_exact(default_prob_ppm: int, term: int) -> Fraction:
    """Exact break-even protocol premium rate, in ppm per period."""
    if not 0 < default_prob_ppm < PPM:
        raise PricingInputError(
            f"default probability must be inside (0, {PPM}) ppm, got {default_prob_ppm}"
        )
    if term < 1:
        raise PricingInputError(f"term must be at least one period, got {term}")
    return Fraction(default_prob_ppm * PPM, (PPM - default_prob_ppm) * term)


def break_even_rate(default_prob_ppm: int, term: int) -> int:
    """Break-even rate rounded half-even to ppm: expected premium equals expected loss."""
    exact = break_even_rate_exact(default_prob_ppm, term)
    return round_half_even_div(exact.numerator, exact.denominator)


def protocol_premium(principal: int, term: int, protocol_rate_ppm: int) -> int:
    """Premium charged for expected default loss: rate * principal * term."""
    return apply_rate(principal, protocol_rate_ppm, term)


def seed_utilization(state: LedgerState) -> int:
    """Share of aggregate seed budget currently delegated out by seeds, in ppm."""
    delegated = 0
    budget_total = 0
    for acct in state.accounts.values():
        if acct.is_seed:
            delegated += sum(acct.out_delegations.values())
            budget_total += acct.budget
    if budget_total <= 0:
        raise PricingInputError("seed utilization undefined: total seed budget is zero")
    value = round_half_even_div(delegated * PPM, budget_total)
    if value > PPM:
        raise EngineFault(f"seed utilization {value} ppm above 100%")
    return value


def delegation_rate(utilization_ppm: int, rdmax_ppm: int) -> int:
    """Linear schedule: highest rate at zero utilization, zero at full utilization."""
    if not 0 <= utilization_ppm <= PPM:
        raise PricingInputError(f"utilization must be within [0, {PPM}] ppm")
    return round_half_even_div(rdmax_ppm * (PPM - utilization_ppm), PPM)


def sponsor_payouts(
    locked: list[tuple[str, int]], delegation_rate_ppm: int, term: int
) -> list[tuple[str, int]]:
    """Per-edge sponsor payout for locked delegation, each rounded half-even."""
    return [
        (sponsor, apply_rate(amount, delegation_rate_ppm, term))
        for sponsor, amount in locked
    ]


def earned_credit_award(
    principal: int, term: int, protocol_premium_amount: int, gamma_ppm: int | None
) -> int:
    """Earned credit granted at repayment, capped by the protocol premium.

    The cap keeps any repay-then-default strategy weakly unprofitable; the
    default policy (``gamma_ppm=None``) awards the cap exactly.
    """
    if gamma_ppm is None:
        return protocol_premium_amount
    return min(apply_rate(principal, gamma_ppm, term), protocol_premium_amount)


def quote_loan(
    state: LedgerState,
    borrower: str,
    principal: int,
    term: int,
    default_prob_ppm: int,
    config: EngineConfig = DEFAULT_CONFIG,
    protocol_rate_ppm: int | None = None,
) -> PricingQuote:
    """Price a proposed loan against the current snapshot without mutating it.

    Raises ``CreditLimitExceededError`` or ``InfeasibleLoanError`` when the
    loan cannot be admitted; the state is left untouched either way.
    """
    report = check_feasibility(state, borrower, principal)
    if not report.within_limit:
        raise CreditLimitExceededError(
            f"{borrower!r} asked {principal} against credit limit {report.credit_limit}"
        )
    if report.first_violation is not None:
        bad = report.per_edge[report.first_violation]
        raise InfeasibleLoanError(
            f"edge {bad.sponsor!r}->{bad.child!r} can back {bad.slack} "
            f"but the loan locks {bad.locked}",
            edge_index=bad.index,
            report=report,
        )
    rate = (
        break_even_rate(default_prob_ppm, term)
        if protocol_rate_ppm is None
        else protocol_rate_ppm
    )
    premium = protocol_premium(principal, term, rate)
    utilization = seed_utilization(state)
    edge_rate = delegation_rate(utilization, config.rdmax_ppm)
    locked_amounts = [(check.sponsor, check.locked) for check in report.per_edge]
    payouts = sponsor_payouts(locked_amounts, edge_rate, term)
    locked_edges = tuple(
        LockedEdge(sponsor=sponsor, locked=amount, payout=payout)
        for (sponsor, amount), (_, payout) in zip(locked_amounts, payouts)
    )
    return PricingQuote(
        protocol_rate_ppm=rate,
        protocol_premium=premium,
        utilization_ppm=utilization,
        delegation_rate_ppm=edge_rate,
        locked=locked_edges,
        delegation_premium=sum(edge.payout for edge in locked_edges),
        earned_award=earned_credit_award(principal, term, premium, config.gamma_ppm),
    )
