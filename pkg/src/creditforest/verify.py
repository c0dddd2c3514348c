"""Independent invariant checkers and oracles.

Deliberately re-derives every quantity by a different route than the engine
and the solvency module (plain recursion instead of iterative passes, edge
differences instead of buffer formulas), so a shared bug cannot hide from
both sides. Checkers are pure: identical states produce identical reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import EngineFault, LedgerError
from .model import LOAN_ACTIVE, LOAN_DEFAULTED, LedgerState

CONSERVATION = "credit-conservation"
EDGE_MIRROR = "delegation-mirror"
SOLVENCY = "edge-solvency"
DEFAULT_TRANSITION = "default-transition"
REPAY_DEFAULT_BOUND = "repay-default-bound"


@dataclass(frozen=True)
class Violation:
    invariant: str
    locus: str
    expected: int
    actual: int


@dataclass
class InvariantReport:
    checked: list[str] = field(default_factory=list)
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def merge(self, other: InvariantReport) -> InvariantReport:
        self.checked.extend(other.checked)
        self.violations.extend(other.violations)
        return self

    def to_dict(self) -> dict:
        return {
            "checked": list(self.checked),
            "ok": self.ok,
            "violations": [
                {
                    "invariant": v.invariant,
                    "locus": v.locus,
                    "expected": v.expected,
                    "actual": v.actual,
                }
                for v in self.violations
            ],
        }


def _budget(state: LedgerState, account_id: str) -> int:
    acct = state.accounts[account_id]
    if acct.sponsor is None:
        return acct.base_budget + acct.earned
    return acct.incoming + acct.earned


def _limit(state: LedgerState, account_id: str) -> int:
    acct = state.accounts[account_id]
    return _budget(state, account_id) - sum(acct.out_delegations.values())


def check_conservation(state: LedgerState) -> InvariantReport:
    """Aggregate credit must equal seed base plus earned credit, exactly.

    Both sides of every delegation edge are compared first; a mismatch
    pinpoints the corrupted edge rather than just the broken total.
    """
    report = InvariantReport(checked=[EDGE_MIRROR, CONSERVATION])
    for acct in state.accounts.values():
        for child_id, amount in acct.out_delegations.items():
            child = state.accounts.get(child_id)
            if child is None or child.sponsor != acct.id:
                report.violations.append(
                    Violation(EDGE_MIRROR, f"{acct.id}->{child_id}", 0, amount)
                )
            elif child.incoming != amount:
                report.violations.append(
                    Violation(EDGE_MIRROR, f"{acct.id}->{child_id}", child.incoming, amount)
                )
        if acct.sponsor is not None:
            mirror = state.accounts.get(acct.sponsor)
            if mirror is None or acct.id not in mirror.out_delegations:
                report.violations.append(
                    Violation(EDGE_MIRROR, f"{acct.sponsor}->{acct.id}", acct.incoming, 0)
                )
    total = sum(_limit(state, account_id) for account_id in state.accounts)
    backing = sum(
        (acct.base_budget if acct.sponsor is None else 0) + acct.earned
        for acct in state.accounts.values()
    )
    if total != backing:
        report.violations.append(Violation(CONSERVATION, "aggregate", backing, total))
    return report


def oracle_required_delegation(state: LedgerState, account_id: str) -> int:
    """Naive recursive required delegation, for cross-checking the solvency module."""
    acct = state.accounts[account_id]
    if acct.sponsor is None:
        raise LedgerError(f"required delegation is undefined for seed {account_id!r}")
    shortfall = acct.principal - acct.earned
    for child in acct.out_delegations:
        shortfall += oracle_required_delegation(state, child)
    return max(0, shortfall)


def check_solvency(state: LedgerState) -> InvariantReport:
    """Every sponsor edge must carry at least the child's required delegation."""
    report = InvariantReport(checked=[SOLVENCY])
    for acct in state.accounts.values():
        for child_id, amount in acct.out_delegations.items():
            floor = oracle_required_delegation(state, child_id)
            if amount < floor:
                report.violations.append(
                    Violation(SOLVENCY, f"{acct.id}->{child_id}", floor, amount)
                )
    return report


def check_state(state: LedgerState) -> InvariantReport:
    """Conservation and solvency together; the standard post-event check."""
    return check_conservation(state).merge(check_solvency(state))


def over_delegated(state: LedgerState) -> list[str]:
    """Accounts whose budget no longer covers their outgoing delegations."""
    return sorted(
        account_id for account_id in state.accounts if _limit(state, account_id) < 0
    )


def _sponsor_path(state: LedgerState, account_id: str) -> list[str]:
    reverse = [account_id]
    seen = {account_id}
    sponsor = state.accounts[account_id].sponsor
    while sponsor is not None:
        if sponsor in seen or sponsor not in state.accounts:
            raise EngineFault(f"corrupted sponsor chain at {sponsor!r}")
        reverse.append(sponsor)
        seen.add(sponsor)
        sponsor = state.accounts[sponsor].sponsor
    reverse.reverse()
    return reverse


def check_default_transition(
    pre: LedgerState, post: LedgerState, loan_id: str
) -> InvariantReport:
    """Check that one default behaved as a local, loss-conserving write-off.

    Asserts: (a) accounts off the sponsor path are untouched, (b) path nodes
    other than the borrower keep their credit limit, (c) the borrower's limit
    falls by the principal, (d) aggregate credit falls by the principal,
    (e) no edge or base budget is negative afterwards.
    """
    loan_before = pre.loans.get(loan_id)
    loan_after = post.loans.get(loan_id)
    if loan_before is None or loan_after is None:
        raise ValueError(f"loan {loan_id!r} missing from the state pair")
    if loan_before.status != LOAN_ACTIVE or loan_after.status != LOAN_DEFAULTED:
        raise ValueError(f"state pair is not a single default of {loan_id!r}")
    if set(pre.accounts) != set(post.accounts):
        raise ValueError("account sets differ between the state pair")

    report = InvariantReport(checked=[DEFAULT_TRANSITION])
    borrower = loan_before.borrower
    principal = loan_before.principal
    path = _sponsor_path(pre, borrower)
    on_path = set(path)

    for account_id in pre.accounts:
        if account_id not in on_path and pre.accounts[account_id] != post.accounts[account_id]:
            report.violations.append(
                Violation(DEFAULT_TRANSITION, f"off-path:{account_id}", 0, 1)
            )
    for account_id in path:
        want = _limit(pre, account_id)
        if account_id == borrower:
            want -= principal
        got = _limit(post, account_id)
        if got != want:
            report.violations.append(
                Violation(DEFAULT_TRANSITION, f"limit:{account_id}", want, got)
            )
    total_before = sum(_limit(pre, account_id) for account_id in pre.accounts)
    total_after = sum(_limit(post, account_id) for account_id in post.accounts)
    if total_after != total_before - principal:
        report.violations.append(
            Violation(DEFAULT_TRANSITION, "aggregate", total_before - principal, total_after)
        )
    for acct in post.accounts.values():
        if acct.base_budget < 0:
            report.violations.append(
                Violation(DEFAULT_TRANSITION, f"base:{acct.id}", 0, acct.base_budget)
            )
        for child_id, amount in acct.out_delegations.items():
            if amount < 0:
                report.violations.append(
                    Violation(DEFAULT_TRANSITION, f"edge:{acct.id}->{child_id}", 0, amount)
                )
    return report


def oracle_locked_delegation(
    state: LedgerState, borrower: str, principal: int
) -> list[int]:
    """Locked delegation per path edge, derived as a required-delegation difference.

    Simulates the origination on a clone and measures how much each path
    child's required delegation rises; independent of the buffer formulas.
    """
    path = _sponsor_path(state, borrower)
    children = path[1:]
    before = [oracle_required_delegation(state, child) for child in children]
    sim = state.clone()
    sim.accounts[borrower].principal = principal
    after = [oracle_required_delegation(sim, child) for child in children]
    return [a - b for a, b in zip(after, before)]


def check_repay_then_default_bound(trace) -> InvariantReport:
    """Check a ladder trace against the repay-then-default profit bound.

    Every repay rung may add at most its protocol premium of later
    defaultable notional, so the attacker's incremental profit (final
    defaulted principal minus the capacity an immediate default would have
    yielded, minus protocol premiums paid) must be nonpositive.
    """
    report = InvariantReport(checked=[REPAY_DEFAULT_BOUND])
    premiums = 0
    for index, step in enumerate(trace.steps):
        premiums += step.protocol_premium
        if step.earned_award > step.protocol_premium:
            report.violations.append(
                Violation(
                    REPAY_DEFAULT_BOUND,
                    f"rung:{index}",
                    step.protocol_premium,
                    step.earned_award,
                )
            )
    recomputed = trace.final_principal - trace.initial_limit - premiums
    if recomputed != trace.attacker_pnl:
        report.violations.append(
            Violation(REPAY_DEFAULT_BOUND, "pnl-recompute", recomputed, trace.attacker_pnl)
        )
    if recomputed > 0:
        report.violations.append(
            Violation(REPAY_DEFAULT_BOUND, "profit", 0, recomputed)
        )
    return report
