from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for genforest imports

from creditforest.model import Account, LedgerState, Loan, PricingQuote

REPO_ROOT = Path(__file__).parent.parent
SCENARIO_DIR = REPO_ROOT / "scenarios"
CHAIN_DEFAULT = SCENARIO_DIR / "chain_default.jsonl"
BUFFERED_PATH = SCENARIO_DIR / "buffered_path.jsonl"


def plain_quote(premium: int = 0, award: int = 0) -> PricingQuote:
    """Minimal quote for fabricated loans where pricing is irrelevant."""
    return PricingQuote(
        protocol_rate_ppm=0,
        protocol_premium=premium,
        utilization_ppm=0,
        delegation_rate_ppm=0,
        locked=(),
        delegation_premium=0,
        earned_award=award,
    )


def active_loan(loan_id: str, borrower: str, principal: int, **quote_kwargs) -> Loan:
    return Loan(
        id=loan_id,
        borrower=borrower,
        principal=principal,
        term=1,
        default_prob_ppm=100_000,
        quote=plain_quote(**quote_kwargs),
    )


@pytest.fixture
def worked_chain() -> LedgerState:
    """Hand-built 3-node chain just before the worked default:

    s (base 100) --40--> u1 (earned 5) --20--> u2 (earned 3, principal 10).
    """
    state = LedgerState()
    state.accounts["s"] = Account(id="s", base_budget=100, out_delegations={"u1": 40})
    state.accounts["u1"] = Account(
        id="u1", sponsor="s", incoming=40, earned=5, out_delegations={"u2": 20}
    )
    state.accounts["u2"] = Account(id="u2", sponsor="u1", incoming=20, earned=3, principal=10)
    state.loans["loan-1"] = active_loan("loan-1", "u2", 10)
    return state
