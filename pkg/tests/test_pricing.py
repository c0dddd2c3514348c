from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from creditforest import ledger, pricing
from creditforest.errors import PricingInputError
from creditforest.model import Account, EngineConfig, LedgerState
from creditforest.rates import PPM


class TestBreakEvenRate:
    def test_even_odds_one_period(self):
        assert pricing.break_even_rate(500_000, 1) == 1_000_000

    def test_ten_percent(self):
        assert pricing.break_even_rate(100_000, 1) == 111_111

    def test_spread_over_two_periods(self):
        assert pricing.break_even_rate(200_000, 2) == 125_000

    def test_exact_form_agrees(self):
        exact = pricing.break_even_rate_exact(333_333, 1)
        assert exact == Fraction(333_333 * PPM, 666_667)
        assert pricing.break_even_rate(333_333, 1) == round(exact) == 499_999

    def test_bounds(self):
        for bad in (0, PPM, PPM + 1, -5):
            with pytest.raises(PricingInputError):
                pricing.break_even_rate(bad, 1)
        with pytest.raises(PricingInputError):
            pricing.break_even_rate(100_000, 0)

    @given(
        st.integers(min_value=1, max_value=PPM - 1),
        st.integers(min_value=1, max_value=12),
        st.integers(min_value=1, max_value=10**7),
    )
    def test_breakeven_identity_within_rounding(self, d_ppm, term, principal):
        """(1 - D) * premium - D * L vanishes at rational precision; ppm and
        minor-unit rounding each contribute at most half a step."""
        rate = pricing.break_even_rate(d_ppm, term)
        premium = pricing.protocol_premium(principal, term, rate)
        d = Fraction(d_ppm, PPM)
        exact_premium = principal * d / (1 - d)
        residual = abs((1 - d) * premium - d * principal)
        bound = (1 - d) * (Fraction(principal * term, 2 * PPM) + Fraction(1, 2))
        assert residual <= bound
        assert (1 - d) * exact_premium - d * principal == 0


class TestProtocolPremium:
    def test_direct(self):
        assert pricing.protocol_premium(1000, 1, 100_000) == 100

    def test_zero_rate(self):
        assert pricing.protocol_premium(1000, 1, 0) == 0

    def test_rounds_up_near_integer(self):
        # 111111 ppm on 900 over one period is 99.9999
        assert pricing.protocol_premium(900, 1, 111_111) == 100


class TestSeedUtilization:
    def seeds(self, *pairs):
        state = LedgerState()
        for i, (base, out) in enumerate(pairs):
            children = {}
            if out:
                children[f"c{i}"] = out
            state.accounts[f"s{i}"] = Account(
                id=f"s{i}", base_budget=base, out_delegations=children
            )
            if out:
                state.accounts[f"c{i}"] = Account(id=f"c{i}", sponsor=f"s{i}", incoming=out)
        return state

    def test_no_delegations(self):
        assert pricing.seed_utilization(self.seeds((100, 0))) == 0

    def test_fully_delegated(self):
        assert pricing.seed_utilization(self.seeds((100, 100), (40, 40))) == PPM

    def test_weighted_mix(self):
        assert pricing.seed_utilization(self.seeds((100, 40), (100, 10))) == 250_000

    def test_zero_budget_rejected(self):
        with pytest.raises(PricingInputError):
            pricing.seed_utilization(LedgerState())


class TestDelegationRate:
    def test_endpoints(self):
        assert pricing.delegation_rate(0, 80_000) == 80_000
        assert pricing.delegation_rate(PPM, 80_000) == 0

    def test_linear_point(self):
        assert pricing.delegation_rate(250_000, 80_000) == 60_000

    @given(
        st.integers(min_value=0, max_value=PPM),
        st.integers(min_value=0, max_value=PPM),
        st.integers(min_value=0, max_value=500_000),
    )
    def test_nonincreasing_in_utilization(self, u1, u2, rdmax):
        lo, hi = sorted((u1, u2))
        assert pricing.delegation_rate(lo, rdmax) >= pricing.delegation_rate(hi, rdmax)


class TestSponsorPayouts:
    def test_rounded_per_edge_and_balanced(self):
        payouts = pricing.sponsor_payouts([("s", 600), ("u1", 1000)], 60_000, 1)
        assert payouts == [("s", 36), ("u1", 60)]
        # the delegation premium is defined as this sum, so balance is exact
        assert sum(p for _, p in payouts) == 96

    def test_zero_locked_zero_payout(self):
        assert pricing.sponsor_payouts([("s", 0), ("u", 0)], 60_000, 4) == [
            ("s", 0), ("u", 0),
        ]

    def test_single_edge(self):
        payouts = pricing.sponsor_payouts([("s", 100)], 50_000, 2)
        assert payouts == [("s", 10)]

    @given(
        st.lists(st.integers(min_value=0, max_value=10**7), min_size=0, max_size=6),
        st.integers(min_value=0, max_value=200_000),
        st.integers(min_value=1, max_value=8),
    )
    def test_each_payout_is_exact_rounding(self, amounts, rate, term):
        locked = [(f"n{i}", m) for i, m in enumerate(amounts)]
        payouts = pricing.sponsor_payouts(locked, rate, term)
        for (_, m), (_, p) in zip(locked, payouts):
            assert p == round(Fraction(m * rate * term, PPM))


class TestEarnedCreditAward:
    def test_cap_binds_for_large_factor(self):
        assert pricing.earned_credit_award(1000, 1, 100, 10 * PPM) == 100

    def test_zero_factor(self):
        assert pricing.earned_credit_award(1000, 1, 100, 0) == 0

    def test_half_premium(self):
        assert pricing.earned_credit_award(1000, 1, 100, 50_000) == 50

    def test_default_policy_awards_the_cap(self):
        assert pricing.earned_credit_award(1000, 1, 100, None) == 100


class TestQuoteLoan:
    def test_quote_leaves_state_unchanged(self):
        state = LedgerState()
        ledger.add_seed(state, "s", 100)
        ledger.onboard(state, "s", "v", 60)
        snapshot = state.clone()
        quote = pricing.quote_loan(state, "v", 30, 2, 150_000)
        assert state == snapshot
        assert quote.delegation_premium == sum(e.payout for e in quote.locked)
        assert quote.earned_award <= quote.protocol_premium

    def test_seed_borrower_pays_no_delegation_premium(self):
        state = LedgerState()
        ledger.add_seed(state, "s", 100)
        quote = pricing.quote_loan(state, "s", 50, 1, 100_000)
        assert quote.locked == ()
        assert quote.delegation_premium == 0

    def test_rate_override(self):
        state = LedgerState()
        ledger.add_seed(state, "s", 100)
        quote = pricing.quote_loan(state, "s", 50, 1, 100_000, protocol_rate_ppm=200_000)
        assert quote.protocol_rate_ppm == 200_000
        assert quote.protocol_premium == 10

    def test_gamma_config_flows_into_award(self):
        state = LedgerState()
        ledger.add_seed(state, "s", 1000)
        config = EngineConfig(gamma_ppm=0)
        quote = pricing.quote_loan(state, "s", 500, 1, 100_000, config=config)
        assert quote.earned_award == 0
