from __future__ import annotations

import random

import pytest

from creditforest import ledger, solvency, verify
from creditforest.errors import EngineFault, LedgerError
from creditforest.model import Account, LedgerState

from conftest import active_loan
from genforest import grown_forest


def leaf_state(earned=0, principal=0):
    state = LedgerState()
    state.accounts["s"] = Account(id="s", base_budget=100, out_delegations={"v": 20})
    state.accounts["v"] = Account(
        id="v", sponsor="s", incoming=20, earned=earned, principal=principal
    )
    if principal:
        state.loans["loan-1"] = active_loan("loan-1", "v", principal)
    return state


class TestRequiredDelegation:
    def test_clean_leaf_is_zero(self):
        assert solvency.required_delegation(leaf_state(), "v") == 0

    def test_leaf_shortfall(self):
        assert solvency.required_delegation(leaf_state(earned=2, principal=5), "v") == 3

    def test_buffer_exceeding_obligations_floors_at_zero(self):
        state = LedgerState()
        state.accounts["s"] = Account(id="s", base_budget=100, out_delegations={"v": 30})
        state.accounts["v"] = Account(
            id="v", sponsor="s", incoming=30, earned=10, principal=4,
            out_delegations={"w1": 5, "w2": 5},
        )
        state.accounts["w1"] = Account(id="w1", sponsor="v", incoming=5, principal=1)
        state.accounts["w2"] = Account(id="w2", sponsor="v", incoming=5, principal=1)
        # children need 1 + 1 = 2; 4 + 2 - 10 < 0
        assert solvency.required_delegation(state, "v") == 0

    def test_undefined_for_seeds(self):
        with pytest.raises(LedgerError):
            solvency.required_delegation(leaf_state(), "s")

    def test_deep_chain_telescopes(self):
        # hand recursion bottom-up: 4, 5, 10, 8, 10
        state = LedgerState()
        state.accounts["s"] = Account(id="s", base_budget=200, out_delegations={"a": 50})
        chain = [
            ("a", "s", 3, 1),
            ("b", "a", 0, 2),
            ("c", "b", 5, 0),
            ("d", "c", 2, 1),
            ("e", "d", 4, 0),
        ]
        for i, (aid, sponsor, principal, earned) in enumerate(chain):
            child = chain[i + 1][0] if i + 1 < len(chain) else None
            state.accounts[aid] = Account(
                id=aid, sponsor=sponsor, incoming=50, earned=earned, principal=principal,
                out_delegations={child: 50} if child else {},
            )
            if principal:
                state.loans[f"loan-{aid}"] = active_loan(f"loan-{aid}", aid, principal)
        expected = {"e": 4, "d": 5, "c": 10, "b": 8, "a": 10}
        for aid, want in expected.items():
            assert solvency.required_delegation(state, aid) == want
            assert verify.oracle_required_delegation(state, aid) == want


class TestLocalBuffer:
    def test_pure_earned_slack(self):
        assert solvency.local_buffer(leaf_state(earned=4), "v") == 4

    def test_debt_eats_the_buffer(self):
        assert solvency.local_buffer(leaf_state(earned=2, principal=5), "v") == 0

    def test_complementarity(self):
        rng = random.Random(11)
        for _ in range(30):
            state = grown_forest(rng, events=30)
            for aid, acct in state.accounts.items():
                committed = acct.principal + sum(
                    solvency.required_delegation(state, w) for w in acct.out_delegations
                )
                shortfall = max(0, committed - acct.earned)
                assert solvency.local_buffer(state, aid) * shortfall == 0


class TestPathToSeed:
    def test_seed_is_a_single_node(self):
        path = solvency.path_to_seed(leaf_state(), "s")
        assert path.nodes == ("s",)
        assert path.edges == ()

    def test_depth_two_chain(self):
        state = LedgerState()
        ledger.add_seed(state, "s", 100)
        ledger.onboard(state, "s", "u1", 40)
        ledger.onboard(state, "u1", "u2", 20)
        path = solvency.path_to_seed(state, "u2")
        assert path.nodes == ("s", "u1", "u2")
        assert path.edges == (40, 20)

    def test_path_length_matches_independent_walk(self):
        rng = random.Random(13)
        for _ in range(20):
            state = grown_forest(rng, events=40)
            for aid in state.accounts:
                depth = 0
                cursor = aid
                while state.accounts[cursor].sponsor is not None:
                    cursor = state.accounts[cursor].sponsor
                    depth += 1
                path = solvency.path_to_seed(state, aid)
                assert len(path.nodes) == depth + 1
                assert path.nodes[-1] == aid
                assert state.accounts[path.nodes[0]].is_seed

    def test_cycle_is_a_fault(self):
        state = LedgerState()
        state.accounts["a"] = Account(id="a", sponsor="b", incoming=1)
        state.accounts["b"] = Account(id="b", sponsor="a", incoming=1)
        with pytest.raises(EngineFault):
            solvency.path_to_seed(state, "a")


class TestDownstreamBuffers:
    def buffered_path(self):
        # s -> u1 (earned 4) -> v (earned 4, child w owing 4)
        state = LedgerState()
        state.accounts["s"] = Account(id="s", base_budget=100, out_delegations={"u1": 30})
        state.accounts["u1"] = Account(
            id="u1", sponsor="s", incoming=30, earned=4, out_delegations={"v": 20}
        )
        state.accounts["v"] = Account(
            id="v", sponsor="u1", incoming=20, earned=4, out_delegations={"w": 4}
        )
        state.accounts["w"] = Account(id="w", sponsor="v", incoming=4, principal=4)
        state.loans["loan-1"] = active_loan("loan-1", "w", 4)
        return state

    def test_no_buffers_anywhere(self):
        state = LedgerState()
        ledger.add_seed(state, "s", 100)
        ledger.onboard(state, "s", "u1", 40)
        ledger.onboard(state, "u1", "u2", 20)
        path = solvency.path_to_seed(state, "u2")
        assert solvency.downstream_buffers(state, path) == [0, 0]

    def test_suffix_sums(self):
        state = self.buffered_path()
        path = solvency.path_to_seed(state, "v")
        assert solvency.downstream_buffers(state, path) == [4, 0]

    def test_single_edge_equals_leaf_buffer(self):
        state = leaf_state(earned=4)
        path = solvency.path_to_seed(state, "v")
        assert solvency.downstream_buffers(state, path) == [4]

    def test_suffix_monotone_on_random_forests(self):
        rng = random.Random(17)
        for _ in range(20):
            state = grown_forest(rng, events=40)
            for aid in state.accounts:
                path = solvency.path_to_seed(state, aid)
                buffers = solvency.downstream_buffers(state, path)
                assert all(a >= b for a, b in zip(buffers, buffers[1:]))

    def test_feasibility_report_agrees_with_reference_route(self):
        # check_feasibility computes buffers and floors in one pass; they must
        # match the per-node reference functions exactly
        rng = random.Random(59)
        for _ in range(20):
            state = grown_forest(rng, events=30)
            for aid, acct in state.accounts.items():
                if acct.is_seed:
                    continue
                path = solvency.path_to_seed(state, aid)
                report = solvency.check_feasibility(state, aid, 1)
                assert [e.buffer_below for e in report.per_edge] == (
                    solvency.downstream_buffers(state, path)
                )
                assert [e.required for e in report.per_edge] == [
                    solvency.required_delegation(state, child)
                    for child in path.nodes[1:]
                ]
                locked = solvency.locked_delegations(
                    path, solvency.downstream_buffers(state, path), 1
                )
                assert [e.locked for e in report.per_edge] == locked


class TestLockedDelegations:
    def test_buffer_example(self):
        path = solvency.PathView(nodes=("s", "u1", "v"), edges=(30, 20))
        assert solvency.locked_delegations(path, [4, 0], 10) == [6, 10]

    def test_saturated_buffers_lock_nothing(self):
        path = solvency.PathView(nodes=("s", "u1", "v"), edges=(30, 20))
        assert solvency.locked_delegations(path, [12, 10], 10) == [0, 0]

    def test_no_buffers_lock_full_principal(self):
        path = solvency.PathView(nodes=("s", "u1", "v"), edges=(30, 20))
        assert solvency.locked_delegations(path, [0, 0], 10) == [10, 10]


class TestCheckFeasibility:
    def test_boundary_full_edge(self):
        state = LedgerState()
        ledger.add_seed(state, "s", 100)
        ledger.onboard(state, "s", "v", 50)
        report = solvency.check_feasibility(state, "v", 50)
        assert report.feasible
        assert report.per_edge[0].locked == 50
        assert report.per_edge[0].slack == 50

    def test_existing_required_delegation_shrinks_slack(self):
        # Edge of 10 into u, whose own child owes 4: gross edge admits 7,
        # but slack is only 6, and admitting 7 would break solvency.
        state = LedgerState()
        state.accounts["s"] = Account(id="s", base_budget=100, out_delegations={"u": 10})
        state.accounts["u"] = Account(
            id="u", sponsor="s", incoming=10, out_delegations={"w": 4}
        )
        state.accounts["w"] = Account(id="w", sponsor="u", incoming=4, principal=4)
        state.loans["loan-1"] = active_loan("loan-1", "w", 4)
        report = solvency.check_feasibility(state, "u", 7)
        edge = report.per_edge[0]
        assert edge.locked == 7 <= edge.delegated  # the gross-edge test would pass
        assert edge.slack == 6
        assert report.first_violation == 0
        assert not report.feasible
        # force the origination on a clone: the edge now sits below the new floor
        sim = state.clone()
        sim.accounts["u"].principal = 7
        assert verify.oracle_required_delegation(sim, "u") == 11 > 10

    def test_seed_borrower_has_empty_path(self):
        state = LedgerState()
        ledger.add_seed(state, "s", 100)
        report = solvency.check_feasibility(state, "s", 80)
        assert report.feasible
        assert report.per_edge == ()
        assert not solvency.check_feasibility(state, "s", 101).feasible


class TestLockedEquivalence:
    def test_matches_required_delegation_difference(self):
        rng = random.Random(19)
        checked = 0
        while checked < 300:
            state = grown_forest(rng, events=35)
            candidates = [
                aid for aid, acct in state.accounts.items()
                if acct.principal == 0 and ledger.credit_limit(state, aid) >= 1
                and not acct.is_seed
            ]
            if not candidates:
                continue
            borrower = rng.choice(candidates)
            principal = rng.randint(1, ledger.credit_limit(state, borrower))
            report = solvency.check_feasibility(state, borrower, principal)
            if not report.feasible:
                continue
            path = solvency.path_to_seed(state, borrower)
            buffers = solvency.downstream_buffers(state, path)
            locked = solvency.locked_delegations(path, buffers, principal)
            assert locked == verify.oracle_locked_delegation(state, borrower, principal)
            checked += 1

    def test_post_origination_floors_rise_by_locked_amounts(self):
        rng = random.Random(23)
        admitted = 0
        while admitted < 150:
            state = grown_forest(rng, events=35)
            candidates = [
                aid for aid, acct in state.accounts.items()
                if acct.principal == 0 and ledger.credit_limit(state, aid) >= 1
            ]
            if not candidates:
                continue
            borrower = rng.choice(candidates)
            principal = rng.randint(1, ledger.credit_limit(state, borrower))
            report = solvency.check_feasibility(state, borrower, principal)
            if not report.feasible:
                continue
            path = solvency.path_to_seed(state, borrower)
            before = [
                verify.oracle_required_delegation(state, child) for child in path.nodes[1:]
            ]
            state, _ = ledger.borrow(state, borrower, principal, 1, 100_000)
            after = [
                verify.oracle_required_delegation(state, child) for child in path.nodes[1:]
            ]
            assert [b - a for b, a in zip(after, before)] == [
                e.locked for e in report.per_edge
            ]
            assert verify.check_solvency(state).ok
            admitted += 1
