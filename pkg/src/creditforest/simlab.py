"""Statistical and adversarial experiments run against the real ledger engine.

Every trial executes actual engine operations (no shadow models), so the
global conservation and solvency invariants hold throughout. Per-trial
randomness is a pure function of (rng_seed, trial index): re-running any
subset of trials, or fanning trials out across threads, reproduces the same
numbers exactly.
"""

from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import ledger
from .model import DEFAULT_CONFIG, EngineConfig, LedgerState
from .rates import PPM

OUTCOME_REPAID = "repaid"
OUTCOME_DEFAULTED = "defaulted"

_MASK64 = (1 << 64) - 1


def trial_uniform_u64(rng_seed: int, index: int) -> int:
    """Deterministic 64-bit mix of (seed, index); splitmix64 finalizer."""
    z = (rng_seed * 0x9E3779B97F4A7C15 + (index + 1) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True, slots=True)
class TrialResult:
    index: int
    outcome: str
    protocol_pnl: int
    attacker_pnl: int


@dataclass
class ExperimentSummary:
    """Aggregates of one experiment; exact integer sums so recomputation is exact."""

    name: str
    trials: int
    pnl_sum: int
    pnl_sumsq: int
    accepted: bool
    params: dict
    results: list[TrialResult] | None = None
    detail: dict = field(default_factory=dict)
    worst_trace: LadderTrace | None = None
    traces: list[LadderTrace] | None = None

    @property
    def mean_pnl(self) -> float:
        return self.pnl_sum / self.trials if self.trials else 0.0

    @property
    def std_pnl(self) -> float:
        """Sample standard deviation of per-trial P&L."""
        if self.trials < 2:
            return 0.0
        var = (self.pnl_sumsq - self.pnl_sum**2 / self.trials) / (self.trials - 1)
        return max(0.0, var) ** 0.5

    @property
    def stderr(self) -> float:
        return self.std_pnl / self.trials**0.5 if self.trials else 0.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "trials": self.trials,
            "pnl_sum": self.pnl_sum,
            "pnl_sumsq": self.pnl_sumsq,
            "mean_pnl": self.mean_pnl,
            "std_pnl": self.std_pnl,
            "stderr": self.stderr,
            "accepted": self.accepted,
            "params": dict(self.params),
            "detail": dict(self.detail),
        }


# ---------------------------------------------------------------------------
# Break-even Monte Carlo
# ---------------------------------------------------------------------------


def _mc_chunk(
    principal: int,
    term: int,
    default_prob_ppm: int,
    protocol_rate_ppm: int,
    start: int,
    stop: int,
    rng_seed: int,
    config: EngineConfig,
    force_outcome: str | None,
    keep_trials: bool,
):
    """Run trials [start, stop); each trial is a pure function of its index.

    Every trial gets its own fresh seed-plus-borrower ledger, so chunk
    boundaries (and hence thread counts) cannot leak state between trials.
    """
    threshold = (default_prob_ppm << 64) // PPM
    pnl_sum = 0
    pnl_sumsq = 0
    defaults = 0
    results: list[TrialResult] = []
    for index in range(start, stop):
        state = LedgerState()
        ledger.add_seed(state, "seed", 2 * principal)
        ledger.onboard(state, "seed", "borrower", principal)
        _, loan_id = ledger.borrow(
            state, "borrower", principal, term, default_prob_ppm,
            config=config, protocol_rate_ppm=protocol_rate_ppm,
        )
        quote = state.loans[loan_id].quote
        if force_outcome is None:
            defaulted = trial_uniform_u64(rng_seed, index) < threshold
        else:
            defaulted = force_outcome == OUTCOME_DEFAULTED
        if defaulted:
            ledger.default(state, loan_id)
            defaults += 1
            pnl = -principal
            attacker = principal
        else:
            ledger.repay(state, loan_id)
            pnl = quote.protocol_premium
            attacker = -(quote.protocol_premium + quote.delegation_premium)
        if state.protocol_cash != pnl:
            raise AssertionError("protocol cash drifted from the trial payoff")
        pnl_sum += pnl
        pnl_sumsq += pnl * pnl
        if keep_trials:
            results.append(
                TrialResult(
                    index=index,
                    outcome=OUTCOME_DEFAULTED if defaulted else OUTCOME_REPAID,
                    protocol_pnl=pnl,
                    attacker_pnl=attacker,
                )
            )
    return pnl_sum, pnl_sumsq, defaults, results


def mc_breakeven(
    principal: int,
    term: int,
    default_prob_ppm: int,
    protocol_rate_ppm: int,
    trials: int,
    rng_seed: int,
    workers: int = 1,
    config: EngineConfig = DEFAULT_CONFIG,
    force_outcome: str | None = None,
    keep_trials: bool = False,
) -> ExperimentSummary:
    """Originate and resolve ``trials`` independent loans at the given rate.

    Each trial defaults with the loan's stated probability; the protocol
    books the protocol premium on repayment and loses the principal on
    default. Acceptance: the mean protocol P&L sits within three standard
    errors of zero, which holds exactly when the rate prices the expected
    loss.
    """
    if trials < 1:
        raise ValueError("at least one trial required")
    bounds = [(trials * i) // workers for i in range(workers + 1)]
    spans = [(a, b) for a, b in zip(bounds, bounds[1:]) if a < b]

    def run(span):
        return _mc_chunk(
            principal, term, default_prob_ppm, protocol_rate_ppm,
            span[0], span[1], rng_seed, config, force_outcome, keep_trials,
        )

    if len(spans) > 1:
        with ThreadPoolExecutor(max_workers=len(spans)) as pool:
            chunks = list(pool.map(run, spans))
    else:
        chunks = [run(span) for span in spans]

    pnl_sum = sum(c[0] for c in chunks)
    pnl_sumsq = sum(c[1] for c in chunks)
    defaults = sum(c[2] for c in chunks)
    results = [r for c in chunks for r in c[3]] if keep_trials else None

    summary = ExperimentSummary(
        name="mc-breakeven",
        trials=trials,
        pnl_sum=pnl_sum,
        pnl_sumsq=pnl_sumsq,
        accepted=False,
        params={
            "principal": principal,
            "term": term,
            "default_prob_ppm": default_prob_ppm,
            "protocol_rate_ppm": protocol_rate_ppm,
            "rng_seed": rng_seed,
        },
        results=results,
        detail={"defaults": defaults},
    )
    summary.accepted = abs(summary.mean_pnl) <= 3.0 * summary.stderr
    return summary


# ---------------------------------------------------------------------------
# Sybil split futility
# ---------------------------------------------------------------------------


def sybil_split(
    state: LedgerState,
    account_id: str,
    pseudonym_count: int,
    rng_seed: int,
    total: int | None = None,
) -> ExperimentSummary:
    """Split one account's spare capacity across fresh pseudonyms.

    Works on a clone of the given state. Aggregate credit must be identical
    before and after, and the splitting account's own limit must fall by
    exactly the delegated total: pseudonyms reshuffle capacity, never mint it.
    """
    work = state.clone()
    before_total = ledger.total_credit(work)
    before_limit = ledger.credit_limit(work, account_id)
    if total is None:
        total = ledger.free_capacity(work, account_id)
    rng = random.Random(rng_seed)
    if pseudonym_count > 0:
        if total < pseudonym_count:
            raise ValueError(
                f"cannot split {total} into {pseudonym_count} positive parts"
            )
        cuts = sorted(rng.sample(range(1, total), pseudonym_count - 1))
        parts = [b - a for a, b in zip([0] + cuts, cuts + [total])]
        for i, part in enumerate(parts):
            ledger.onboard(work, account_id, f"sybil-{account_id}-{i}", part)
        delegated = total
    else:
        delegated = 0
    after_total = ledger.total_credit(work)
    after_limit = ledger.credit_limit(work, account_id)
    accepted = (after_total == before_total) and (
        before_limit - after_limit == delegated
    )
    return ExperimentSummary(
        name="sybil-split",
        trials=max(pseudonym_count, 1),
        pnl_sum=after_total - before_total,
        pnl_sumsq=(after_total - before_total) ** 2,
        accepted=accepted,
        params={
            "account": account_id,
            "pseudonyms": pseudonym_count,
            "total": delegated,
            "rng_seed": rng_seed,
        },
        detail={
            "total_before": before_total,
            "total_after": after_total,
            "limit_drop": before_limit - after_limit,
        },
    )


# ---------------------------------------------------------------------------
# Repay-then-default ladders
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class LadderStep:
    """One farm rung: borrow, pay premiums, repay, collect the earned award."""

    principal: int
    protocol_premium: int
    delegation_premium: int
    earned_award: int


@dataclass(frozen=True, slots=True)
class LadderTrace:
    """Full record of one ladder execution, enough to recompute its P&L.

    Attacker accounting is cash-only and coalition-worst-case: protocol
    premiums are a real cost, delegation premiums are assumed to flow back
    to the attacker's own sponsoring pseudonyms, and the payoff is the extra
    defaultable principal beyond what an immediate default would have taken.
    """

    initial_limit: int
    steps: tuple[LadderStep, ...]
    final_principal: int
    attacker_pnl: int


@dataclass(frozen=True)
class LadderParams:
    configs: int = 10_000
    max_rungs: int = 5
    max_initial: int = 1_000_000
    max_term: int = 8


def _run_ladder(
    capacity: int,
    rungs: int,
    term: int,
    default_prob_ppm: int,
    config: EngineConfig,
    rung_fraction_ppm: int,
    base_multiple: int,
) -> LadderTrace:
    state = LedgerState()
    ledger.add_seed(state, "seed", capacity * base_multiple)
    ledger.onboard(state, "seed", "attacker", capacity)
    steps = []
    premiums = 0
    for _ in range(rungs):
        limit = ledger.credit_limit(state, "attacker")
        amount = max(1, min(limit, (limit * rung_fraction_ppm) // PPM))
        _, loan_id = ledger.borrow(
            state, "attacker", amount, term, default_prob_ppm, config=config
        )
        quote = state.loans[loan_id].quote
        ledger.repay(state, loan_id)
        steps.append(
            LadderStep(
                principal=amount,
                protocol_premium=quote.protocol_premium,
                delegation_premium=quote.delegation_premium,
                earned_award=quote.earned_award,
            )
        )
        premiums += quote.protocol_premium
    final = ledger.credit_limit(state, "attacker")
    _, loan_id = ledger.borrow(
        state, "attacker", final, term, default_prob_ppm, config=config
    )
    ledger.default(state, loan_id)
    return LadderTrace(
        initial_limit=capacity,
        steps=tuple(steps),
        final_principal=final,
        attacker_pnl=final - capacity - premiums,
    )


def repay_default_ladder(
    params: LadderParams, rng_seed: int, keep_traces: bool = False
) -> ExperimentSummary:
    """Sweep randomized repay-then-default ladders and track the best attack.

    Every configuration borrows, repays to farm earned credit, re-borrows at
    the enlarged limit, and finally defaults. With the earned-award cap in
    force the maximum attacker P&L over the sweep must be nonpositive.
    """
    rng = random.Random(rng_seed)
    pnl_sum = 0
    pnl_sumsq = 0
    worst: LadderTrace | None = None
    traces: list[LadderTrace] = []
    for _ in range(params.configs):
        gamma_kind = rng.randrange(3)
        if gamma_kind == 0:
            gamma = None  # award the full cap
        elif gamma_kind == 1:
            gamma = 0
        else:
            gamma = rng.randint(1, 2 * PPM)
        trace = _run_ladder(
            capacity=rng.randint(10, params.max_initial),
            rungs=rng.randint(1, params.max_rungs),
            term=rng.randint(1, params.max_term),
            default_prob_ppm=rng.randint(1, PPM - 1),
            config=EngineConfig(rdmax_ppm=rng.randint(0, 200_000), gamma_ppm=gamma),
            rung_fraction_ppm=rng.randint(1, PPM),
            base_multiple=rng.randint(1, 4),
        )
        pnl_sum += trace.attacker_pnl
        pnl_sumsq += trace.attacker_pnl**2
        if worst is None or trace.attacker_pnl > worst.attacker_pnl:
            worst = trace
        if keep_traces:
            traces.append(trace)
    return ExperimentSummary(
        name="repay-default",
        trials=params.configs,
        pnl_sum=pnl_sum,
        pnl_sumsq=pnl_sumsq,
        accepted=worst is not None and worst.attacker_pnl <= 0,
        params={
            "configs": params.configs,
            "max_rungs": params.max_rungs,
            "max_initial": params.max_initial,
            "max_term": params.max_term,
            "rng_seed": rng_seed,
        },
        detail={
            "max_pnl": worst.attacker_pnl if worst else 0,
            "worst_rungs": len(worst.steps) if worst else 0,
            "worst_initial_limit": worst.initial_limit if worst else 0,
            "worst_final_principal": worst.final_principal if worst else 0,
        },
        worst_trace=worst,
        traces=traces if keep_traces else None,
    )
