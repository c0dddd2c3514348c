"""Scenario files, deterministic replay, and snapshot import/export.

A scenario is UTF-8 text with one JSON object per line (blank lines are
skipped). Every object carries an ``op`` plus op-specific integer amounts in
minor units and ppm integers for probabilities:

    {"op": "ADD_SEED", "id": "s", "amount": 100}
    {"op": "ONBOARD", "sponsor": "s", "id": "u1", "amount": 40}
    {"op": "DELEGATE", "from": "s", "to": "u1", "amount": 10}
    {"op": "REVOKE", "from": "s", "to": "u1", "new_amount": 3}
    {"op": "BORROW", "id": "u1", "amount": 10, "term": 1, "default_prob_ppm": 333333}
    {"op": "REPAY", "loan": "loan-1"}
    {"op": "DEFAULT", "loan": "loan-1"}
    {"op": "ASSERT_LIMIT", "id": "s", "expected": 60}
    {"op": "ASSERT_TOTAL", "expected": 98}
    {"op": "ASSERT_SOLVENT"}

Loan ids are assigned by the engine as ``loan-1``, ``loan-2``, ... in
origination order, so scripts can reference them. Replay applies events
strictly in file order, runs conservation and solvency checks after every
mutating event, and aborts on the first failure; identical input bytes
always produce identical final states and identical exported snapshots.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Iterable

from . import ledger, verify
from .errors import EngineFault, LedgerError
from .model import (
    LOAN_ACTIVE,
    Account,
    EngineConfig,
    DEFAULT_CONFIG,
    LedgerState,
    Loan,
    LockedEdge,
    PricingQuote,
)

SCHEMA_MAJOR = 1
SCHEMA_VERSION = f"{SCHEMA_MAJOR}.0"

_EVENT_FIELDS = {
    "ADD_SEED": (("id", str), ("amount", int)),
    "ONBOARD": (("sponsor", str), ("id", str), ("amount", int)),
    "DELEGATE": (("from", str), ("to", str), ("amount", int)),
    "REVOKE": (("from", str), ("to", str), ("new_amount", int)),
    "BORROW": (("id", str), ("amount", int), ("term", int), ("default_prob_ppm", int)),
    "REPAY": (("loan", str),),
    "DEFAULT": (("loan", str),),
    "ASSERT_LIMIT": (("id", str), ("expected", int)),
    "ASSERT_TOTAL": (("expected", int),),
    "ASSERT_SOLVENT": (),
}

MUTATING_OPS = frozenset(
    ["ADD_SEED", "ONBOARD", "DELEGATE", "REVOKE", "BORROW", "REPAY", "DEFAULT"]
)


class ScenarioParseError(Exception):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SnapshotError(Exception):
    """Snapshot document rejected: bad version, schema, or forest integrity."""


class ReplayError(Exception):
    def __init__(self, index: int, line: int, reason: str):
        super().__init__(f"event {index} (line {line}): {reason}")
        self.index = index
        self.line = line
        self.reason = reason


@dataclass(frozen=True)
class ScenarioEvent:
    """One parsed scenario line; only the fields its op uses are set."""

    op: str
    line: int
    id: str | None = None
    sponsor: str | None = None
    from_: str | None = None
    to: str | None = None
    amount: int | None = None
    new_amount: int | None = None
    term: int | None = None
    default_prob_ppm: int | None = None
    loan: str | None = None
    expected: int | None = None


@dataclass(frozen=True)
class EventRecord:
    """Replay log entry: what one event did and the aggregate credit after it."""

    index: int
    line: int
    op: str
    detail: str
    total_credit: int


def _reject_float(text: str):
    raise ValueError(f"non-integer number {text}")


def parse_scenario(stream: Iterable[str] | str) -> list[ScenarioEvent]:
    """Parse scenario text into events, reporting the line of any defect."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    events = []
    for line_no, raw in enumerate(stream, start=1):
        text = raw.strip()
        if not text:
            continue
        try:
            record = json.loads(text, parse_float=_reject_float)
        except ValueError as exc:
            raise ScenarioParseError(line_no, f"bad record: {exc}") from None
        if not isinstance(record, dict):
            raise ScenarioParseError(line_no, "record must be an object")
        op = record.pop("op", None)
        if op is None:
            raise ScenarioParseError(line_no, "missing field 'op'")
        if op not in _EVENT_FIELDS:
            raise ScenarioParseError(line_no, f"unknown op {op!r}")
        kwargs = {}
        for name, kind in _EVENT_FIELDS[op]:
            if name not in record:
                raise ScenarioParseError(line_no, f"{op} is missing field {name!r}")
            value = record.pop(name)
            if not isinstance(value, kind) or isinstance(value, bool):
                raise ScenarioParseError(
                    line_no, f"field {name!r} must be {kind.__name__}, got {value!r}"
                )
            kwargs["from_" if name == "from" else name] = value
        if record:
            unexpected = ", ".join(sorted(record))
            raise ScenarioParseError(line_no, f"unexpected fields for {op}: {unexpected}")
        events.append(ScenarioEvent(op=op, line=line_no, **kwargs))
    return events


def _apply(state: LedgerState, event: ScenarioEvent, config: EngineConfig) -> str:
    if event.op == "ADD_SEED":
        ledger.add_seed(state, event.id, event.amount)
        return f"seed {event.id} base {event.amount}"
    if event.op == "ONBOARD":
        ledger.onboard(state, event.sponsor, event.id, event.amount)
        return f"{event.sponsor}->{event.id} {event.amount}"
    if event.op == "DELEGATE":
        ledger.adjust_delegation(state, event.from_, event.to, event.amount)
        return f"{event.from_}->{event.to} +{event.amount}"
    if event.op == "REVOKE":
        ledger.revoke(state, event.from_, event.to, event.new_amount)
        return f"{event.from_}->{event.to} ={event.new_amount}"
    if event.op == "BORROW":
        _, loan_id = ledger.borrow(
            state, event.id, event.amount, event.term, event.default_prob_ppm,
            config=config,
        )
        return f"{loan_id} to {event.id} for {event.amount}"
    if event.op == "REPAY":
        ledger.repay(state, event.loan)
        return event.loan
    if event.op == "DEFAULT":
        ledger.default(state, event.loan)
        return event.loan
    raise EngineFault(f"unhandled op {event.op!r}")


def _check_assert(state: LedgerState, event: ScenarioEvent) -> str:
    if event.op == "ASSERT_LIMIT":
        actual = ledger.credit_limit(state, event.id)
        if actual != event.expected:
            raise LedgerError(
                f"credit limit of {event.id!r} is {actual}, expected {event.expected}"
            )
        return f"{event.id} limit {actual}"
    if event.op == "ASSERT_TOTAL":
        actual = ledger.total_credit(state)
        if actual != event.expected:
            raise LedgerError(f"total credit is {actual}, expected {event.expected}")
        return f"total {actual}"
    if event.op == "ASSERT_SOLVENT":
        failures = verify.check_solvency(state).violations
        if failures:
            raise LedgerError(f"{len(failures)} insolvent edge(s)")
        return "solvent"
    raise EngineFault(f"unhandled assert {event.op!r}")


def replay(
    events: list[ScenarioEvent], config: EngineConfig = DEFAULT_CONFIG
) -> tuple[LedgerState, verify.InvariantReport, list[EventRecord]]:
    """Apply events in order, checking invariants after every mutation.

    Returns the final state, the final invariant report, and the event log.
    The first failing event aborts with a ``ReplayError`` carrying its index.
    """
    state = LedgerState()
    log: list[EventRecord] = []
    for index, event in enumerate(events):
        try:
            if event.op in MUTATING_OPS:
                detail = _apply(state, event, config)
                check = verify.check_state(state)
                if not check.ok:
                    first = check.violations[0]
                    raise LedgerError(
                        f"invariant {first.invariant} violated at {first.locus}"
                    )
            else:
                detail = _check_assert(state, event)
        except LedgerError as exc:
            raise ReplayError(index, event.line, str(exc)) from exc
        log.append(
            EventRecord(
                index=index,
                line=event.line,
                op=event.op,
                detail=detail,
                total_credit=ledger.total_credit(state),
            )
        )
    return state, verify.check_state(state), log


def replay_file(
    path, config: EngineConfig = DEFAULT_CONFIG
) -> tuple[LedgerState, verify.InvariantReport, list[EventRecord]]:
    with open(path, encoding="utf-8") as handle:
        events = parse_scenario(handle)
    return replay(events, config)


# ---------------------------------------------------------------------------
# Snapshot export / import
# ---------------------------------------------------------------------------


def export_state(state: LedgerState) -> dict:
    """Plain-data snapshot of the full state; inverse of ``import_state``."""
    return {
        "schema_version": SCHEMA_VERSION,
        "event_counter": state.event_counter,
        "protocol_cash": state.protocol_cash,
        "accounts": {
            acct.id: {
                "sponsor": acct.sponsor,
                "base_budget": acct.base_budget,
                "incoming": acct.incoming,
                "earned": acct.earned,
                "principal": acct.principal,
                "cash": acct.cash,
                "out_delegations": dict(sorted(acct.out_delegations.items())),
            }
            for acct in state.accounts.values()
        },
        "loans": {
            loan.id: {
                "borrower": loan.borrower,
                "principal": loan.principal,
                "term": loan.term,
                "default_prob_ppm": loan.default_prob_ppm,
                "status": loan.status,
                "quote": {
                    "protocol_rate_ppm": loan.quote.protocol_rate_ppm,
                    "protocol_premium": loan.quote.protocol_premium,
                    "utilization_ppm": loan.quote.utilization_ppm,
                    "delegation_rate_ppm": loan.quote.delegation_rate_ppm,
                    "delegation_premium": loan.quote.delegation_premium,
                    "earned_award": loan.quote.earned_award,
                    "locked": [
                        {"sponsor": e.sponsor, "locked": e.locked, "payout": e.payout}
                        for e in loan.quote.locked
                    ],
                },
            }
            for loan in state.loans.values()
        },
    }


def dumps_snapshot(state: LedgerState) -> str:
    """Deterministic single-object serialization; byte-identical for equal states."""
    return json.dumps(export_state(state), sort_keys=True, separators=(",", ":")) + "\n"


def _need(mapping: dict, key: str, kind, where: str):
    if key not in mapping:
        raise SnapshotError(f"{where}: missing field {key!r}")
    value = mapping[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise SnapshotError(f"{where}: field {key!r} must be {kind.__name__}")
    return value


def _unsigned(mapping: dict, key: str, where: str) -> int:
    value = _need(mapping, key, int, where)
    if value < 0:
        raise SnapshotError(f"{where}: field {key!r} must be nonnegative")
    return value


def import_state(document: dict) -> LedgerState:
    """Rebuild a state from a snapshot document, validating forest integrity."""
    if not isinstance(document, dict):
        raise SnapshotError("snapshot must be an object")
    version = document.get("schema_version")
    if not isinstance(version, str) or "." not in version:
        raise SnapshotError(f"bad schema_version {version!r}")
    major = version.split(".", 1)[0]
    if not major.isdigit() or int(major) != SCHEMA_MAJOR:
        raise SnapshotError(f"unsupported schema major version {version!r}")

    state = LedgerState(
        event_counter=_unsigned(document, "event_counter", "snapshot"),
        protocol_cash=_need(document, "protocol_cash", int, "snapshot"),
    )
    accounts = _need(document, "accounts", dict, "snapshot")
    for account_id, body in accounts.items():
        where = f"account {account_id!r}"
        if not isinstance(body, dict):
            raise SnapshotError(f"{where}: must be an object")
        sponsor = body.get("sponsor")
        if sponsor is not None and not isinstance(sponsor, str):
            raise SnapshotError(f"{where}: sponsor must be a string or null")
        out = _need(body, "out_delegations", dict, where)
        edges = {}
        for child, amount in out.items():
            if not isinstance(amount, int) or isinstance(amount, bool) or amount < 0:
                raise SnapshotError(f"{where}: edge to {child!r} must be a nonnegative int")
            edges[child] = amount
        state.accounts[account_id] = Account(
            id=account_id,
            sponsor=sponsor,
            base_budget=_unsigned(body, "base_budget", where),
            incoming=_unsigned(body, "incoming", where),
            earned=_unsigned(body, "earned", where),
            principal=_unsigned(body, "principal", where),
            cash=_need(body, "cash", int, where),
            out_delegations=edges,
        )

    for acct in state.accounts.values():
        where = f"account {acct.id!r}"
        if acct.sponsor is None:
            if acct.incoming != 0:
                raise SnapshotError(f"{where}: seed cannot have incoming delegation")
        else:
            if acct.base_budget != 0:
                raise SnapshotError(f"{where}: non-seed cannot have base budget")
            sponsor = state.accounts.get(acct.sponsor)
            if sponsor is None:
                raise SnapshotError(f"{where}: unknown sponsor {acct.sponsor!r}")
            if sponsor.out_delegations.get(acct.id) != acct.incoming:
                raise SnapshotError(
                    f"{where}: incoming {acct.incoming} does not mirror sponsor edge"
                )
        for child in acct.out_delegations:
            child_acct = state.accounts.get(child)
            if child_acct is None or child_acct.sponsor != acct.id:
                raise SnapshotError(f"{where}: edge to {child!r} without sponsorship")

    for account_id in state.accounts:
        hops = 0
        cursor = account_id
        while state.accounts[cursor].sponsor is not None:
            cursor = state.accounts[cursor].sponsor
            hops += 1
            if hops > len(state.accounts):
                raise SnapshotError(f"sponsor cycle through {account_id!r}")

    loans = _need(document, "loans", dict, "snapshot")
    active_borrowers = set()
    for loan_id, body in loans.items():
        where = f"loan {loan_id!r}"
        if not isinstance(body, dict):
            raise SnapshotError(f"{where}: must be an object")
        borrower = _need(body, "borrower", str, where)
        if borrower not in state.accounts:
            raise SnapshotError(f"{where}: unknown borrower {borrower!r}")
        status = _need(body, "status", str, where)
        if status not in ("active", "repaid", "defaulted"):
            raise SnapshotError(f"{where}: bad status {status!r}")
        quote_body = _need(body, "quote", dict, where)
        locked = []
        for entry in _need(quote_body, "locked", list, where):
            if not isinstance(entry, dict):
                raise SnapshotError(f"{where}: locked entries must be objects")
            locked.append(
                LockedEdge(
                    sponsor=_need(entry, "sponsor", str, where),
                    locked=_unsigned(entry, "locked", where),
                    payout=_unsigned(entry, "payout", where),
                )
            )
        quote = PricingQuote(
            protocol_rate_ppm=_unsigned(quote_body, "protocol_rate_ppm", where),
            protocol_premium=_unsigned(quote_body, "protocol_premium", where),
            utilization_ppm=_unsigned(quote_body, "utilization_ppm", where),
            delegation_rate_ppm=_unsigned(quote_body, "delegation_rate_ppm", where),
            locked=tuple(locked),
            delegation_premium=_unsigned(quote_body, "delegation_premium", where),
            earned_award=_unsigned(quote_body, "earned_award", where),
        )
        if quote.delegation_premium != sum(edge.payout for edge in quote.locked):
            raise SnapshotError(f"{where}: delegation premium does not match payouts")
        if quote.earned_award > quote.protocol_premium:
            raise SnapshotError(f"{where}: earned award above the premium cap")
        principal = _unsigned(body, "principal", where)
        if principal <= 0:
            raise SnapshotError(f"{where}: principal must be positive")
        loan = Loan(
            id=loan_id,
            borrower=borrower,
            principal=principal,
            term=_unsigned(body, "term", where),
            default_prob_ppm=_unsigned(body, "default_prob_ppm", where),
            quote=quote,
            status=status,
        )
        if loan.status == LOAN_ACTIVE:
            if borrower in active_borrowers:
                raise SnapshotError(f"{where}: borrower {borrower!r} has two active loans")
            active_borrowers.add(borrower)
            if state.accounts[borrower].principal != loan.principal:
                raise SnapshotError(
                    f"{where}: active principal does not match borrower principal"
                )
        state.loans[loan_id] = loan

    for acct in state.accounts.values():
        if acct.principal > 0 and acct.id not in active_borrowers:
            raise SnapshotError(
                f"account {acct.id!r} carries principal without an active loan"
            )
    return state


def loads_snapshot(text: str) -> LedgerState:
    try:
        document = json.loads(text)
    except ValueError as exc:
        raise SnapshotError(f"snapshot is not valid JSON: {exc}") from None
    return import_state(document)
