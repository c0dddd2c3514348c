"""Pure solvency arithmetic over a ledger snapshot.

Everything here is derived from four quantities per account (principal,
earned credit, outgoing delegations, sponsor edge) and is safe to call
concurrently on shared snapshots:

* required delegation: the minimum that must remain on an account's sponsor
  edge for its whole subtree to stay solvent,
* local and downstream buffers: earned-credit slack that can absorb new
  downstream principal,
* locked delegation and loan-path feasibility for a proposed principal.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import EngineFault, LedgerError
from .model import LedgerState, credit_limit


@dataclass(frozen=True, slots=True)
class PathView:
    """Unique sponsor path from a seed down to a target account."""

    nodes: tuple[str, ...]  # nodes[0] is the seed
    edges: tuple[int, ...]  # edges[k] delegates nodes[k] -> nodes[k + 1]


@dataclass(frozen=True, slots=True)
class EdgeCheck:
    """Feasibility numbers for one sponsor-path edge."""

    index: int
    sponsor: str
    child: str
    delegated: int  # current edge amount
    required: int  # child's required delegation before the loan
    buffer_below: int  # downstream buffer under this edge
    locked: int  # delegation the proposed loan would lock here
    slack: int  # delegated - required


@dataclass(frozen=True, slots=True)
class FeasibilityReport:
    """Outcome of a loan-path feasibility check; infeasibility is data, not an error."""

    borrower: str
    principal: int
    credit_limit: int
    within_limit: bool
    per_edge: tuple[EdgeCheck, ...]
    first_violation: int | None

    @property
    def feasible(self) -> bool:
        return self.within_limit and self.first_violation is None


def _required_map(state: LedgerState, root: str) -> dict[str, int]:
    """Required delegation for every account in root's subtree, one bottom-up pass."""
    order = [root]
    cursor = 0
    while cursor < len(order):
        order.extend(state.accounts[order[cursor]].out_delegations)
        cursor += 1
    needed: dict[str, int] = {}
    for node_id in reversed(order):
        node = state.accounts[node_id]
        shortfall = (
            node.principal
            + sum(needed[child] for child in node.out_delegations)
            - node.earned
        )
        needed[node_id] = shortfall if shortfall > 0 else 0
    return needed


def required_delegation(state: LedgerState, account_id: str) -> int:
    """Minimum delegation that must remain on the sponsor edge into this account.

    Bottom-up over the subtree: own principal plus the children's required
    delegations, net of own earned credit, floored at zero. Undefined for
    seeds, which have no sponsor edge.
    """
    acct = state.require(account_id)
    if acct.is_seed:
        raise LedgerError(f"required delegation is undefined for seed {account_id!r}")
    return _required_map(state, account_id)[account_id]


def local_buffer(state: LedgerState, account_id: str) -> int:
    """Earned-credit slack after covering own principal and children's floors."""
    acct = state.require(account_id)
    committed = acct.principal + sum(
        required_delegation(state, child) for child in acct.out_delegations
    )
    slack = acct.earned - committed
    return slack if slack > 0 else 0


def path_to_seed(state: LedgerState, account_id: str) -> PathView:
    """Walk sponsor links up to the root seed; a corrupted forest is a fault."""
    state.require(account_id)
    reverse = [account_id]
    seen = {account_id}
    current = account_id
    while True:
        sponsor = state.accounts[current].sponsor
        if sponsor is None:
            break
        if sponsor in seen:
            raise EngineFault(f"sponsor cycle through {sponsor!r}")
        if sponsor not in state.accounts:
            raise EngineFault(f"account {current!r} names missing sponsor {sponsor!r}")
        reverse.append(sponsor)
        seen.add(sponsor)
        current = sponsor
    nodes = tuple(reversed(reverse))
    edges = []
    for parent, child in zip(nodes, nodes[1:]):
        edge = state.accounts[parent].out_delegations.get(child)
        if edge is None:
            raise EngineFault(f"missing delegation edge {parent!r}->{child!r}")
        edges.append(edge)
    return PathView(nodes=nodes, edges=tuple(edges))


def downstream_buffers(state: LedgerState, path: PathView) -> list[int]:
    """Suffix sums of local buffers strictly below each path edge."""
    node_buffers = [local_buffer(state, node) for node in path.nodes[1:]]
    totals = []
    running = 0
    for value in reversed(node_buffers):
        running += value
        totals.append(running)
    totals.reverse()
    for earlier, later in zip(totals, totals[1:]):
        if earlier < later:  # suffix sums of nonnegative terms cannot increase
            raise EngineFault("downstream buffers not nonincreasing")
    return totals


def locked_delegations(path: PathView, buffers: list[int], principal: int) -> list[int]:
    """Per-edge delegation a loan locks: the principal left over after buffers."""
    if len(buffers) != len(path.edges):
        raise ValueError("one buffer per path edge required")
    return [max(0, principal - below) for below in buffers]


def check_feasibility(state: LedgerState, borrower: str, principal: int) -> FeasibilityReport:
    """Check a proposed principal against the borrower's limit and sponsor path.

    Each edge must carry the locked amount on top of the child's existing
    required delegation, so origination can never push an edge below its
    solvency floor. A seed borrower has an empty path and only the credit
    limit applies.
    """
    limit = credit_limit(state, borrower)
    path = path_to_seed(state, borrower)
    required = _required_map(state, path.nodes[0])
    node_buffers = []
    for node_id in path.nodes[1:]:
        node = state.accounts[node_id]
        slack = node.earned - node.principal - sum(
            required[child] for child in node.out_delegations
        )
        node_buffers.append(slack if slack > 0 else 0)
    buffers = []
    running = 0
    for value in reversed(node_buffers):
        running += value
        buffers.append(running)
    buffers.reverse()
    checks = []
    first_violation = None
    for k, child in enumerate(path.nodes[1:]):
        edge = path.edges[k]
        floor = required[child]
        locked = principal - buffers[k]
        if locked < 0:
            locked = 0
        checks.append(
            EdgeCheck(
                index=k,
                sponsor=path.nodes[k],
                child=child,
                delegated=edge,
                required=floor,
                buffer_below=buffers[k],
                locked=locked,
                slack=edge - floor,
            )
        )
        if locked > edge - floor and first_violation is None:
            first_violation = k
    return FeasibilityReport(
        borrower=borrower,
        principal=principal,
        credit_limit=limit,
        within_limit=principal <= limit,
        per_edge=tuple(checks),
        first_violation=first_violation,
    )
