"""creditforest: a deterministic ledger engine for sponsor-delegated credit.

Accounts form a rooted sponsor forest. Capacity enters only through seed
base budgets, moves only along delegation edges, grows only through
repayment, and shrinks only through default, which propagates losses back
up the unique sponsor path. All arithmetic is exact integer minor units and
ppm rates, so every replay is bit-reproducible.
"""

from .errors import (
    ActiveLoanError,
    CreditLimitExceededError,
    DuplicateAccountError,
    EngineFault,
    InfeasibleLoanError,
    InsolventRevocationError,
    InsufficientCapacityError,
    InvalidAmountError,
    LedgerError,
    LoanStateError,
    NoSuchEdgeError,
    PricingInputError,
    RevocationRaiseError,
    UnknownAccountError,
)
from .ledger import (
    add_seed,
    adjust_delegation,
    borrow,
    credit_limit,
    default,
    free_capacity,
    onboard,
    repay,
    revoke,
    total_credit,
)
from .model import (
    DEFAULT_CONFIG,
    Account,
    EngineConfig,
    LedgerState,
    Loan,
    LockedEdge,
    PricingQuote,
)
from .scenario import (
    ScenarioEvent,
    export_state,
    import_state,
    parse_scenario,
    replay as replay_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "Account",
    "ActiveLoanError",
    "CreditLimitExceededError",
    "DEFAULT_CONFIG",
    "DuplicateAccountError",
    "EngineConfig",
    "EngineFault",
    "InfeasibleLoanError",
    "InsolventRevocationError",
    "InsufficientCapacityError",
    "InvalidAmountError",
    "LedgerError",
    "LedgerState",
    "Loan",
    "LoanStateError",
    "LockedEdge",
    "NoSuchEdgeError",
    "PricingInputError",
    "PricingQuote",
    "RevocationRaiseError",
    "ScenarioEvent",
    "UnknownAccountError",
    "add_seed",
    "adjust_delegation",
    "borrow",
    "credit_limit",
    "default",
    "export_state",
    "free_capacity",
    "import_state",
    "onboard",
    "parse_scenario",
    "repay",
    "replay_scenario",
    "revoke",
    "total_credit",
]
