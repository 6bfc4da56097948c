"""Lossless multiple release of noisy query answers at increasing privacy levels."""
from .accounting import (
    ApproxDpParams,
    PreconditionError,
    ZcdpBudget,
    gaussian_sigma,
    multiple_release_budget,
    poisson_epsilon,
    poisson_epsilon_unit,
    zcdp_compose,
)
from .factorization import FactLedger, FactorizedQuery, fact_init, fact_release
from .families import FAMILIES, get_family
from .histogram import EffHistState, Histogram, NaiveHistState, efficient_release, naive_release
from .ledger import (
    BudgetExceededError,
    Ledger,
    LedgerFormatError,
    SealedLedgerError,
    ledger_init,
    load_ledger,
    save_ledger,
)
from .noise import DomainError, ImpossibleConditioningError

__version__ = "0.1.0"
