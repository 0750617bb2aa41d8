"""Two-block Curie-Weiss (Ising block) model: exact finite-n laws, sampling and limit theorems."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    DomainError,
    ModelParams,
    Regime,
    SpinConfiguration,
    block_magnetizations,
    classify_regime,
    hamiltonian_m,
    hamiltonian_spin,
)
from .exact import (  # noqa: E402
    DiscreteLaw1D,
    ExactDistribution,
    MomentSummary,
    Statistic,
    brute_force_distribution,
    exact_distribution,
    log_prob_region,
    moments,
    pushforward,
)
