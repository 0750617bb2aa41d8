"""Model parameters, the block Hamiltonian and regime classification.

The spin system lives on {-1, +1}^n with the first n/2 sites forming block one
and the remaining n/2 sites block two.  Couplings are ``beta`` inside a block
and ``alpha`` across blocks, all-pairs with a 1/(2n) normalization.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """Raised when inputs fall outside the admissible parameter domain."""


class Regime(str, enum.Enum):
    SUBCRITICAL = "Subcritical"
    CRITICAL_LINE = "CriticalLine"
    SUPERCRITICAL_COUPLED = "SupercriticalCoupled"
    SUPERCRITICAL_DECOUPLED = "SupercriticalDecoupled"


def check_couplings(alpha: float, beta: float) -> None:
    if not (math.isfinite(alpha) and math.isfinite(beta)):
        raise DomainError(f"couplings must be finite, got alpha={alpha}, beta={beta}")
    if not 0 <= alpha <= beta:
        raise DomainError(f"need 0 <= alpha <= beta, got alpha={alpha}, beta={beta}")


@dataclass(frozen=True)
class ModelParams:
    """Couplings and system size.

    Attributes:
        alpha: inter-block coupling.
        beta: intra-block coupling.
        n: total number of spins, even and at least 2.
    """

    alpha: float
    beta: float
    n: int

    def __post_init__(self) -> None:
        check_couplings(self.alpha, self.beta)
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise DomainError(f"n must be an integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if self.n < 2 or self.n % 2:
            raise DomainError(f"n must be even and >= 2, got {self.n}")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def half(self) -> int:
        """Number of spins per block."""
        return self.n // 2

    @property
    def regime(self) -> Regime:
        return classify_regime(self.alpha, self.beta)


@dataclass(frozen=True)
class SpinConfiguration:
    spins: tuple[int, ...]

    def __post_init__(self) -> None:
        spins = tuple(int(s) for s in self.spins)
        if any(s not in (-1, 1) for s in spins):
            raise DomainError("spins must be +1 or -1")
        object.__setattr__(self, "spins", spins)

    def __len__(self) -> int:
        return len(self.spins)

    def as_array(self) -> np.ndarray:
        return np.array(self.spins, dtype=np.int64)

    def flipped(self) -> "SpinConfiguration":
        return SpinConfiguration(tuple(-s for s in self.spins))

    def blocks_swapped(self) -> "SpinConfiguration":
        h = len(self.spins) // 2
        return SpinConfiguration(self.spins[h:] + self.spins[:h])


def _check_config(params: ModelParams, config: SpinConfiguration) -> None:
    if len(config) != params.n:
        raise DomainError(f"configuration has {len(config)} spins, expected n={params.n}")


def hamiltonian_m(params: ModelParams, m1: float, m2: float) -> float:
    """Energy as a function of the block magnetizations.

    H = -(n/2) * (alpha*m1*m2/2 + beta*m1**2/4 + beta*m2**2/4)
    """
    if abs(m1) > 1 or abs(m2) > 1:
        raise DomainError(f"magnetizations must lie in [-1, 1], got ({m1}, {m2})")
    a, b = params.alpha, params.beta
    return -(params.n / 2) * (a * (m1 * m2) / 2 + (b * m1 * m1 / 4 + b * m2 * m2 / 4))


def coupling_matrix(params: ModelParams) -> np.ndarray:
    """Pair couplings J with H(sigma) = -sigma^T J sigma, diagonal included."""
    n, h = params.n, params.half
    same = np.zeros((n, n), dtype=bool)
    same[:h, :h] = True
    same[h:, h:] = True
    return np.where(same, params.beta, params.alpha) / (2 * n)


def hamiltonian_spin(params: ModelParams, config: SpinConfiguration) -> float:
    """Energy evaluated directly from the pair sums over all ordered pairs (i, j)."""
    _check_config(params, config)
    s = config.as_array().astype(float)
    return -float(s @ coupling_matrix(params) @ s)


def block_magnetizations(config: SpinConfiguration) -> tuple[float, float]:
    n = len(config)
    if n < 2 or n % 2:
        raise DomainError(f"configuration length must be even and >= 2, got {n}")
    h = n // 2
    return 2 * sum(config.spins[:h]) / n, 2 * sum(config.spins[h:]) / n


def classify_regime(alpha: float, beta: float) -> Regime:
    """Phase of the infinite-volume model.

    The critical line is tested with exact float equality on alpha + beta.
    """
    check_couplings(alpha, beta)
    total = alpha + beta
    if total < 2:
        return Regime.SUBCRITICAL
    if total == 2:
        return Regime.CRITICAL_LINE
    if alpha > 0:
        return Regime.SUPERCRITICAL_COUPLED
    return Regime.SUPERCRITICAL_DECOUPLED


def near_critical(alpha: float, beta: float, tol: float = 1e-9) -> bool:
    """True when alpha + beta is within ``tol`` of 2 but not exactly on it."""
    gap = abs(alpha + beta - 2)
    return 0 < gap < tol
