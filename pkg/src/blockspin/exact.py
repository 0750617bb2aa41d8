"""Exact finite-n Gibbs law of the block up-spin counts.

The Gibbs weight of a configuration depends only on the pair (k1, k2) of
up-spin counts per block, so the law of the block magnetizations is a
product of binomial multiplicities and a Boltzmann factor on an
(n/2 + 1) x (n/2 + 1) grid.  Everything is kept in log space.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .model import DomainError, ModelParams, coupling_matrix

DEFAULT_MAX_N = 20000
BRUTE_FORCE_MAX_N = 20


class Statistic(str, enum.Enum):
    """Scaled scalar statistics of (m1, m2) available as pushforwards."""

    SQRTN_M1 = "SqrtN_m1"
    SQRTN_M2 = "SqrtN_m2"
    QUARTERN_M1 = "QuarterN_m1"
    HALFSQRTN_M1_MINUS_M2 = "HalfSqrtN_m1_minus_m2"
    W1_TILDE = "W1_tilde"
    W2_TILDE = "W2_tilde"


def statistic_keys(stat: Statistic, k1, k2, n: int):
    """Integer lattice key of ``stat`` for up-spin counts ``k1, k2``.

    Locations are ``statistic_scale(stat, n) * key`` so equal keys give
    bitwise-equal locations, and key -> -key mirrors the location exactly.
    """
    stat = Statistic(stat)
    if stat in (Statistic.SQRTN_M1, Statistic.QUARTERN_M1):
        return 4 * k1 - n
    if stat is Statistic.SQRTN_M2:
        return 4 * k2 - n
    if stat in (Statistic.HALFSQRTN_M1_MINUS_M2, Statistic.W2_TILDE):
        return k1 - k2
    if stat is Statistic.W1_TILDE:
        return 2 * (k1 + k2) - n
    raise ValueError(stat)


def statistic_scale(stat: Statistic, n: int) -> float:
    stat = Statistic(stat)
    if stat in (Statistic.SQRTN_M1, Statistic.SQRTN_M2, Statistic.W1_TILDE):
        return math.sqrt(n) / n
    if stat is Statistic.QUARTERN_M1:
        return n ** 0.25 / n
    # (sqrt(n)/2) * (m1 - m2) with m1 - m2 = 4 (k1 - k2) / n
    return 2 * math.sqrt(n) / n


@dataclass(frozen=True)
class DiscreteLaw1D:
    """Finitely supported law on the real line, atoms sorted by location."""

    locations: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self) -> None:
        loc = np.asarray(self.locations, dtype=float)
        prob = np.asarray(self.probabilities, dtype=float)
        if loc.ndim != 1 or loc.shape != prob.shape or loc.size == 0:
            raise ValueError("locations and probabilities must be nonempty 1-D arrays of equal length")
        if np.any(np.diff(loc) <= 0):
            raise ValueError("locations must be strictly increasing")
        if np.any(prob < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(math.fsum(prob) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {math.fsum(prob)!r}, not 1")
        loc.setflags(write=False)
        prob.setflags(write=False)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "probabilities", prob)

    def __len__(self) -> int:
        return self.locations.size

    def cdf(self) -> np.ndarray:
        """Right-continuous CDF evaluated at each atom."""
        return np.minimum(np.cumsum(self.probabilities), 1.0)

    def moment(self, k: int) -> float:
        return math.fsum(self.probabilities * self.locations ** k)

    def to_dict(self) -> dict:
        return {
            "atoms": [
                {"x": float(x), "p": float(p)}
                for x, p in zip(self.locations, self.probabilities)
            ]
        }


def law_from_keys(keys: np.ndarray, weights: np.ndarray, scale: float) -> DiscreteLaw1D:
    """Merge weighted integer keys into a normalized law at ``scale * key``."""
    keys = np.asarray(keys, dtype=np.int64).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    lo = int(keys.min())
    mass = np.bincount(keys - lo, weights=weights)
    present = np.bincount(keys - lo) > 0
    support = np.nonzero(present)[0]
    prob = mass[support]
    prob = prob / math.fsum(prob)
    return DiscreteLaw1D((support + lo) * scale, prob)


@dataclass(frozen=True)
class MomentSummary:
    mean: tuple[float, float]
    covariance: tuple[tuple[float, float], tuple[float, float]]
    scale_exponent: float = 0.5

    @property
    def variances(self) -> tuple[float, float]:
        return self.covariance[0][0], self.covariance[1][1]

    @property
    def correlation(self) -> float:
        c = self.covariance
        return c[0][1] / math.sqrt(c[0][0] * c[1][1])

    def to_dict(self) -> dict:
        return {
            "mean": list(self.mean),
            "covariance": [list(row) for row in self.covariance],
            "scale_exponent": self.scale_exponent,
        }


@dataclass(frozen=True)
class ExactDistribution:
    """Exact Gibbs law of (k1, k2), the up-spin counts of the two blocks.

    ``log_weight[k1, k2]`` is log C(n/2, k1) + log C(n/2, k2) - H(m1, m2)
    and ``log_z`` its log-sum-exp, so ``exp(log_weight - log_z)`` is the law.
    """

    params: ModelParams
    log_weight: np.ndarray = field(repr=False)
    log_z: float

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def m_values(self) -> np.ndarray:
        """Block magnetization for each up-spin count 0..n/2."""
        k = np.arange(self.params.half + 1)
        return (4 * k - self.n) / self.n

    def prob(self) -> np.ndarray:
        return np.exp(self.log_weight - self.log_z)

    def pushforward(self, stat: Statistic | str) -> DiscreteLaw1D:
        return pushforward(self, stat)

    def to_csv(self) -> str:
        """Grid export, header ``k1,k2,m1,m2,prob``."""
        p = self.prob()
        m = self.m_values
        buf = io.StringIO()
        buf.write("k1,k2,m1,m2,prob\n")
        size = self.params.half + 1
        for k1 in range(size):
            for k2 in range(size):
                buf.write(f"{k1},{k2},{m[k1]:.17g},{m[k2]:.17g},{p[k1, k2]:.16e}\n")
        return buf.getvalue()

    def to_dict(self) -> dict:
        p = self.prob()
        m = self.m_values
        size = self.params.half + 1
        return {
            "params": params_dict(self.params),
            "log_z": self.log_z,
            "atoms": [
                {"k1": k1, "k2": k2, "m1": float(m[k1]), "m2": float(m[k2]), "prob": float(p[k1, k2])}
                for k1 in range(size)
                for k2 in range(size)
            ],
        }


def params_dict(params: ModelParams) -> dict:
    return {"alpha": params.alpha, "beta": params.beta, "n": params.n}


def log_binomials(h: int) -> np.ndarray:
    """log C(h, k) for k = 0..h, bitwise symmetric under k -> h - k."""
    k = np.arange(h + 1)
    lg = gammaln(k + 1.0)
    return gammaln(h + 1.0) - (lg + lg[::-1])


def _finalize(params: ModelParams, log_weight: np.ndarray) -> ExactDistribution:
    log_weight = np.ascontiguousarray(log_weight, dtype=float)
    log_weight.setflags(write=False)
    return ExactDistribution(params, log_weight, float(logsumexp(log_weight)))


def exact_distribution(params: ModelParams, max_n: int = DEFAULT_MAX_N) -> ExactDistribution:
    """Exact law of the block up-spin counts under the Gibbs measure.

    Args:
        params: model parameters.
        max_n: refuse to build grids for larger ``n``; the grid holds
            (n/2 + 1)**2 doubles.

    Raises:
        DomainError: if ``params.n`` exceeds ``max_n``.
    """
    n, h = params.n, params.half
    if n > max_n:
        raise DomainError(
            f"n={n} exceeds the exact-grid cap {max_n} "
            f"({(h + 1) ** 2 * 8 / 1e9:.2f} GB); raise max_n to override"
        )
    lb = log_binomials(h)
    m = (4 * np.arange(h + 1) - n) / n
    m1, m2 = m[:, None], m[None, :]
    a, b = params.alpha, params.beta
    # grouping keeps the grid bitwise symmetric under block swap and global flip
    neg_energy = (n / 2) * (a * (m1 * m2) / 2 + (b * m1 * m1 / 4 + b * m2 * m2 / 4))
    return _finalize(params, (lb[:, None] + lb[None, :]) + neg_energy)


def brute_force_distribution(params: ModelParams) -> ExactDistribution:
    """Law of (k1, k2) by enumerating all 2**n spin configurations.

    Independent of :func:`exact_distribution`: energies come from the pair-sum
    form of the Hamiltonian and multiplicities from the enumeration itself.
    """
    n, h = params.n, params.half
    if n > BRUTE_FORCE_MAX_N:
        raise DomainError(f"brute force enumeration limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    coupling = coupling_matrix(params)
    bits = np.arange(n)
    energies = []
    cells = []
    chunk = 1 << 14
    for start in range(0, 1 << n, chunk):
        codes = np.arange(start, min(start + chunk, 1 << n))
        spins = (((codes[:, None] >> bits) & 1) * 2 - 1).astype(float)
        energies.append(-np.einsum("ci,ij,cj->c", spins, coupling, spins))
        up = spins > 0
        cells.append(up[:, :h].sum(axis=1) * (h + 1) + up[:, h:].sum(axis=1))
    energy = np.concatenate(energies)
    cell = np.concatenate(cells)
    shift = float(np.max(-energy))
    mass = np.bincount(cell, weights=np.exp(-energy - shift), minlength=(h + 1) ** 2)
    with np.errstate(divide="ignore"):
        log_weight = np.log(mass).reshape(h + 1, h + 1) + shift
    return _finalize(params, log_weight)


def total_variation(p: ExactDistribution, q: ExactDistribution) -> float:
    if p.log_weight.shape != q.log_weight.shape:
        raise ValueError("distributions live on different grids")
    return 0.5 * math.fsum(np.abs(p.prob() - q.prob()).ravel())


def pushforward(dist: ExactDistribution, stat: Statistic | str) -> DiscreteLaw1D:
    """Exact law of a scaled statistic of (m1, m2)."""
    stat = Statistic(stat)
    h, n = dist.params.half, dist.n
    prob = dist.prob()
    if stat is Statistic.SQRTN_M2:
        # summing the transposed grid in m1 order makes the two block marginals bitwise comparable
        prob = np.ascontiguousarray(prob.T)
        keyed = Statistic.SQRTN_M1
    else:
        keyed = stat
    k = np.arange(h + 1)
    keys = np.broadcast_to(statistic_keys(keyed, k[:, None], k[None, :], n), prob.shape)
    return law_from_keys(keys, prob, statistic_scale(stat, n))


def moments(dist: ExactDistribution) -> MomentSummary:
    """Mean and covariance of (sqrt(n) m1, sqrt(n) m2)."""
    p = dist.prob()
    x = math.sqrt(dist.n) * dist.m_values
    row = p.sum(axis=1)
    col = p.sum(axis=0)
    mean1 = math.fsum(row * x)
    mean2 = math.fsum(col * x)
    var1 = math.fsum(row * x * x) - mean1 * mean1
    var2 = math.fsum(col * x * x) - mean2 * mean2
    cov = math.fsum(x * (p @ x)) - mean1 * mean2
    return MomentSummary((mean1, mean2), ((var1, cov), (cov, var2)), 0.5)


def w_moments(dist: ExactDistribution) -> MomentSummary:
    """Mean and covariance of (w1~, w2~) = sqrt(n) ((m1 + m2)/2, (m1 - m2)/2)."""
    w1 = pushforward(dist, Statistic.W1_TILDE)
    w2 = pushforward(dist, Statistic.W2_TILDE)
    mean1, mean2 = w1.moment(1), w2.moment(1)
    var1 = w1.moment(2) - mean1 * mean1
    var2 = w2.moment(2) - mean2 * mean2
    # Cov(w1, w2) = (Var m1 - Var m2) * n / 4
    m = moments(dist)
    cov = (m.covariance[0][0] - m.covariance[1][1]) / 4
    return MomentSummary((mean1, mean2), ((var1, cov), (cov, var2)), 0.5)


def log_prob_region(
    dist: ExactDistribution,
    centers,
    epsilon: float,
) -> float:
    """log P(m lies outside every open Euclidean ball B_epsilon(center)).

    Distances are measured in (m1, m2) coordinates.  Returns ``-inf`` when
    no grid point lies outside the balls.
    """
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.shape[1] != 2 or np.any(np.abs(centers) > 1):
        raise DomainError("centers must be (m1, m2) points in [-1, 1]^2")
    m = dist.m_values
    m1, m2 = m[:, None], m[None, :]
    outside = np.ones(dist.log_weight.shape, dtype=bool)
    for c1, c2 in centers:
        outside &= np.hypot(m1 - c1, m2 - c2) >= epsilon
    if not outside.any():
        return -math.inf
    return float(logsumexp(dist.log_weight[outside]) - dist.log_z)
