"""Single-spin-flip Markov chains for the block Gibbs measure.

Random numbers come from xoshiro256** (Blackman and Vigna) seeded through
splitmix64, implemented here so that a (seed, params, config) triple gives
bitwise-identical samples on any platform.
"""

from __future__ import annotations

import enum
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from .exact import (
    DiscreteLaw1D,
    ExactDistribution,
    Statistic,
    law_from_keys,
    params_dict,
    statistic_keys,
    statistic_scale,
)
from .model import DomainError, ModelParams

_MASK64 = (1 << 64) - 1
GLAUBER, METROPOLIS = 0, 1


class Dynamics(str, enum.Enum):
    GLAUBER = "Glauber"
    METROPOLIS = "Metropolis"

    @property
    def code(self) -> int:
        return GLAUBER if self is Dynamics.GLAUBER else METROPOLIS


@dataclass(frozen=True)
class ChainConfig:
    """Sampler settings.

    ``sweeps`` counts all sweeps including burn-in; one sweep is n proposed
    flips.  After burn-in every ``thin``-th sweep is recorded, so a chain
    yields ``(sweeps - burn_in) // thin`` records.
    """

    seed: int = 0
    sweeps: int = 1000
    burn_in: int = 100
    thin: int = 1
    dynamics: Dynamics = Dynamics.GLAUBER
    chains: int = 1
    random_start: bool = False
    debug: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "dynamics", Dynamics(self.dynamics))
        if not 0 <= self.seed <= _MASK64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.burn_in < 0:
            raise DomainError("burn_in must be nonnegative")
        if not self.sweeps > self.burn_in:
            raise DomainError("sweeps must exceed burn_in")
        if self.thin < 1:
            raise DomainError("thin must be >= 1")
        if self.chains < 1:
            raise DomainError("chains must be >= 1")

    @property
    def records_per_chain(self) -> int:
        return (self.sweeps - self.burn_in) // self.thin

    def chain_seed(self, index: int) -> int:
        return (self.seed ^ index) & _MASK64


@dataclass(frozen=True)
class SampleSet:
    """Recorded up-spin counts, concatenated over chains in chain order."""

    params: ModelParams
    config: ChainConfig
    k1: np.ndarray = field(repr=False)
    k2: np.ndarray = field(repr=False)
    sweep: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return int(self.k1.size)

    @property
    def m1(self) -> np.ndarray:
        return (4 * self.k1.astype(np.int64) - self.params.n) / self.params.n

    @property
    def m2(self) -> np.ndarray:
        return (4 * self.k2.astype(np.int64) - self.params.n) / self.params.n

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("sweep,m1,m2\n")
        for s, a, b in zip(self.sweep.tolist(), self.m1.tolist(), self.m2.tolist()):
            buf.write(f"{s},{a:.17g},{b:.17g}\n")
        return buf.getvalue()

    def metadata(self) -> dict:
        cfg = asdict(self.config)
        cfg["dynamics"] = self.config.dynamics.value
        return {
            "params": params_dict(self.params),
            "config": cfg,
            "chain_seeds": [self.config.chain_seed(i) for i in range(self.config.chains)],
            "records": len(self),
            "records_per_chain": self.config.records_per_chain,
            "proposed_flips_per_chain": self.config.sweeps * self.params.n,
        }


# --- kernels ---------------------------------------------------------------


@numba.njit(cache=True)
def _splitmix64(x):
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = x
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x, z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@numba.njit(cache=True)
def _next(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@numba.njit(cache=True)
def _uniform(s):
    return float(_next(s) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True)
def seed_state(seed):
    s = np.empty(4, dtype=np.uint64)
    x = np.uint64(seed)
    for i in range(4):
        x, s[i] = _splitmix64(x)
    return s


def random_uniforms(seed: int, count: int) -> np.ndarray:
    """First ``count`` uniforms in [0, 1) of the generator seeded with ``seed``."""
    return _uniforms(seed_state(np.uint64(seed)), count)


@numba.njit(cache=True)
def _uniforms(state, count):
    out = np.empty(count)
    for i in range(count):
        out[i] = _uniform(state)
    return out


@numba.njit(cache=True)
def energy_from_counts(n, alpha, beta, k1, k2):
    m1 = (4 * k1 - n) / n
    m2 = (4 * k2 - n) / n
    return -(n / 2) * (alpha * (m1 * m2) / 2 + (beta * m1 * m1 / 4 + beta * m2 * m2 / 4))


@numba.njit(cache=True)
def delta_energy(n, alpha, beta, k1, k2, block, spin):
    """Energy change when a ``spin`` (+1/-1) in ``block`` (0/1) is flipped."""
    if block == 0:
        return energy_from_counts(n, alpha, beta, k1 - spin, k2) - energy_from_counts(n, alpha, beta, k1, k2)
    return energy_from_counts(n, alpha, beta, k1, k2 - spin) - energy_from_counts(n, alpha, beta, k1, k2)


@numba.njit(cache=True)
def acceptance_probability(delta_h, dynamics):
    """Glauber 1/(1 + exp(dH)) or Metropolis min(1, exp(-dH))."""
    if dynamics == 0:
        if delta_h > 0:
            e = math.exp(-delta_h)
            return e / (1.0 + e)
        return 1.0 / (1.0 + math.exp(delta_h))
    if delta_h <= 0:
        return 1.0
    return math.exp(-delta_h)


@numba.njit(cache=True, nogil=True)
def _run_kernel(n, alpha, beta, state, sweeps, burn_in, thin, dynamics, random_start, debug, out_k1, out_k2, out_sweep):
    h = n // 2
    spins = np.ones(n, dtype=np.int8)
    if random_start:
        for i in range(n):
            if _uniform(state) < 0.5:
                spins[i] = -1
    k1 = 0
    k2 = 0
    for i in range(h):
        if spins[i] > 0:
            k1 += 1
    for i in range(h, n):
        if spins[i] > 0:
            k2 += 1
    # acceptance lookup indexed by (block, spin is up, k1, k2); same values as computing in place
    tabulate = (h + 1) * (h + 1) <= 1 << 20
    size = h + 1 if tabulate else 1
    table = np.empty((2, 2, size, size))
    if tabulate:
        for b in range(2):
            for up in range(2):
                for a1 in range(size):
                    for a2 in range(size):
                        dh = delta_energy(n, alpha, beta, a1, a2, b, 1 if up else -1)
                        table[b, up, a1, a2] = acceptance_probability(dh, dynamics)
    rec = 0
    for sweep in range(1, sweeps + 1):
        for _ in range(n):
            i = int(_uniform(state) * n)
            spin = spins[i]
            block = 0 if i < h else 1
            if tabulate:
                p = table[block, 1 if spin > 0 else 0, k1, k2]
            else:
                p = acceptance_probability(delta_energy(n, alpha, beta, k1, k2, block, spin), dynamics)
            if _uniform(state) < p:
                spins[i] = -spin
                if block == 0:
                    k1 -= spin
                else:
                    k2 -= spin
        if debug:
            c1 = 0
            c2 = 0
            for i in range(h):
                if spins[i] > 0:
                    c1 += 1
            for i in range(h, n):
                if spins[i] > 0:
                    c2 += 1
            if c1 != k1 or c2 != k2:
                return -1
        if sweep > burn_in and (sweep - burn_in) % thin == 0:
            out_k1[rec] = k1
            out_k2[rec] = k2
            out_sweep[rec] = sweep
            rec += 1
    return rec


def _run_one(params: ModelParams, config: ChainConfig, index: int):
    count = config.records_per_chain
    k1 = np.empty(count, dtype=np.int32)
    k2 = np.empty(count, dtype=np.int32)
    sweep = np.empty(count, dtype=np.int64)
    state = seed_state(np.uint64(config.chain_seed(index)))
    got = _run_kernel(
        params.n,
        params.alpha,
        params.beta,
        state,
        config.sweeps,
        config.burn_in,
        config.thin,
        config.dynamics.code,
        config.random_start,
        config.debug,
        k1,
        k2,
        sweep,
    )
    if got < 0:
        raise RuntimeError(f"chain {index}: magnetization bookkeeping diverged from the spin configuration")
    return k1, k2, sweep


def run_chain(params: ModelParams, config: ChainConfig, threads: int = 1) -> SampleSet:
    """Run ``config.chains`` independent chains and concatenate their records.

    Chain ``i`` is seeded with ``config.seed ^ i``; output does not depend on
    ``threads``.
    """
    workers = max(1, min(threads, config.chains))
    if workers == 1:
        parts = [_run_one(params, config, i) for i in range(config.chains)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda i: _run_one(params, config, i), range(config.chains)))
    k1 = np.concatenate([p[0] for p in parts])
    k2 = np.concatenate([p[1] for p in parts])
    sweep = np.concatenate([p[2] for p in parts])
    for arr in (k1, k2, sweep):
        arr.setflags(write=False)
    return SampleSet(params, config, k1, k2, sweep)


def empirical_law(samples: SampleSet, stat: Statistic | str) -> DiscreteLaw1D:
    """Empirical law of a scaled statistic, on the same lattice as the exact pushforward."""
    if len(samples) == 0:
        raise DomainError("sample set has no records")
    stat = Statistic(stat)
    n = samples.params.n
    keys = statistic_keys(stat, samples.k1.astype(np.int64), samples.k2.astype(np.int64), n)
    return law_from_keys(keys, np.ones(keys.shape), statistic_scale(stat, n))


def empirical_grid(samples: SampleSet) -> np.ndarray:
    """Empirical law of (k1, k2) on the (n/2 + 1)^2 grid."""
    if len(samples) == 0:
        raise DomainError("sample set has no records")
    size = samples.params.half + 1
    cells = samples.k1.astype(np.int64) * size + samples.k2
    counts = np.bincount(cells, minlength=size * size).astype(float)
    return (counts / counts.sum()).reshape(size, size)


def total_variation_to_exact(samples: SampleSet, dist: ExactDistribution) -> float:
    if samples.params != dist.params:
        raise ValueError("samples and exact law have different parameters")
    return 0.5 * math.fsum(np.abs(empirical_grid(samples) - dist.prob()).ravel())


def metadata_json(samples: SampleSet) -> str:
    return json.dumps(samples.metadata(), indent=2, sort_keys=True)
