"""Shared test helpers."""

import math

import numpy as np
import pytest

from blockspin.mcmc import Dynamics, acceptance_probability, delta_energy


def detailed_balance_worst(dynamics: Dynamics, states: int = 1000, seed: int = 7) -> float:
    """Largest relative error of p(s -> s') / p(s' -> s) against exp(-dH) over random states."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(states):
        h = int(rng.integers(1, 60))
        n = 2 * h
        beta = float(rng.uniform(0, 3))
        alpha = float(rng.uniform(0, beta))
        k1, k2 = (int(v) for v in rng.integers(0, h + 1, size=2))
        block = int(rng.integers(0, 2))
        k = k1 if block == 0 else k2
        # pick a site: an up spin exists iff k > 0, a down spin iff k < h
        spin = 1 if (k == h or (k > 0 and rng.random() < 0.5)) else -1
        dh = delta_energy(n, alpha, beta, k1, k2, block, spin)
        nk1, nk2 = (k1 - spin, k2) if block == 0 else (k1, k2 - spin)
        back = delta_energy(n, alpha, beta, nk1, nk2, block, -spin)
        assert back == pytest.approx(-dh, abs=1e-12)
        fwd = acceptance_probability(dh, dynamics.code)
        rev = acceptance_probability(back, dynamics.code)
        worst = max(worst, abs(fwd / rev / math.exp(-dh) - 1))
    return worst
