import math

import numpy as np
import pytest

from blockspin.exact import Statistic, exact_distribution, pushforward
from blockspin.mcmc import (
    ChainConfig,
    Dynamics,
    SampleSet,
    acceptance_probability,
    delta_energy,
    empirical_grid,
    empirical_law,
    random_uniforms,
    run_chain,
    total_variation_to_exact,
)
from blockspin.model import DomainError, ModelParams, hamiltonian_m
from helpers import detailed_balance_worst


def test_glauber_half_at_zero_delta():
    assert acceptance_probability(0.0, Dynamics.GLAUBER.code) == 0.5
    assert acceptance_probability(0.0, Dynamics.METROPOLIS.code) == 1.0
    assert acceptance_probability(-3.0, Dynamics.METROPOLIS.code) == 1.0
    assert acceptance_probability(2.0, Dynamics.GLAUBER.code) == pytest.approx(1 / (1 + math.exp(2)), rel=1e-15)


@pytest.mark.parametrize("dynamics", list(Dynamics))
def test_detailed_balance(dynamics):
    assert detailed_balance_worst(dynamics) < 1e-12


def test_acceptance_stable_for_large_delta():
    assert acceptance_probability(800.0, Dynamics.GLAUBER.code) == pytest.approx(math.exp(-800), rel=1e-12)
    assert acceptance_probability(-800.0, Dynamics.GLAUBER.code) == 1.0


@pytest.mark.parametrize("n, alpha, beta", [(4, 0.5, 1.0), (10, 1.0, 2.0), (100, 0.0, 2.5)])
def test_delta_energy_matches_hamiltonian(n, alpha, beta):
    params = ModelParams(alpha, beta, n)
    h = n // 2
    for k1 in range(h + 1):
        for k2 in range(h + 1):
            m1, m2 = (4 * k1 - n) / n, (4 * k2 - n) / n
            if k1 > 0:
                expected = hamiltonian_m(params, m1 - 4 / n, m2) - hamiltonian_m(params, m1, m2)
                assert delta_energy(n, alpha, beta, k1, k2, 0, 1) == pytest.approx(expected, abs=1e-10)
            if k2 < h:
                expected = hamiltonian_m(params, m1, m2 + 4 / n) - hamiltonian_m(params, m1, m2)
                assert delta_energy(n, alpha, beta, k1, k2, 1, -1) == pytest.approx(expected, abs=1e-10)


def test_generator_is_uniform_and_seeded():
    u = random_uniforms(12345, 200000)
    assert np.all((u >= 0) & (u < 1))
    assert u.mean() == pytest.approx(0.5, abs=5e-3)
    assert np.array_equal(u, random_uniforms(12345, 200000))
    assert not np.array_equal(u[:100], random_uniforms(12346, 100))


def test_config_validation():
    with pytest.raises(DomainError):
        ChainConfig(sweeps=10, burn_in=10)
    with pytest.raises(DomainError):
        ChainConfig(thin=0)
    with pytest.raises(DomainError):
        ChainConfig(seed=-1)
    with pytest.raises(DomainError):
        ChainConfig(seed=1 << 64)
    cfg = ChainConfig(seed=5, sweeps=110, burn_in=10, thin=3, chains=4)
    assert cfg.records_per_chain == 33
    assert [cfg.chain_seed(i) for i in range(4)] == [5, 4, 7, 6]


def test_run_shape_and_lattice():
    params = ModelParams(0.5, 1.0, 20)
    s = run_chain(params, ChainConfig(seed=1, sweeps=210, burn_in=10, thin=2, chains=3))
    assert len(s) == 300
    assert s.sweep[:3].tolist() == [12, 14, 16]
    lattice = np.round((s.m1 + 1) * 20 / 4, 9)
    assert np.array_equal(lattice, np.round(lattice))
    assert np.all(np.abs(s.m1) <= 1) and np.all(np.abs(s.m2) <= 1)


@pytest.mark.parametrize("dynamics", list(Dynamics))
def test_reproducible_and_thread_independent(dynamics):
    params = ModelParams(1.0, 2.0, 30)
    cfg = ChainConfig(seed=99, sweeps=2000, burn_in=100, chains=4, dynamics=dynamics, random_start=True)
    a = run_chain(params, cfg, threads=1)
    b = run_chain(params, cfg, threads=1)
    c = run_chain(params, cfg, threads=4)
    for x, y in ((a, b), (a, c)):
        assert np.array_equal(x.k1, y.k1) and np.array_equal(x.k2, y.k2) and np.array_equal(x.sweep, y.sweep)
    assert a.to_csv() == c.to_csv()
    other = run_chain(params, ChainConfig(seed=100, sweeps=2000, burn_in=100, chains=4, dynamics=dynamics))
    assert not np.array_equal(a.k1, other.k1)


def test_debug_bookkeeping_runs_clean():
    params = ModelParams(0.5, 1.5, 40)
    plain = run_chain(params, ChainConfig(seed=3, sweeps=500, burn_in=0, random_start=True))
    checked = run_chain(params, ChainConfig(seed=3, sweeps=500, burn_in=0, random_start=True, debug=True))
    assert np.array_equal(plain.k1, checked.k1)


def test_large_n_uses_direct_acceptance():
    # (h + 1)^2 > 2^20 disables the lookup table
    params = ModelParams(0.5, 1.0, 2100)
    s = run_chain(params, ChainConfig(seed=4, sweeps=30, burn_in=10, debug=True))
    assert len(s) == 20
    assert abs(s.m1.mean()) < 0.2


def manual_samples(n: int, k1, k2) -> SampleSet:
    k1 = np.asarray(k1, dtype=np.int32)
    k2 = np.asarray(k2, dtype=np.int32)
    cfg = ChainConfig(sweeps=len(k1) + 1, burn_in=1)
    return SampleSet(ModelParams(0.5, 1.0, n), cfg, k1, k2, np.arange(len(k1), dtype=np.int64))


def test_empirical_law_examples():
    law = empirical_law(manual_samples(4, [1], [1]), Statistic.SQRTN_M1)
    assert law.locations.tolist() == [0.0] and law.probabilities.tolist() == [1.0]
    law = empirical_law(manual_samples(4, [0, 2], [1, 1]), Statistic.SQRTN_M1)
    assert law.locations.tolist() == [-2.0, 2.0] and law.probabilities.tolist() == [0.5, 0.5]
    with pytest.raises(DomainError):
        empirical_law(manual_samples(4, [], []), Statistic.SQRTN_M1)
    with pytest.raises(DomainError):
        empirical_grid(manual_samples(4, [], []))


def test_empirical_law_shares_exact_lattice():
    params = ModelParams(0.5, 1.0, 20)
    s = run_chain(params, ChainConfig(seed=2, sweeps=3000, burn_in=100))
    exact = pushforward(exact_distribution(params), Statistic.HALFSQRTN_M1_MINUS_M2)
    emp = empirical_law(s, Statistic.HALFSQRTN_M1_MINUS_M2)
    assert set(emp.locations.tolist()) <= set(exact.locations.tolist())


def test_independent_spins_variance():
    params = ModelParams(0.0, 0.0, 100)
    s = run_chain(params, ChainConfig(seed=11, sweeps=100100, burn_in=100))
    assert len(s) == 100000
    var = float(np.var(math.sqrt(100) * s.m1))
    assert var == pytest.approx(2.0, rel=0.05)


def test_tv_decreases_with_run_length():
    params = ModelParams(0.5, 1.0, 50)
    dist = exact_distribution(params)
    tvs = [
        total_variation_to_exact(run_chain(params, ChainConfig(seed=21, sweeps=100 + r, burn_in=100)), dist)
        for r in (1000, 10000, 100000)
    ]
    assert tvs[0] > tvs[1] > tvs[2]


def test_metadata_and_csv():
    params = ModelParams(0.5, 1.0, 10)
    s = run_chain(params, ChainConfig(seed=8, sweeps=13, burn_in=10, chains=2))
    meta = s.metadata()
    assert meta["records"] == 6 and meta["chain_seeds"] == [8, 9]
    assert meta["config"]["dynamics"] == "Glauber"
    lines = s.to_csv().splitlines()
    assert lines[0] == "sweep,m1,m2" and len(lines) == 7
    with pytest.raises(ValueError):
        total_variation_to_exact(s, exact_distribution(ModelParams(0.5, 1.0, 12)))
