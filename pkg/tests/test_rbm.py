import math

import numpy as np
import pytest

from oracles import rbm_boltzmann_table, spins
from pathboltz.network import classical_chain
from pathboltz.path_integral import path_distribution
from pathboltz.rbm import (
    RbmParams,
    ansatz,
    as_layered,
    conditional_up_probability,
    energy,
    gibbs_sample,
    gibbs_table,
    spin_configurations,
    visible_marginal,
)
from pathboltz.tables import total_variation


def test_energy_examples():
    assert energy(RbmParams.zeros(2, 3), [1, -1], [1, 1, -1]) == 0
    p = RbmParams([1.0], [1.0], [[1.0]])
    assert energy(p, [1], [1]) == 3
    assert energy(p, [1], [-1]) == -1
    with pytest.raises(ValueError):
        energy(p, [1, 1], [1])
    with pytest.raises(ValueError):
        energy(p, [0], [1])


def test_configuration_order():
    assert [tuple(r) for r in spin_configurations(3)] == spins(3)


def test_gibbs_table_zero_params_uniform():
    np.testing.assert_array_equal(gibbs_table(RbmParams.zeros(1, 1)).masses, np.full((2, 2), 0.25))


@pytest.mark.parametrize("seed", range(5))
def test_gibbs_table_matches_energy_enumeration(seed):
    p = RbmParams.random(2, 3, np.random.default_rng(seed), scale=2.0)
    table = gibbs_table(p)
    assert abs(table.masses.sum() - 1) <= 1e-12
    assert np.max(np.abs(table.masses - rbm_boltzmann_table(p.a, p.b, p.W))) <= 1e-12


def test_gibbs_table_survives_large_energies():
    p = RbmParams([400.0], [-300.0], [[250.0]])
    assert np.all(np.isfinite(gibbs_table(p).masses))


def test_visible_marginal_examples():
    np.testing.assert_allclose(visible_marginal(RbmParams.zeros(3, 2)).masses, np.full(8, 1 / 8), atol=1e-16)
    w = 0.8
    m = visible_marginal(RbmParams([0.0], [0.0], [[w]])).masses
    assert m[0] == pytest.approx(m[1], abs=1e-16)
    a = 0.3
    m = visible_marginal(RbmParams([a], [0.0], [[w]])).masses
    expected = np.array([math.exp(-a) * 2 * math.cosh(w), math.exp(a) * 2 * math.cosh(-w)])
    np.testing.assert_allclose(m, expected / expected.sum(), atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_visible_marginal_matches_enumerated_marginal(seed):
    p = RbmParams.random(3, 3, np.random.default_rng(seed))
    oracle = rbm_boltzmann_table(p.a, p.b, p.W).sum(axis=1)
    assert np.max(np.abs(visible_marginal(p).masses - oracle)) <= 1e-12


def test_ansatz():
    np.testing.assert_allclose(ansatz(RbmParams.zeros(3, 1)), np.full(8, 2**-1.5), atol=1e-16)
    for seed in range(5):
        p = RbmParams.random(2, 2, np.random.default_rng(seed), scale=1.5)
        psi = ansatz(p)
        assert np.all(psi >= 0)
        assert abs(np.sum(psi**2) - 1) <= 1e-12
        assert np.max(np.abs(psi**2 - visible_marginal(p).masses)) <= 1e-12


def test_joint_factorizes_into_marginal_and_conditionals():
    for seed in range(3):
        p = RbmParams.random(3, 3, np.random.default_rng(seed))
        table = gibbs_table(p).masses
        marginal = visible_marginal(p).masses
        V = spin_configurations(3)
        H = spin_configurations(3)
        for i, v in enumerate(V):
            up = conditional_up_probability(p.b + v @ p.W)
            for j, h in enumerate(H):
                cond = np.prod(np.where(h > 0, up, 1 - up))
                assert abs(table[i, j] - marginal[i] * cond) <= 1e-12


def test_spin_flip_symmetry():
    p = RbmParams.random(2, 3, np.random.default_rng(1))
    # v.W.h is even under a global flip, the bias terms are odd
    flipped = RbmParams(-p.a, -p.b, p.W)
    a = gibbs_table(p).masses
    b = gibbs_table(flipped).masses
    # flipping every spin maps configuration index k to 2^n - 1 - k
    assert np.max(np.abs(a - b[::-1, :][:, ::-1])) <= 1e-12


def test_conditional_is_half_at_zero_field():
    assert conditional_up_probability(0.0) == 0.5
    f = 0.37
    assert conditional_up_probability(f) == pytest.approx(math.exp(-f) / (math.exp(-f) + math.exp(f)), abs=1e-16)


def test_sampler_is_deterministic():
    p = RbmParams.random(2, 2, np.random.default_rng(2))
    a = gibbs_sample(p, 5000, 100, seed=7)
    b = gibbs_sample(p, 5000, 100, seed=7)
    np.testing.assert_array_equal(a.masses, b.masses)
    c = gibbs_sample(p, 5000, 100, seed=8)
    assert not np.array_equal(a.masses, c.masses)


def test_sampler_tv_shrinks_with_more_sweeps():
    p = RbmParams.random(2, 2, np.random.default_rng(3))
    exact = gibbs_table(p)
    tvs = [
        np.mean([total_variation(gibbs_sample(p, n, 200, seed=s), exact) for s in range(4)])
        for n in (200, 2000, 20000)
    ]
    assert tvs[0] > tvs[1] > tvs[2]


def test_as_layered_examples():
    zero = as_layered(RbmParams.zeros(1, 2))
    assert not any(np.any(b) for b in zero.biases) and not np.any(zero.weights[0])
    w = 0.6
    one = as_layered(RbmParams([0.0], [0.0], [[w]]))
    np.testing.assert_array_equal(one.weights[0], [[w, -w], [-w, w]])
    assert one.dims == (2, 2) and one.names == ("v", "h")


def test_as_layered_chain_reproduces_gibbs_table():
    for seed in range(5):
        p = RbmParams.random(2, 2, np.random.default_rng(seed), scale=1.5)
        table = path_distribution(classical_chain(as_layered(p)))
        assert np.max(np.abs(table.masses - gibbs_table(p).masses)) <= 1e-12


def test_rbm_json_round_trip_and_validation():
    p = RbmParams.random(2, 3, np.random.default_rng(4))
    back = RbmParams.from_json(p.to_json())
    np.testing.assert_array_equal(back.W, p.W)
    with pytest.raises(ValueError, match="disagree"):
        RbmParams.from_json('{"n": 2, "p": 1, "a": [0], "b": [0], "W": [[0]]}')
    with pytest.raises(ValueError, match="missing"):
        RbmParams.from_json('{"n": 1, "p": 1, "a": [0], "b": [0]}')
