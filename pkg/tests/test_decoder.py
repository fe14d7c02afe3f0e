import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import exact_bit_llrs, reference_sum_product
from kaidd.decoder import (ReweightedDecoder, check_to_variable, compute_beliefs, decode,
                           validate_rho, variable_to_check)
from kaidd.ldpc_code import syndrome

BOTH = pytest.mark.parametrize("use_numba", [True, False], ids=["numba", "numpy"])


def test_variable_to_check_hand_value():
    psi = variable_to_check(1.0, [0.5, -0.2, 0.3], [0.6, 0.6, 0.5], target=2)
    assert psi == pytest.approx(1.0 + 0.6 * 0.5 + 0.6 * -0.2 - 0.5 * 0.3, abs=1e-15)
    assert psi == pytest.approx(1.03, abs=1e-12)


def test_variable_to_check_reductions():
    # rho = 1: plain sum over the other checks
    assert variable_to_check(0.4, [1.0, 2.0, -0.5], [1, 1, 1], 1) == pytest.approx(0.4 + 1.0 - 0.5)
    # degree one: only the (1 - rho) self term remains
    assert variable_to_check(0.4, [2.0], [0.3], 0) == pytest.approx(0.4 - 0.7 * 2.0)


def test_check_to_variable_hand_values():
    assert check_to_variable([0.0, 3.0]) == 0.0
    assert check_to_variable([0.8]) == pytest.approx(0.8, abs=1e-12)
    ref = 2 * math.atanh(math.tanh(0.6) * math.tanh(-0.2))
    assert check_to_variable([1.2, -0.4]) == pytest.approx(ref, abs=1e-14)
    assert ref == pytest.approx(-0.2128, abs=1e-4)


def test_check_to_variable_is_clipped():
    assert check_to_variable([200.0, 200.0]) == 50.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=1, max_size=8))
def test_check_message_contracts(psis):
    lam = check_to_variable(psis)
    assert abs(lam) <= min(abs(p) for p in psis) + 1e-6


@pytest.mark.parametrize("p", [25.0, 38.0, 45.0])
def test_check_message_saturates_within_clip(p):
    # tanh rounds to 1 near the guard, so only the message clip bounds the slack
    assert abs(check_to_variable([p, p])) <= 50.0


def test_compute_beliefs_hand_values():
    assert compute_beliefs(0.5, [1.0, -0.4], [0.5, 1.0]) == pytest.approx(0.6)
    assert compute_beliefs(0.7, [], []) == 0.7
    assert compute_beliefs(0.1, [1.0, 2.0], [1.0, 1.0]) == pytest.approx(3.1)


def test_validate_rho():
    assert validate_rho(0.5, 3).tolist() == [0.5, 0.5, 0.5]
    for bad in (0.0, 1.5, [0.5, 0.5]):
        with pytest.raises(ValueError):
            validate_rho(bad, 3)


@BOTH
def test_noise_free_converges_at_once(code96, use_numba):
    res = ReweightedDecoder(code96, 1.0, use_numba).decode(np.full(code96.N, 10.0))
    assert res.converged and res.iterations == 1 and not res.bits.any()


@BOTH
def test_tree_beliefs_are_exact_marginals(tree_code, use_numba):
    rng = np.random.default_rng(5)
    for _ in range(5):
        llr = rng.normal(0.8, 1.5, tree_code.N)
        # run well past the tree diameter without early stop
        _, _, _, _, b = ReweightedDecoder(tree_code, 1.0, use_numba).run(llr, 20, early_stop=False)
        assert np.max(np.abs(b - exact_bit_llrs(tree_code.to_dense(), llr))) < 1e-9


@BOTH
@pytest.mark.parametrize("rho", [1.0, 0.5666666666666667, "mixed"])
def test_matches_dense_reference(code96, use_numba, rho):
    if rho == "mixed":
        rho = np.where(np.arange(code96.M) % 3 == 0, 0.4, 1.0)
    rng = np.random.default_rng(11)
    dec = ReweightedDecoder(code96, rho, use_numba)
    Hd = code96.to_dense()
    for _ in range(8):
        llr = rng.normal(1.6, 1.8, code96.N)
        res = dec.decode(llr, 15)
        bits, it, ok, b = reference_sum_product(Hd, llr, 15, rho if not np.isscalar(rho) else np.full(code96.M, rho))
        assert res.iterations == it and res.converged == ok
        assert np.array_equal(res.bits, bits)
        assert np.allclose(res.beliefs, b, atol=1e-8)


@pytest.mark.parametrize("rho", [1.0, 0.7])
def test_numba_and_numpy_agree(code96, rho):
    rng = np.random.default_rng(2)
    a = ReweightedDecoder(code96, rho, True)
    b = ReweightedDecoder(code96, rho, False)
    for _ in range(10):
        llr = rng.normal(1.2, 2.0, code96.N)
        ra, rb = a.run(llr, 20), b.run(llr, 20)
        assert ra[:2] == rb[:2]
        for x, y in zip(ra[2:], rb[2:]):
            assert np.allclose(x, y, atol=1e-10)


@BOTH
def test_converged_implies_zero_syndrome(code96, use_numba):
    rng = np.random.default_rng(8)
    dec = ReweightedDecoder(code96, 0.8, use_numba)
    for _ in range(20):
        res = dec.decode(rng.normal(1.0, 1.6, code96.N), 30)
        if res.converged:
            assert not syndrome(code96, res.bits).any()


def test_extrinsic_and_functional_api(code96):
    llr = np.random.default_rng(0).normal(2.0, 1.0, code96.N)
    res = decode(code96, 1.0, llr, 5)
    assert np.allclose(res.extrinsic + llr, res.beliefs)


@BOTH
def test_warm_start_from_zero_equals_cold(code96, use_numba):
    llr = np.random.default_rng(4).normal(1.0, 2.0, code96.N)
    dec = ReweightedDecoder(code96, 0.9, use_numba)
    cold = dec.run(llr, 7)
    warm = dec.run(llr, 7, lam_init=np.zeros(code96.n_edges))
    assert cold[:2] == warm[:2] and np.allclose(cold[4], warm[4], atol=1e-12)


def test_input_validation(code96):
    dec = ReweightedDecoder(code96)
    with pytest.raises(ValueError):
        dec.run(np.zeros(code96.N + 1), 5)
    with pytest.raises(ValueError):
        dec.run(np.zeros(code96.N), 0)
    with pytest.raises(ValueError):
        dec.run(np.zeros(code96.N), 5, lam_init=np.zeros(3))
