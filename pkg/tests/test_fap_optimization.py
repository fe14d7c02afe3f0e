import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from oracles import best_acyclic_selection, factor_kl_bits
from kaidd.decoder import ReweightedDecoder
from kaidd.fap_optimization import (RHO_MIN, EkarResult, FapConfigError, SubgraphObjective,
                                    cg_linear_minimizer, cg_update, ckar_assign, design_llrs,
                                    ekar_optimize, factor_mutual_information, leaf_augmented_code,
                                    lift, load_rho, optimize_subgraph, save_rho, select_best_fap,
                                    uniform_weight, urw_assign)
from kaidd.graph_analysis import CycleCensus, expand_subgraphs, girth
from kaidd.ldpc_code import ParityCheckMatrix

BOTH = pytest.mark.parametrize("use_numba", [True, False], ids=["numba", "numpy"])
SIX_CYCLE = ParityCheckMatrix.from_rows([[0, 1], [1, 2], [2, 0]], 3)


def test_uniform_weight():
    assert uniform_weight(0.85, 3.0) == pytest.approx(0.566667, abs=1e-6)
    with pytest.raises(FapConfigError):
        uniform_weight(0.85, 1.5)          # rho_v >= 1
    with pytest.raises(FapConfigError):
        uniform_weight(1.2, 3.0)


def test_ckar_assign_rule():
    rv = uniform_weight(0.85, 3.0)
    rho = ckar_assign(np.array([1, 5, 3]), 3.0, 0.85)
    assert rho.tolist() == [1.0, rv, rv]
    assert set(ckar_assign(np.array([2, 2, 2]), 3.0, 0.85)) == {rv}


def test_ckar_on_census_has_two_values(code1000):
    from kaidd.graph_analysis import count_short_cycles
    rho = ckar_assign(count_short_cycles(code1000), 3.0, 0.85)
    assert set(np.unique(rho)) == {uniform_weight(0.85, 3.0), 1.0}
    assert isinstance(count_short_cycles(code1000), CycleCensus)


def test_urw_assign():
    assert np.allclose(urw_assign(4, 3.0, 0.85), 0.85 * 2 / 3)


# ------------------------------------------------------------- factor MI


@BOTH
@pytest.mark.parametrize("d", [2, 3, 6])
def test_factor_mi_uniform_is_one_bit(use_numba, d):
    code = ParityCheckMatrix.from_rows([list(range(d))], d)
    I = factor_mutual_information(code, np.zeros(d), np.zeros(d), use_numba)
    assert I[0] == pytest.approx(1.0, abs=1e-12)


@BOTH
def test_factor_mi_point_mass_is_zero(use_numba):
    code = ParityCheckMatrix.from_rows([[0, 1, 2]], 3)
    L = np.array([40.0, -40.0, -40.0])   # 0,1,1: even parity
    I = factor_mutual_information(code, L, L, use_numba)
    assert I[0] == pytest.approx(0.0, abs=1e-9)


@BOTH
@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-6, 6), min_size=6, max_size=6),
       st.lists(st.floats(-6, 6), min_size=4, max_size=4))
def test_factor_mi_matches_enumeration(use_numba, psi, beliefs):
    code = ParityCheckMatrix.from_rows([[0, 1, 2], [1, 2, 3]], 4)
    psi = np.array(psi)
    b = np.array(beliefs)
    I = factor_mutual_information(code, psi, b, use_numba)
    ref = [factor_kl_bits(psi[:3], b[[0, 1, 2]]), factor_kl_bits(psi[3:], b[[1, 2, 3]])]
    assert np.allclose(I, ref, atol=1e-9)
    assert np.all(I >= 0)


def test_factor_mi_paths_agree_on_decoder_state(code96):
    llr = design_llrs(code96.N, 1.0, 0.5, 1, 3)[0]
    _, _, psi, _, b = ReweightedDecoder(code96).run(llr, 5, early_stop=False)
    a = factor_mutual_information(code96, psi, b, True)
    c = factor_mutual_information(code96, psi, b, False)
    assert np.allclose(a, c, atol=1e-12)


def test_factor_mi_degree_bound():
    code = ParityCheckMatrix.from_rows([list(range(25))], 25)
    with pytest.raises(ValueError):
        factor_mutual_information(code, np.zeros(25), np.zeros(25))


# ------------------------------------------------------------- linear minimizer


def test_lmo_six_cycle():
    rho = cg_linear_minimizer([0.3, 0.2, 0.1], SIX_CYCLE)
    assert rho.tolist() == [1.0, 1.0, RHO_MIN]
    chosen = {i for i in range(3) if rho[i] == 1.0}
    assert chosen == best_acyclic_selection(SIX_CYCLE.rows, 3, [0.3, 0.2, 0.1])


def test_lmo_trivial_cases(tree_code):
    assert cg_linear_minimizer(np.random.default_rng(0).random(tree_code.M), tree_code).tolist() == [1.0] * tree_code.M
    single = ParityCheckMatrix.from_rows([[0, 1, 2]], 3)
    assert cg_linear_minimizer([0.4], single).tolist() == [1.0]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lmo_exact_on_degree_two_checks(seed):
    # degree-2 checks are graph edges; acyclic subsets form a graphic matroid
    rng = np.random.default_rng(seed)
    N = int(rng.integers(3, 6))
    pairs = [(a, b) for a in range(N) for b in range(a + 1, N)]
    pick = rng.choice(len(pairs), size=int(rng.integers(2, min(7, len(pairs)) + 1)), replace=False)
    rows = [pairs[k] for k in pick]
    used = sorted({v for r in rows for v in r})
    remap = {v: k for k, v in enumerate(used)}
    code = ParityCheckMatrix.from_rows([[remap[v] for v in r] for r in rows], len(used))
    I = rng.random(code.M)
    rho = cg_linear_minimizer(I, code)
    best = best_acyclic_selection(code.rows, code.N, I)
    assert float(I[rho == 1.0].sum()) == pytest.approx(sum(I[list(best)]), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lmo_output_is_maximal_forest(seed):
    rng = np.random.default_rng(seed)
    rows = [sorted(rng.choice(6, size=int(rng.integers(2, 4)), replace=False)) for _ in range(5)]
    code = ParityCheckMatrix.from_rows(rows, 6) if all(any(v in r for r in rows) for v in range(6)) else None
    if code is None:
        return
    rho = cg_linear_minimizer(rng.random(5), code)
    kept = [i for i in range(5) if rho[i] == 1.0]
    sub = ParityCheckMatrix.from_rows([code.rows[i] for i in kept] + [[v] for v in range(6)], 6)
    assert math.isinf(girth(sub))
    for i in set(range(5)) - set(kept):
        sub2 = ParityCheckMatrix.from_rows([code.rows[k] for k in kept + [i]] + [[v] for v in range(6)], 6)
        assert not math.isinf(girth(sub2))


# ------------------------------------------------------------- cg_update


def _frozen(I):
    I = np.asarray(I, dtype=float)
    return lambda rho: (-float(np.asarray(rho) @ I), I)


def test_cg_update_zero_direction():
    rho = np.array([0.5, 0.7])
    step = cg_update(rho, rho, np.array([0.2, 0.1]), -1.0, _frozen([0.2, 0.1]))
    assert np.array_equal(step.rho, rho) and step.step == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3),
       st.lists(st.floats(0.1, 1.0), min_size=3, max_size=3),
       st.floats(-5, 0))
def test_cg_update_frozen_step_is_endpoint(I, rho, z):
    I = np.array(I)
    rho = np.array(rho)
    star = cg_linear_minimizer(I, SIX_CYCLE)
    assume(abs(float(I @ (star - rho))) > 1e-9)
    step = cg_update(rho, star, I, z, _frozen(I))
    assert step.step in (0.0, 1.0)
    assert step.z >= z
    assert step.f <= -float(rho @ I) + 1e-12


def test_optimize_acyclic_subgraph_returns_ones(tree_code):
    sub = expand_subgraphs(tree_code, 10)[0]
    obj = SubgraphObjective(tree_code, sub, design_llrs(tree_code.N, 2.0, 0.5, 2, 0))
    res = optimize_subgraph(obj, 0.5667)
    assert np.allclose(res.rho, 1.0) and res.converged and res.recursions <= 2


@pytest.mark.parametrize("kind", SubgraphObjective.KINDS)
def test_ekar_histories_are_monotone(code96, kind):
    subs = expand_subgraphs(code96, 2)[:2]
    for r in ekar_optimize(code96, subs, 0.5667, n_samples=2, max_recursions=15, kind=kind):
        assert isinstance(r, EkarResult)
        f, z = np.array(r.f_history), np.array(r.z_history)
        assert np.all(np.diff(f) <= 1e-12)
        assert np.all(np.diff(z[1:]) >= 0)
        assert np.all((r.rho >= RHO_MIN - 1e-12) & (r.rho <= 1.0))


def test_objective_kind_validated(code96):
    sub = expand_subgraphs(code96, 1)[0]
    with pytest.raises(FapConfigError):
        SubgraphObjective(code96, sub, np.zeros((1, code96.N)), kind="other")


def test_leaf_augmented_code(code96):
    sub = expand_subgraphs(code96, 2)[0]
    code, origin = leaf_augmented_code(code96, sub)
    assert code.M == sub.L
    assert np.array_equal(code.check_degrees, code96.check_degrees[sub.checks])
    assert girth(code) == sub.local_girth
    assert set(origin[len(sub.variables):]) <= set(range(code96.N))


# ------------------------------------------------------------- selection, persistence


def test_lift_all_ones_reproduces_bp(code96):
    sub = expand_subgraphs(code96, 2)[0]
    r = EkarResult(0, sub.checks, np.ones(sub.L), True, 1)
    rho = lift(r, code96.M)
    assert np.array_equal(rho, np.ones(code96.M))
    llr = design_llrs(code96.N, 1.0, 0.5, 1, 9)[0]
    a = ReweightedDecoder(code96, rho).run(llr, 10)
    b = ReweightedDecoder(code96, 1.0).run(llr, 10)
    assert a[:2] == b[:2] and np.array_equal(a[4], b[4])


def test_select_single_and_tie(code96):
    one = np.ones(code96.M)
    s = select_best_fap(code96, [one], frames=20)
    assert s.index == 0 and np.array_equal(s.rho, one)
    s2 = select_best_fap(code96, [one.copy(), one], frames=20)
    assert s2.index == 0 and s2.fer[0] == s2.fer[1]


def test_select_is_deterministic(code96):
    cands = [np.ones(code96.M), np.full(code96.M, 0.6)]
    a = select_best_fap(code96, cands, 2.0, 200, seed=4)
    b = select_best_fap(code96, cands, 2.0, 200, seed=4)
    assert a.index == b.index and a.fer == b.fer and a.mean_iters == b.mean_iters


def test_rho_round_trip(tmp_path, code96):
    p = tmp_path / "rho.json"
    rho = np.linspace(0.2, 1.0, code96.M)
    save_rho(p, rho, "ckar", {"alpha": 0.85}, code96)
    assert np.array_equal(load_rho(p, code96), rho)
    assert json.loads(p.read_text())["code"]["digest"] == code96.digest()
    other = ParityCheckMatrix.from_rows([[0, 1]] * 1, 2)
    with pytest.raises(ValueError):
        load_rho(p, other)
