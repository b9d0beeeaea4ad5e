from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clauseroute.dirkey import Mode, classify, compile_key
from clauseroute.solver import (
    MaxSmtInstance,
    SizeGuardError,
    build_instance,
    dump_instance,
    parse_instance,
    solve,
    solve_oracle,
)

PD_CHEAPER_OUTPUT = "I want a model with cheaper output prices."


def brute_force(inst: MaxSmtInstance) -> float:
    """Objective of the best feasible assignment by plain enumeration (-inf if none)."""
    best = float("-inf")
    for x in itertools.product((0, 1), repeat=inst.M):
        x = np.array(x)
        if inst.mode is Mode.COMPLETENESS:
            if not np.array_equal(x, np.all(inst.hard_lits == 1, axis=1).astype(int)):
                continue
        else:
            if any(x[m] and not inst.hard_lits[m].all() for m in range(inst.M)):
                continue
            if not inst.L <= x.sum() <= inst.U:
                continue
        value = sum(x[m] * inst.soft_lits[m, j] * inst.soft_weights[j]
                    for m in range(inst.M) for j in range(len(inst.soft_weights)))
        value -= inst.penalty * x.sum()
        best = max(best, value)
    return best


@st.composite
def instances(draw, max_m=8, mode=Mode.SHORTLIST):
    M = draw(st.integers(1, max_m))
    n_hard = draw(st.integers(0, 3))
    n_soft = draw(st.integers(0, 4))
    bits = st.integers(0, 1)
    hard = np.array(draw(st.lists(bits, min_size=M * n_hard, max_size=M * n_hard)), dtype=np.uint8)
    soft = np.array(draw(st.lists(bits, min_size=M * n_soft, max_size=M * n_soft)), dtype=np.uint8)
    weights = draw(st.lists(st.floats(0, 5), min_size=n_soft, max_size=n_soft))
    U = draw(st.integers(0, M))
    L = draw(st.integers(0, U))
    penalty = draw(st.floats(0, 2))
    return MaxSmtInstance(M, hard.reshape(M, n_hard), soft.reshape(M, n_soft), weights, L, U, penalty, mode)


def test_three_endpoint_example():
    # u = w - lambda = (2, -1, 0.5)
    inst = MaxSmtInstance(3, np.zeros((3, 0)), np.eye(3), [3.0, 0.0, 1.5], 1, 3, 1.0)
    sel = solve(inst)
    np.testing.assert_allclose(sel.per_endpoint_utility, [2, -1, 0.5])
    assert sel.indices == [0, 2] and sel.objective == pytest.approx(2.5)
    assert brute_force(inst) == pytest.approx(2.5)


def test_all_violate_hard_is_infeasible():
    inst = MaxSmtInstance(4, np.zeros((4, 1)), np.zeros((4, 0)), [], 1, 4, 0.25)
    sel = solve(inst)
    assert not sel.feasible and sel.size == 0
    assert not solve_oracle(inst).feasible


def test_vacuous_zero_penalty_picks_empty_set():
    inst = MaxSmtInstance(5, np.zeros((5, 0)), np.zeros((5, 0)), [], 0, 5, 0.0)
    for sel in (solve(inst), solve_oracle(inst)):
        assert sel.size == 0 and sel.objective == 0.0


def test_budget_forces_negative_selection():
    inst = MaxSmtInstance(1, np.ones((1, 1)), np.zeros((1, 0)), [], 1, 1, 0.3)
    for sel in (solve(inst), solve_oracle(inst)):
        assert sel.indices == [0] and sel.objective == pytest.approx(-0.3)


def test_ties_go_to_lowest_index():
    inst = MaxSmtInstance(4, np.zeros((4, 0)), np.zeros((4, 0)), [], 2, 4, 0.5)
    assert solve(inst).indices == [0, 1]
    assert solve_oracle(inst).indices == [0, 1]


def test_upper_budget_truncates_by_utility():
    inst = MaxSmtInstance(4, np.zeros((4, 0)), np.eye(4), [1.0, 3.0, 2.0, 3.0], 0, 2, 0.0)
    assert solve(inst).indices == [1, 3]


def test_oracle_size_guard():
    inst = MaxSmtInstance(21, np.zeros((21, 0)), np.zeros((21, 0)), [], 0, 21, 0.0)
    with pytest.raises(SizeGuardError):
        solve_oracle(inst)


def test_invalid_instances_rejected():
    with pytest.raises(ValueError):
        MaxSmtInstance(2, np.zeros((2, 0)), np.zeros((2, 0)), [], 2, 1, 0.0)
    with pytest.raises(ValueError):
        MaxSmtInstance(2, np.zeros((2, 0)), np.ones((2, 1)), [-1.0], 0, 2, 0.0)
    with pytest.raises(ValueError):
        MaxSmtInstance(2, np.full((2, 1), 2), np.zeros((2, 0)), [], 0, 2, 0.0)


@settings(max_examples=300, deadline=None)
@given(instances())
def test_oracle_matches_plain_enumeration(inst):
    assert solve_oracle(inst).objective == pytest.approx(brute_force(inst), abs=1e-9)


@settings(max_examples=1000, deadline=None)
@given(instances(max_m=12))
def test_solve_matches_oracle(inst):
    fast, slow = solve(inst), solve_oracle(inst)
    assert fast.feasible == slow.feasible
    if not fast.feasible:
        return
    assert fast.objective == pytest.approx(slow.objective, abs=1e-9)
    chosen = fast.chosen.astype(bool)
    assert inst.L <= chosen.sum() <= inst.U
    assert np.all(inst.hard_lits[chosen] == 1)
    assert fast.objective == pytest.approx(float(fast.chosen @ inst.utilities()), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(instances(max_m=10, mode=Mode.COMPLETENESS))
def test_completeness_chooses_feasible_set(inst):
    sel = solve(inst)
    assert np.array_equal(sel.chosen.astype(bool), np.all(inst.hard_lits == 1, axis=1))
    assert sel.objective == pytest.approx(solve_oracle(inst).objective, abs=1e-9)


@settings(max_examples=300, deadline=None)
@given(instances(), st.floats(0, 2))
def test_larger_penalty_never_grows_shortlist(inst, extra):
    raised = MaxSmtInstance(inst.M, inst.hard_lits, inst.soft_lits, inst.soft_weights, inst.L, inst.U,
                            inst.penalty + extra, inst.mode)
    assert solve(raised).size <= solve(inst).size


@settings(max_examples=300, deadline=None)
@given(instances(), st.sampled_from([0.5, 2.0, 3.0, 10.0]))
def test_weight_scaling_invariance(inst, c):
    scaled = MaxSmtInstance(inst.M, inst.hard_lits, inst.soft_lits, inst.soft_weights * c, inst.L, inst.U,
                            inst.penalty * c, inst.mode)
    a, b = solve(inst), solve(scaled)
    assert np.array_equal(a.chosen, b.chosen)
    if a.feasible:
        assert b.objective == pytest.approx(c * a.objective, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(instances())
def test_dump_round_trip(inst):
    again = parse_instance(dump_instance(inst))
    assert again == inst
    assert dump_instance(again) == dump_instance(inst)


def test_nf_instance_has_zero_width(zoo):
    inst = build_instance(compile_key(classify("NONE"), zoo), zoo, None)
    assert inst.hard_lits.shape == (25, 0) and inst.soft_lits.shape == (25, 0)


def test_cheaper_output_vs_gpt4_column(zoo):
    current = zoo.find("GPT-4")
    inst = build_instance(compile_key(classify(PD_CHEAPER_OUTPUT), zoo), zoo, current)
    expected = [int(e["Output Price"] < 60) for e in zoo.endpoints]
    assert inst.hard_lits[:, 0].tolist() == expected
    assert sum(expected) == 24


def test_cheaper_cached_vs_o4_mini_column(zoo):
    current = zoo.find("o4-mini")
    inst = build_instance(compile_key(classify("I want a model with cheaper cached input."), zoo), zoo, current)
    expected = [int(e["Cached Price"] is not None and e["Cached Price"] < 0.28) for e in zoo.endpoints]
    assert inst.hard_lits[:, 0].tolist() == expected
    assert inst.hard_lits[0, 0] == 0  # ChatGPT-4o has no cached price


def test_completeness_vs_chatgpt4o_is_target_set(zoo):
    current = zoo.find("ChatGPT-4o")
    cs = compile_key(classify(PD_CHEAPER_OUTPUT), zoo, Mode.COMPLETENESS)
    sel = solve(build_instance(cs, zoo, current))
    expected = [i for i, e in enumerate(zoo.endpoints) if e["Output Price"] < 15]
    assert sel.indices == expected


def test_gd_shortlist_from_gpt4_excludes_gpt4(zoo):
    current = zoo.find("GPT-4")
    cs = compile_key(classify("I want a cheaper model."), zoo, Mode.SHORTLIST)
    sel = solve(build_instance(cs, zoo, current))
    assert current.id - 1 not in sel.indices
    assert all(zoo.endpoints[i]["Output Price"] < 60 for i in sel.indices)
    assert sel.per_endpoint_utility[current.id - 1] == pytest.approx(-0.25)
