import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treepack import oracle
from treepack.core import check_packing, vec_dot
from treepack.rounding import (RoundingParams, alpha_schedule,
                               default_k_bits, semi_random_round,
                               solve_additive_dp, violation_bound)

from conftest import random_instance, tiny_instance


def test_alpha_schedule_endpoints():
    a = alpha_schedule(0.5)
    assert a[-1] == pytest.approx(1.25, abs=1e-15)
    assert a[1] == pytest.approx(math.exp(0.25), abs=1e-12)


def test_alpha_schedule_bound():
    for eps in (0.5, 1 / 3, 0.25):
        k = math.ceil(1 / eps)
        a = alpha_schedule(eps)
        for i in range(1, k + 1):
            assert a[i] <= 1 + 1 / (i + k) + 1e-12


def _random_partition(r, n):
    groups, lam, i = [], [], 0
    while i < n:
        g = list(range(i, min(n, i + r.randint(1, 4))))
        w = [r.random() + 1e-9 for _ in g]
        s = sum(w)
        lam.extend(x / s for x in w)
        groups.append(g)
        i = g[-1] + 1
    return groups, lam


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_semi_random_round_properties(seed):
    r = random.Random(seed)
    n = r.randint(2, 10)
    groups, lam = _random_partition(r, n)
    cost = [r.uniform(-2, 2) for _ in range(n)]
    rng = np.random.default_rng(seed)
    mu = semi_random_round(lam, groups, 12, cost, rng)
    assert all(m >= 0 for m in mu)
    for g in groups:
        assert sum(mu[i] for i in g) == 1
    assert sum(m * c for m, c in zip(mu, cost)) <= \
        sum(l * c for l, c in zip(lam, cost)) + 1e-7


def test_semi_random_round_rejects_fractional_group():
    with pytest.raises(ValueError):
        semi_random_round([0.4], [[0]], 8, [0.0], np.random.default_rng(0))


def test_default_k_bits():
    assert 1 << default_k_bits(1, 1) >= 16
    assert 1 << default_k_bits(7, 13) >= 16 * 7 * 13


def test_violation_bound_value():
    # the soft regression ceiling used by the violation criterion
    assert violation_bound(16, 0.5, 8) == pytest.approx(
        64 * (16 ** 0.5 / 0.5) * math.log(10))


def test_pipeline_tiny_instance_cost_free():
    inst = tiny_instance()
    res = solve_additive_dp(inst, 5, eps=0.5,
                            params=RoundingParams(trials=5, seed=1))
    assert res.status == "ok"
    # the only packing-feasible solution
    assert res.witness.vector == {1: 2}
    assert res.diagnostics.max_violation == pytest.approx(1.0)


def test_pipeline_infeasible_reports_status():
    # every solution has x0 + x1 >= 2, so a unit row over both is hopeless
    inst = tiny_instance()
    inst.packing = [{0: 1.0, 1: 1.0}]
    res = solve_additive_dp(inst, 5, eps=0.5)
    assert res.status == "lp-infeasible"


def test_witness_indices_refer_to_the_caller_instance():
    # preprocessing strips dead choices and renumbers the rest; the returned
    # witness must still evaluate against the instance the caller passed in
    from treepack.core import (AdditiveDpInstance, Choice, Problem,
                               evaluate_witness)
    base = tiny_instance()
    probs = []
    for p in base.problems:
        if p.id == "s":
            dead = Choice(fixed={0: 1}, children=("gone",))
            p = Problem(id="s", base=False, choices=(dead,) + p.choices)
        probs.append(p)
    probs.append(Problem(id="gone", base=True, x=None))
    inst = AdditiveDpInstance(d=base.d, m=base.m, root=base.root,
                              problems=probs, packing=base.packing,
                              cost=base.cost)
    res = solve_additive_dp(inst, 5, params=RoundingParams(seed=1, trials=3))
    assert res.status == "ok"
    assert evaluate_witness(inst, res.witness.root) == res.witness.vector


def test_pipeline_reproducible_from_seed():
    inst = tiny_instance()
    a = solve_additive_dp(inst, 5, params=RoundingParams(seed=3, trials=7))
    b = solve_additive_dp(inst, 5, params=RoundingParams(seed=3, trials=7))
    assert a.witness.vector == b.witness.vector
    assert a.diagnostics.to_json() == b.diagnostics.to_json()


@pytest.mark.parametrize("mode", ["cost-free", "cost-preserving"])
def test_pipeline_random_instances_verify(mode):
    done = 0
    for seed in range(14):
        rng = random.Random(900 + seed)
        inst = random_instance(rng, n_max=5, d_max=4, m_max=3)
        delta = rng.randint(1, 4)
        res = solve_additive_dp(inst, delta, eps=0.5,
                                params=RoundingParams(mode=mode, trials=3,
                                                      seed=seed))
        if res.status != "ok":
            continue
        done += 1
        w = res.witness
        rows, worst = check_packing(inst, w.vector)
        assert res.diagnostics.max_violation == pytest.approx(worst)
        if mode == "cost-preserving":
            assert vec_dot(inst.cost, w.vector) <= res.lp_objective + 1e-6
    assert done >= 5


def test_pipeline_solution_is_in_reachable_set():
    # whatever comes out must be a vector the DP can actually produce
    from treepack.core import vec_key
    for seed in (901, 905, 908):
        rng = random.Random(seed)
        inst = random_instance(rng, n_max=5, d_max=4, m_max=3)
        res = solve_additive_dp(inst, 3, params=RoundingParams(seed=0,
                                                               trials=2))
        if res.status != "ok":
            continue
        red = res.reduction
        assert vec_key(res.witness.vector) in oracle.pbtl_vector_set(red.pbtl)
