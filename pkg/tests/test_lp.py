import io
import os
import random
import stat
import sys
from fractions import Fraction

import pytest

from treepack import oracle
from treepack.core import check_packing, vec_dot, vec_from_key
from treepack.lp import (CollapsedTree, LpModel, build_compact_lp,
                         build_convex_hull_system, build_state_lp, dump_lp,
                         normalize_epsilon, null_table, productive_table,
                         solve_lp)
from treepack.reduce import BOT, PbtlInstance, fast_height, reduce_chain

from conftest import random_instance


def one_label_pbtl():
    """One label, one triple, H=2: exactly one labeling (all a's, vector 4)."""
    return PbtlInstance(H=2, labels=["a"], root="a", vectors={"a": {0: 1}},
                        triples=[("a", "a", "a")], packing=[{0: 0.25}],
                        cost=[1.0], d=1, m=1)


def test_seven_vertex_paths_and_objective():
    pb = one_label_pbtl()
    pb2, eps2, coll, unpad = normalize_epsilon(pb, 0.5)
    assert pb2 is pb and coll.step == 1 and coll.layers == 2
    sol = build_compact_lp(coll, pb2, with_cost=True, prune=False)
    assert len(sol.paths) == 7  # root + 2 children + 4 grandchildren
    res = solve_lp(sol.model, "highs")
    assert res.status == "optimal"
    assert res.objective == pytest.approx(4.0, abs=1e-8)


def test_three_solvers_agree():
    pb = one_label_pbtl()
    _, _, coll, _ = normalize_epsilon(pb, 0.5)
    sol = build_compact_lp(coll, pb, with_cost=True, prune=False)
    r1 = solve_lp(sol.model, "highs")
    r2 = solve_lp(sol.model, "bundled")
    r3 = solve_lp(sol.model, "exact")
    assert r1.objective == pytest.approx(4.0, abs=1e-8)
    assert r2.objective == pytest.approx(4.0, abs=1e-8)
    assert r3.objective == Fraction(4)


def test_simplex_handles_infeasible_and_unbounded():
    m = LpModel()
    a = m.add_var(obj=1.0)
    m.add_row({a: 1.0}, "<=", -1.0)
    assert solve_lp(m, "bundled").status == "infeasible"
    m2 = LpModel()
    b = m2.add_var(obj=-1.0)
    m2.add_row({b: 0.0}, "<=", 1.0)
    assert solve_lp(m2, "bundled").status == "unbounded"


def test_dump_lp_and_external_solver(tmp_path):
    m = LpModel()
    a = m.add_var(obj=1.0)
    b = m.add_var(obj=0.0)
    m.add_row({a: 1.0, b: 1.0}, "==", 1.0)
    buf = io.StringIO()
    dump_lp(m, buf)
    text = buf.getvalue()
    assert "Minimize" in text and "x0" in text and "= 1" in text

    script = tmp_path / "fake_solver"
    script.write_text("#!/bin/sh\n"
                      "echo status optimal\n"
                      "echo objective 0\n"
                      "echo x0 0\n"
                      "echo x1 1\n")
    script.chmod(script.stat().st_mode | stat.S_IEXEC)
    res = solve_lp(m, "external:%s" % script)
    assert res.status == "optimal"
    assert res.x == [0.0, 1.0]


def test_productive_and_null_tables():
    pb = one_label_pbtl()
    prod = productive_table(pb)
    assert "a" in prod[0] and "a" in prod[2]
    null = null_table(pb)
    assert "a" not in null[2]  # its only vector is nonzero


def test_normalize_epsilon_pads_to_multiple():
    pb = one_label_pbtl()  # H=2
    pb2, eps2, coll, unpad = normalize_epsilon(pb, 1.0 / 3)
    assert eps2 == Fraction(1, 3)
    assert coll.H == 3 and coll.step == 1
    # the padded instance still has exactly the original vector set
    vecs = oracle.pbtl_vector_set(pb2)
    assert vecs == oracle.pbtl_vector_set(pb)


def test_hull_block_structure():
    pb = one_label_pbtl()
    _, _, coll, _ = normalize_epsilon(pb, 0.5)
    blk = build_convex_hull_system(coll, pb, "a", pb.H)
    assert blk.feasible
    assert sum(1 for _ in blk.root_keys) >= 1
    # child expressions cover both slots
    assert {s for (s, _) in blk.child_exprs} == {0, 1}


def _integer_optimum(inst, red):
    best = None
    for vk in oracle.pbtl_vector_set(red.pbtl):
        x = vec_from_key(vk)
        _, worst = check_packing(inst, x)
        if worst <= 1 + 1e-9:
            c = vec_dot(inst.cost, x)
            best = c if best is None else min(best, c)
    return best


@pytest.mark.parametrize("seed", range(10))
def test_compact_lp_lower_bounds_integer_optimum(seed):
    rng = random.Random(500 + seed)
    inst = random_instance(rng, n_max=5, d_max=4, m_max=3)
    delta = rng.randint(1, 4)
    red = reduce_chain(inst, delta, height_fn=fast_height)
    pb2, _, coll, _ = normalize_epsilon(red.pbtl, Fraction(1, red.pbtl.H))
    sol = build_compact_lp(coll, pb2, with_cost=True, prune=True)
    res = solve_lp(sol.model, "highs")
    sols = build_state_lp(coll, pb2, with_cost=True)
    ress = solve_lp(sols.model, "highs")
    best = _integer_optimum(inst, red)
    if best is None:
        assert res.status == "infeasible"
        assert ress.status == "infeasible"
    else:
        assert res.status == "optimal" and ress.status == "optimal"
        assert res.objective <= best + 1e-6
        # the aggregated LP relaxes the vertex one
        assert ress.objective <= res.objective + 1e-6
