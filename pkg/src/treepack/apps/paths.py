"""Robust s-t path: the textbook path DP with per-edge length budgets.

On a DAG the DP has one subproblem per vertex.  General digraphs are
handled by tracking the current level, which bounds walks at |V| edges and
makes every directed path simple in the implicit layered graph.  The
solution vector always lives in the original edge space, so packing rows
read straight off the per-edge length vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..core import AdditiveDpInstance, Choice, Problem
from ..rounding import RoundingParams, solve_additive_dp
from .graphs import topo_sort


def _num_lengths(g):
    return max((len(e.lengths) for e in g.edges), default=0)


def length_rows(g, extra=0):
    """Sparse packing rows from the edges' length vectors."""
    k = _num_lengths(g)
    rows = [dict() for _ in range(k + extra)]
    for i, e in enumerate(g.edges):
        for j, a in enumerate(e.lengths):
            if a:
                rows[j][i] = a
    return rows


def _reaches(g, t):
    """Vertices with a directed path to t."""
    inc = g.in_edges()
    seen = {t}
    stack = [t]
    while stack:
        v = stack.pop()
        for i in inc[v]:
            u = g.edges[i].u
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return seen


def path_dp(g, s, t, packing=None, levels=None):
    """(instance, delta) for the s-t path DP.

    DAGs get the plain one-problem-per-vertex DP; anything with a cycle gets
    level-stamped problems v@l with l < levels (default |V|).  packing
    overrides the rows derived from edge lengths.
    """
    if s == t:
        raise ValueError("s and t must be distinct")
    good = _reaches(g, t)
    if s not in good:
        return None, 0
    out = g.out_edges()
    rows = packing if packing is not None else length_rows(g)
    cost = [e.cost for e in g.edges]
    try:
        topo_sort(g)
        dag = True
    except ValueError:
        dag = False
    problems = []
    if dag:
        for v in g.vertices:
            if v not in good:
                continue
            if v == t:
                problems.append(Problem(id=v, base=True, x={}))
                continue
            ch = tuple(Choice(fixed={i: 1}, children=(g.edges[i].v,))
                       for i in out[v] if g.edges[i].v in good)
            # a dead end becomes an infeasible base; preprocessing prunes it
            problems.append(Problem(id=v, base=not ch, x=None, choices=ch))
        root, delta = s, len(good)
    else:
        L = levels if levels is not None else len(g.vertices)
        for l in range(L + 1):
            for v in g.vertices:
                if v not in good:
                    continue
                pid = "%s@%d" % (v, l)
                if v == t:
                    problems.append(Problem(id=pid, base=True, x={}))
                    continue
                ch = tuple(Choice(fixed={i: 1},
                                  children=("%s@%d" % (g.edges[i].v, l + 1),))
                           for i in out[v]
                           if l < L and g.edges[i].v in good)
                problems.append(Problem(id=pid, base=not ch, x=None,
                                        choices=ch))
        root, delta = "%s@0" % s, L + 1
    inst = AdditiveDpInstance(d=len(g.edges), m=len(rows), root=root,
                              problems=problems, packing=rows, cost=cost)
    return inst, delta


@dataclass
class PathResult:
    status: str                       # "ok" | "infeasible"
    edges: list = field(default_factory=list)
    cost: float = 0.0
    length_sums: list = field(default_factory=list)
    diagnostics: object = None
    solve: object = None


def robust_shortest_path(g, s, t, eps=0.5, params=None, delta=None,
                         packing=None, levels=None):
    """An s-t path of cost at most the LP optimum; length budgets may be
    exceeded by the rounding's violation factor (reported, never hidden)."""
    inst, d0 = path_dp(g, s, t, packing=packing, levels=levels)
    if inst is None:
        return PathResult(status="infeasible")
    params = params or RoundingParams(mode="cost-preserving")
    res = solve_additive_dp(inst, delta if delta is not None else d0,
                            eps=eps, params=params)
    if res.status != "ok":
        return PathResult(status="infeasible", solve=res)
    edges = _edges_of_witness(inst, res.witness)
    sums = [sum(row.get(i, 0) for i in edges) for row in inst.packing]
    return PathResult(status="ok", edges=edges,
                      cost=sum(g.edges[i].cost for i in edges),
                      length_sums=sums, diagnostics=res.diagnostics,
                      solve=res)


def _edges_of_witness(inst, witness):
    edges = []
    node = witness.root
    while True:
        p = inst.problem(node.problem_id)
        if p.base:
            break
        ch = p.choices[node.choice_index]
        edges.extend(sorted(ch.fixed))
        if len(node.children) != 1:
            raise ValueError("path witness is not a chain")
        node = node.children[0]
    return edges
