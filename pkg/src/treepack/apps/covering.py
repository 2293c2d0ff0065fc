"""Covering-flavored adapters: Steiner tree cover and colorful orienteering.

Both maximize coverage under a cost budget by guessing the optimum coverage
and scanning it downward; the first guess the solver can realize within
budget wins.  Coverage caps (one incoming unit per terminal, one use per
color) are packing rows, so the count actually achieved is the guess divided
by the observed violation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..core import AdditiveDpInstance, Choice, Problem
from ..rounding import RoundingParams, solve_additive_dp
from .paths import length_rows


# ---------------------------------------------------------------------------
# Steiner tree cover


def steiner_dp(g, r, terminals, o, w_max):
    """Instance whose solutions are edge multisets of total weight exactly
    reachable below (r, o, w_max): reachable-from-r multigraphs with o units
    of incoming weight on terminals.

    Subproblem (v, o, w); choices either drop a unit of the weight budget or
    pick an edge (v, u) and split budget and coverage between the remainder
    at v and the subtree hanging at u.  The edge itself contributes the
    coverage of its head, so (v, 0, 0) = {zero} is the only base.
    """
    K = set(terminals)
    out = g.out_edges()

    def pid(v, o_, w_):
        return "%s|%d|%d" % (v, o_, w_)

    problems = []
    seen = set()
    todo = [(r, o, w_max)]
    while todo:
        v, oo, ww = todo.pop()
        if (v, oo, ww) in seen:
            continue
        seen.add((v, oo, ww))
        if ww == 0:
            problems.append(Problem(id=pid(v, oo, 0), base=True,
                                    x={} if oo == 0 else None))
            continue
        ch = [Choice(fixed={}, children=(pid(v, oo, ww - 1),))]
        todo.append((v, oo, ww - 1))
        for i in out[v]:
            u = g.edges[i].v
            hit = 1 if u in K else 0
            for o1 in range(oo - hit + 1):
                for w1 in range(ww):
                    ch.append(Choice(fixed={i: 1},
                                     children=(pid(v, o1, w1),
                                               pid(u, oo - o1 - hit,
                                                   ww - w1 - 1))))
                    todo.append((v, o1, w1))
                    todo.append((u, oo - o1 - hit, ww - w1 - 1))
        problems.append(Problem(id=pid(v, oo, ww), base=False,
                                choices=tuple(ch)))
    rows = [{i: 1.0 for i in g.in_edges()[t]} for t in terminals]
    rows = [row for row in rows if row] + length_rows(g)
    inst = AdditiveDpInstance(d=len(g.edges), m=len(rows),
                              root=pid(r, o, w_max), problems=problems,
                              packing=rows, cost=[e.cost for e in g.edges])
    return inst, 2 * w_max + 1


def extract_arborescence(g, r, x):
    """Inclusion-wise minimal out-arborescence inside the multigraph x: BFS
    from r keeping the first edge into each newly reached vertex."""
    out = g.out_edges()
    tree = []
    seen = {r}
    queue = [r]
    while queue:
        v = queue.pop(0)
        for i in out[v]:
            if x.get(i, 0) >= 1 and g.edges[i].v not in seen:
                seen.add(g.edges[i].v)
                tree.append(i)
                queue.append(g.edges[i].v)
    return tree, seen


@dataclass
class SteinerResult:
    status: str
    tree: list = field(default_factory=list)     # arborescence edge ids
    covered: int = 0                             # distinct terminals reached
    guessed: int = 0
    cost: float = 0.0
    length_sums: list = field(default_factory=list)
    diagnostics: object = None
    solve: object = None


def steiner_cover(g, r, terminals, B, eps=0.5, params=None, w_max=None):
    """Out-arborescence rooted at r of cost <= B covering as many terminals
    as the guess scan can certify; terminal in-degree rows may be violated
    by the usual factor (then fewer distinct terminals are covered)."""
    params = params or RoundingParams(mode="cost-preserving")
    w_max = w_max if w_max is not None else len(g.vertices)
    for o in range(len(terminals), 0, -1):
        inst, delta = steiner_dp(g, r, terminals, o, w_max)
        res = solve_additive_dp(inst, delta, eps=eps, params=params)
        if res.status != "ok":
            continue
        x = res.witness.vector
        cost = sum(g.edges[i].cost * u for i, u in x.items())
        if cost > B + 1e-9:
            continue
        tree, reached = extract_arborescence(g, r, x)
        sums = [sum(row.get(i, 0) * u for i, u in x.items())
                for row in inst.packing]
        return SteinerResult(status="ok", tree=tree,
                             covered=len(reached & set(terminals)),
                             guessed=o, cost=cost, length_sums=sums,
                             diagnostics=res.diagnostics, solve=res)
    return SteinerResult(status="empty")


# ---------------------------------------------------------------------------
# colorful orienteering


def orienteering_dp(g, s, t, o, levels):
    """Instance over (path-edge, color-credit) dimensions: walks from s to t
    of at most `levels` edges claiming o distinct-ish color credits.  A color
    credit can be taken or skipped on every edge; rows y_b <= 1 push the
    solver toward distinct colors."""
    colors = sorted({e.color for e in g.edges if e.color is not None})
    cdim = {b: len(g.edges) + idx for idx, b in enumerate(colors)}
    out = g.out_edges()

    def pid(v, l, j):
        return "%s@%d|%d" % (v, l, j)

    problems = []
    seen = set()
    todo = [(s, 0, o)]
    while todo:
        v, l, j = todo.pop()
        if (v, l, j) in seen:
            continue
        seen.add((v, l, j))
        if v == t and j == 0:
            problems.append(Problem(id=pid(v, l, 0), base=True, x={}))
            continue
        ch = []
        if l < levels:
            for i in out[v]:
                e = g.edges[i]
                ch.append(Choice(fixed={i: 1},
                                 children=(pid(e.v, l + 1, j),)))
                todo.append((e.v, l + 1, j))
                if j >= 1 and e.color is not None:
                    ch.append(Choice(fixed={i: 1, cdim[e.color]: 1},
                                     children=(pid(e.v, l + 1, j - 1),)))
                    todo.append((e.v, l + 1, j - 1))
        problems.append(Problem(id=pid(v, l, j), base=not ch, x=None,
                                choices=tuple(ch)))
    rows = [{cdim[b]: 1.0} for b in colors]
    d = len(g.edges) + len(colors)
    inst = AdditiveDpInstance(d=d, m=len(rows), root=pid(s, 0, o),
                              problems=problems, packing=rows,
                              cost=[e.cost for e in g.edges]
                                   + [0.0] * len(colors))
    return inst, levels + 1


@dataclass
class OrienteeringResult:
    status: str
    walk: list = field(default_factory=list)   # edge ids, in order
    colors: int = 0                            # distinct colors on the walk
    guessed: int = 0
    cost: float = 0.0
    diagnostics: object = None
    solve: object = None


def colorful_orienteering(g, s, t, B, eps=0.5, params=None, levels=None):
    """s-t walk of cost <= B covering many distinct colors (guess scanned
    downward; distinct count >= guess / maxViolation)."""
    from .paths import _edges_of_witness
    params = params or RoundingParams(mode="cost-preserving")
    levels = levels if levels is not None else len(g.vertices) ** 2
    ncol = len({e.color for e in g.edges if e.color is not None})
    for o in range(ncol, 0, -1):
        inst, delta = orienteering_dp(g, s, t, o, levels)
        if not any(p.id == inst.root and not p.base for p in inst.problems):
            continue
        res = solve_additive_dp(inst, delta, eps=eps, params=params)
        if res.status != "ok":
            continue
        cost = sum(g.edges[i].cost * u
                   for i, u in res.witness.vector.items()
                   if i < len(g.edges))
        if cost > B + 1e-9:
            continue
        walk = [i for i in _edges_of_witness(inst, res.witness)
                if i < len(g.edges)]
        return OrienteeringResult(
            status="ok", walk=walk,
            colors=len({g.edges[i].color for i in walk
                        if g.edges[i].color is not None}),
            guessed=o, cost=cost, diagnostics=res.diagnostics, solve=res)
    return OrienteeringResult(status="empty")
