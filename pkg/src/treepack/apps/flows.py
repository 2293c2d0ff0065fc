"""Minimum-cost integer generalized flow (flow gains on edges).

Subproblem (v, f, w): flows of total size at most w whose only excess is f
units at v, with every used edge reachable from v.  Sending one unit on an
edge e = (v, u) splits the budget between the rest of v's excess and the
g(e) units appearing at u.  Capacities become packing rows x_e / cap_e <= 1,
so the solver may overrun them by its violation factor (Theorem-style
"alpha-approximate" flow); conservation is exact and re-verified here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..core import AdditiveDpInstance, Choice, Problem
from ..rounding import RoundingParams, solve_additive_dp


def flow_dp(g, s, F, W):
    """(instance, delta) for the generalized-flow DP; cap-0 edges dropped."""
    keep = [i for i, e in enumerate(g.edges) if e.cap > 0]
    out = {v: [] for v in g.vertices}
    for i in keep:
        out[g.edges[i].u].append(i)
    rows = [{i: 1.0 / g.edges[i].cap} for i in keep]

    def pid(v, f, w):
        return "%s|%d|%d" % (v, f, w)

    problems = []
    seen = set()
    todo = [(s, F, W)]
    while todo:
        v, f, w = todo.pop()
        if (v, f, w) in seen:
            continue
        seen.add((v, f, w))
        if w == 0:
            problems.append(Problem(id=pid(v, f, 0), base=True,
                                    x={} if f == 0 else None))
            continue
        ch = [Choice(fixed={}, children=(pid(v, f, w - 1),))]
        todo.append((v, f, w - 1))
        if f >= 1:
            for i in out[v]:
                e = g.edges[i]
                for w1 in range(w):
                    ch.append(Choice(fixed={i: 1},
                                     children=(pid(v, f - 1, w1),
                                               pid(e.v, e.gain, w - w1 - 1))))
                    todo.append((v, f - 1, w1))
                    todo.append((e.v, e.gain, w - w1 - 1))
        problems.append(Problem(id=pid(v, f, w), base=False,
                                choices=tuple(ch)))
    inst = AdditiveDpInstance(d=len(g.edges), m=len(rows), root=pid(s, F, W),
                              problems=problems, packing=rows,
                              cost=[e.cost for e in g.edges])
    return inst, 3 * W


def check_conservation(g, s, F, flow):
    """Excess at every vertex: out minus gain-weighted in.  Returns the dict
    of nonzero mismatches (empty means the flow is exactly conserved)."""
    exc = {v: 0 for v in g.vertices}
    for i, units in flow.items():
        e = g.edges[i]
        exc[e.u] += units
        exc[e.v] -= e.gain * units
    exc[s] -= F
    return {v: x for v, x in exc.items() if x}


@dataclass
class FlowResult:
    status: str
    flow: dict = field(default_factory=dict)    # edge id -> units
    cost: float = 0.0
    cap_violation: float = 0.0                  # max x_e / cap_e
    diagnostics: object = None
    solve: object = None


def generalized_flow(g, s, F, W, eps=0.5, params=None):
    """Integer generalized flow with excess F at s and at most W total units;
    cost-minimizing, capacities soft (violation factor reported)."""
    if F == 0:
        return FlowResult(status="ok", flow={})
    if W == 0:
        return FlowResult(status="infeasible")
    params = params or RoundingParams(mode="cost-preserving")
    inst, delta = flow_dp(g, s, F, W)
    res = solve_additive_dp(inst, delta, eps=eps, params=params)
    if res.status != "ok":
        return FlowResult(status="infeasible", solve=res)
    flow = dict(res.witness.vector)
    bad = check_conservation(g, s, F, flow)
    if bad:
        raise AssertionError("flow conservation broken at %r" % bad)
    return FlowResult(status="ok", flow=flow,
                      cost=sum(g.edges[i].cost * u for i, u in flow.items()),
                      cap_violation=max((u / g.edges[i].cap
                                         for i, u in flow.items()),
                                        default=0.0),
                      diagnostics=res.diagnostics, solve=res)
