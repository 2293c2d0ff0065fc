"""Bounded-repetition longest common subsequence.

One dimension per character pair (i, j) with a[i] == b[j].  Subproblems jump
straight from one matched pair to the previous one, so a length-k witness is
a chain of k match nodes plus a base -- keeping the witness-size budget at
2k+1 instead of growing with the string lengths.  Per-letter packing rows
(1/C on every pair of that letter) encode the repetition bound; the pipeline
may exceed them by its violation factor, which is reported per letter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..core import AdditiveDpInstance, Choice, Problem
from ..rounding import RoundingParams, solve_additive_dp


def lcs_dp(a, b, C, k):
    """Instance whose solutions are the common subsequences of length k.

    Problem (i, j, k) holds the subsequences of a[:i] / b[:j]; each choice
    picks the last matched pair (i', j') and recurses on (i'-1, j'-1, k-1).
    """
    n, m = len(a), len(b)
    pairs = [(i, j) for i in range(1, n + 1) for j in range(1, m + 1)
             if a[i - 1] == b[j - 1]]
    dim = {(i, j): t for t, (i, j) in enumerate(pairs)}
    letters = sorted({a[i - 1] for (i, j) in pairs})
    rows = [{dim[(i, j)]: 1.0 / C for (i, j) in pairs if a[i - 1] == z}
            for z in letters]

    def pid(i, j, kk):
        return "%d,%d,%d" % (i, j, kk)

    problems = []
    seen = set()
    todo = [(n, m, k)]
    while todo:
        i, j, kk = todo.pop()
        if (i, j, kk) in seen:
            continue
        seen.add((i, j, kk))
        if kk == 0:
            problems.append(Problem(id=pid(i, j, 0), base=True, x={}))
            continue
        ch = []
        for (ii, jj) in pairs:
            if ii <= i and jj <= j:
                ch.append(Choice(fixed={dim[(ii, jj)]: 1},
                                 children=(pid(ii - 1, jj - 1, kk - 1),)))
                todo.append((ii - 1, jj - 1, kk - 1))
        problems.append(Problem(id=pid(i, j, kk), base=not ch, x=None,
                                choices=tuple(ch)))
    inst = AdditiveDpInstance(d=len(pairs), m=len(rows), root=pid(n, m, k),
                              problems=problems, packing=rows,
                              cost=[0.0] * len(pairs))
    return inst, pairs, letters


@dataclass
class LcsResult:
    length: int
    subsequence: str
    pairs: list = field(default_factory=list)       # matched (i, j), 1-based
    repetitions: dict = field(default_factory=dict)  # letter -> count
    diagnostics: object = None
    solve: object = None


def bounded_rep_lcs(a, b, C, eps=0.5, params=None):
    """Longest common subsequence found by scanning the target length
    downward; repetition counts above C are possible and reported."""
    params = params or RoundingParams()
    for k in range(min(len(a), len(b)), 0, -1):
        inst, dims, letters = lcs_dp(a, b, C, k)
        if inst.root not in {p.id for p in inst.problems if not p.infeasible}:
            continue
        res = solve_additive_dp(inst, 2 * k + 1, eps=eps, params=params)
        if res.status != "ok":
            continue
        used = sorted(dims[i] for i, v in res.witness.vector.items()
                      for _ in range(v))
        seq = "".join(a[i - 1] for i, j in used)
        reps = {}
        for i, j in used:
            reps[a[i - 1]] = reps.get(a[i - 1], 0) + 1
        return LcsResult(length=k, subsequence=seq, pairs=used,
                         repetitions=reps, diagnostics=res.diagnostics,
                         solve=res)
    return LcsResult(length=0, subsequence="")
