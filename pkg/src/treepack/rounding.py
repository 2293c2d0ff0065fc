"""Randomized rounding of compact LP solutions, and the end-to-end solver.

Two rounding modes:

* cost-free: walk the super-tree from the root, sampling each block
  independently from its certificate's marginals;
* cost-preserving: per super-layer, decompose every vertex's certificate
  into a convex combination of partial labelings and round all of them
  simultaneously with a bit-by-bit pairing scheme whose every move weakly
  decreases the linear cost -- so the final cost never exceeds the LP cost
  (up to LP solver residuals).

``boost`` repeats a rounding and keeps the attempt with the smallest packing
violation.  ``solve_additive_dp`` runs the whole pipeline: reduce, build and
solve the LP, round, and lift the best labeling back to a DP witness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (DiagnosticsReport, WitnessNode, check_packing,
                   instance_phi, make_witness, preprocess_instance,
                   validate_instance, vec_dot)
from .decomp import DeadEnd, decompose_chi, sample_labeling
from .lp import (attach_solution, build_compact_lp, build_state_lp,
                 compact_to_recursive, dump_lp, normalize_epsilon,
                 productive_table, solve_lp)
from .reduce import (BOT, Labeling, fast_height, labeling_vector,
                     lift_labeling, reduce_chain)


# ---------------------------------------------------------------------------
# guarantee schedule


def alpha_schedule(eps):
    """Per-level violation factors: alpha_{1/eps} = 1 + eps/2 and
    alpha_i = exp(alpha_{i+1} - 1) going up; each alpha_i <= 1 + 1/(i + 1/eps)."""
    k = math.ceil(1 / eps)
    eps = 1.0 / k
    alpha = [0.0] * (k + 1)
    alpha[k] = 1 + eps / 2
    for i in range(k - 1, -1, -1):
        alpha[i] = math.exp(alpha[i + 1] - 1)
    return alpha


def violation_bound(n, eps, m):
    """Soft empirical ceiling for cost-free rounding violations."""
    return 64.0 * (n ** eps / eps) * math.log(m + 2)


# ---------------------------------------------------------------------------
# the pairing rounding (works on any partitioned fractional vector)


def semi_random_round(lam, groups, K, cost, rng):
    """Round lam (>= 0, integral sums within each group) to integers.

    Scaled to the grid 1/2^K, then K passes: at pass k the coordinates whose
    current value is an odd multiple of 2^(K-k-1) are paired within their
    groups in index order, and each pair moves +-2^(K-k-1) in the orientation
    with non-positive cost change (random when both orientations cost the
    same, via a random proposal that is flipped when it costs).

    Guarantees: group sums never change and cost never increases; the result
    is a nonnegative integer vector.
    """
    n = len(lam)
    scale = 1 << K
    mu = [0] * n
    for grp in groups:
        tot = float(sum(lam[i] for i in grp))
        tgt = round(tot)
        if abs(tot - tgt) > 1e-6:
            raise ValueError("group sum %r is not integral" % tot)
        units = tgt * scale
        frac = {}
        for i in grp:
            v = lam[i] * scale
            b = int(math.floor(v + 1e-9))
            mu[i] = b
            frac[i] = float(v) - b
        deficit = units - sum(mu[i] for i in grp)
        if deficit < 0:
            raise ValueError("negative rounding deficit")
        # hand the remaining units to the cheapest fractional coordinates;
        # the result is the cost-minimal vertex of the floor/ceil polytope,
        # which cannot cost more than lam itself
        order = sorted((i for i in grp if frac[i] > 1e-9),
                       key=lambda i: (cost[i], i))
        if deficit > len(order):        # numerical corner: allow any coord
            order = sorted(grp, key=lambda i: (cost[i], i))
        for i in order[:deficit]:
            mu[i] += 1
    for k in range(K - 1, -1, -1):
        q = 1 << (K - k - 1)
        for grp in groups:
            odd = [i for i in grp if (mu[i] // q) % 2 == 1]
            for a, b in zip(odd[0::2], odd[1::2]):
                sgn = 1 if rng.random() < 0.5 else -1
                if (cost[a] - cost[b]) * sgn > 0:
                    sgn = -sgn
                mu[a] += sgn * q
                mu[b] -= sgn * q
    out = []
    for i in range(n):
        if mu[i] % scale:
            raise AssertionError("non-integral result")
        if mu[i] < 0:
            raise AssertionError("negative result")
        out.append(mu[i] // scale)
    return out


def default_k_bits(support, n_items):
    """Smallest K with 2^K >= 16 * support * n."""
    k = 0
    need = 16 * max(1, support) * max(1, n_items)
    while (1 << k) < need:
        k += 1
    return k


# ---------------------------------------------------------------------------
# writing sampled blocks into a sparse labeling


def _skip(pbtl, depth, label):
    # dummy subtrees stay implicit in sparse labelings
    return label == (pbtl.H - depth, BOT)


def _canonical_triple(pbtl, prod, rem, label):
    byp = pbtl.triples_by_parent()
    for t in sorted(byp.get(label, ()), key=repr):
        if t[1] in prod[rem - 1] and t[2] in prod[rem - 1]:
            return t
    return None


def fill_canonical(pbtl, prod, asg, depth, index, label):
    """Write some fixed valid completion below (depth, index); used for
    zero-vector subtrees the LP does not model and for numerical dead ends."""
    stack = [(depth, index, label)]
    while stack:
        d, i, lab = stack.pop()
        if not _skip(pbtl, d, lab):
            asg[(d, i)] = lab
        elif d > depth or (d, i) != (depth, index):
            continue    # a dummy subtree: nothing below it either
        else:
            continue
        if d == pbtl.H:
            continue
        t = _canonical_triple(pbtl, prod, pbtl.H - d, lab)
        if t is None:
            raise DeadEnd("label %r is a dead end at depth %d" % (lab, d))
        stack.append((d + 1, 2 * i, t[1]))
        stack.append((d + 1, 2 * i + 1, t[2]))


def _write_block(pbtl, asg, k, g, v, chosen, block):
    """Inner labels of one sampled block at super-vertex (layer k, index v)."""
    labels = block.labels_of(chosen)
    for u, lab in labels.items():
        lev = u.bit_length() - 1
        if 0 < lev < g:
            d = k * g + lev
            i = v * (1 << lev) + (u - (1 << lev))
            if not _skip(pbtl, d, lab):
                asg[(d, i)] = lab


# ---------------------------------------------------------------------------
# cost-free rounding


def round_without_cost(source, collapsed, pbtl, rng, prod=None):
    """Sample one labeling from the LP marginals, block by block."""
    if prod is None:
        prod = productive_table(pbtl)
    g, K = collapsed.step, collapsed.layers
    asg = {}
    root = source.root()

    def fallback_for(rem):
        return lambda r, lab: _canonical_triple(pbtl, prod, r, lab)

    queue = [(0, 0, pbtl.root, root)]
    while queue:
        k, v, lab, cert = queue.pop()
        depth = k * g
        if not _skip(pbtl, depth, lab):
            asg[(depth, v)] = lab
        if k == K:
            continue
        if cert is None or cert.null or not cert.phi or cert.block is None:
            fill_canonical(pbtl, prod, asg, depth, v, lab)
            continue
        leaves, chosen = sample_labeling(cert, rng,
                                         fallback=fallback_for(pbtl.H - depth))
        _write_block(pbtl, asg, k, g, v, chosen, cert.block)
        for slot in range(collapsed.arity):
            lc = leaves[slot]
            if _skip(pbtl, depth + g, lc):
                continue
            queue.append((k + 1, v * collapsed.arity + slot, lc,
                          source.child(cert, slot, lc)))
    lab = Labeling(H=pbtl.H, assignment=asg,
                   vector={}, implicit_bot=True)
    lab.vector = labeling_vector(pbtl, asg)
    return lab


# ---------------------------------------------------------------------------
# cost-preserving rounding


@dataclass
class LayerState:
    """Bookkeeping of one rounded super-layer."""
    layer: int
    k_bits: int
    cost_before: float            # sum over vertices of lam . ctilde
    cost_after: float             # cost of the selected tuples
    pack_before: list             # same aggregation per packing row
    vertices: int = 0


def round_with_cost(source, collapsed, pbtl, rng, k_bits=None, prod=None):
    """Layer-by-layer rounding that never increases the LP cost.

    Every super-vertex of the current layer contributes the convex
    decomposition of its certificate; all tuples of the layer are rounded at
    once by ``semi_random_round`` with the tuple costs as the objective.

    Returns (labeling, [LayerState...]).
    """
    if prod is None:
        prod = productive_table(pbtl)
    g, K = collapsed.step, collapsed.layers
    cost = pbtl.cost
    asg = {}
    root = source.root()
    if not _skip(pbtl, 0, pbtl.root):
        asg[(0, 0)] = pbtl.root
    if root is None or root.null or not root.phi:
        fill_canonical(pbtl, prod, asg, 0, 0, pbtl.root)
        lab = Labeling(H=pbtl.H, assignment=asg, vector={}, implicit_bot=True)
        lab.vector = labeling_vector(pbtl, asg)
        return lab, []

    layer = [(0, pbtl.root, root)]
    states = []
    decomp_cache = {}
    for k in range(K):
        if not layer:       # everything below was filled canonically
            break
        depth = k * g
        lams, costs, groups, items = [], [], [], []
        child_vec_cache = {}

        def child_unit_vector(cert, slot, lc):
            if _skip(pbtl, depth + g, lc):
                return {}
            if k + 1 == K:
                return pbtl.vector(lc)
            key = (id(cert), lc)
            if key not in child_vec_cache:
                child_vec_cache[key] = source.child(cert, slot, lc).x
            return child_vec_cache[key]

        layer_terms = []
        for v, lab, cert in layer:
            ckey = cert.key if cert.key is not None else id(cert)
            if ckey not in decomp_cache:
                decomp_cache[ckey] = decompose_chi(cert)
            terms = decomp_cache[ckey]
            grp = []
            for lam, leaves, chosen in terms:
                acc = {}
                for slot, lc in enumerate(leaves):
                    for i, w in child_unit_vector(cert, slot, lc).items():
                        acc[i] = acc.get(i, 0.0) + w
                grp.append(len(lams))
                lams.append(lam)
                costs.append(vec_dot(cost, acc))
                items.append((v, lam, leaves, chosen, cert, acc))
            groups.append(grp)
            layer_terms.append((v, lab, cert, grp))
        kb = k_bits if k_bits is not None else \
            default_k_bits(max(len(grpp) for grpp in groups), len(groups))
        picks = semi_random_round(lams, groups, kb, costs, rng)
        st = LayerState(
            layer=k, k_bits=kb,
            cost_before=sum(l * c for l, c in zip(lams, costs)),
            cost_after=sum(c for c, p in zip(costs, picks) if p),
            pack_before=[sum(l * sum(a.get(i, 0) * acc.get(i, 0.0)
                                     for i in acc)
                             for l, (_, _, _, _, _, acc) in zip(lams, items))
                         for a in pbtl.packing],
            vertices=len(layer))
        states.append(st)
        nxt = []
        for v, lab, cert, grp in layer_terms:
            sel = [j for j in grp if picks[j]]
            if len(sel) != 1:
                raise AssertionError("rounding selected %d tuples" % len(sel))
            _, _, leaves, chosen, _, _ = items[sel[0]]
            _write_block(pbtl, asg, k, g, v, chosen, cert.block)
            for slot in range(collapsed.arity):
                lc = leaves[slot]
                cd, ci = depth + g, v * collapsed.arity + slot
                if _skip(pbtl, cd, lc):
                    continue
                asg[(cd, ci)] = lc
                if k + 1 == K:
                    continue
                ch = source.child(cert, slot, lc)
                if ch is None or ch.null or not ch.phi or ch.block is None:
                    fill_canonical(pbtl, prod, asg, cd, ci, lc)
                else:
                    nxt.append((ci, lc, ch))
        layer = nxt
    lab = Labeling(H=pbtl.H, assignment=asg, vector={}, implicit_bot=True)
    lab.vector = labeling_vector(pbtl, asg)
    return lab, states


# ---------------------------------------------------------------------------
# boosting


def boost(round_fn, pbtl, trials, seed_seq):
    """Run round_fn(rng) several times; keep the labeling with the smallest
    maximum packing row value (ties: smaller cost, then earlier trial)."""
    best = None
    for trial in range(trials):
        rng = np.random.Generator(np.random.PCG64(seed_seq.spawn(1)[0]))
        out = round_fn(rng)
        labeling = out[0] if isinstance(out, tuple) else out
        rows = [sum(a.get(i, 0) * w for i, w in labeling.vector.items())
                for a in pbtl.packing]
        viol = max(rows) if rows else 0.0
        cval = vec_dot(pbtl.cost, labeling.vector)
        key = (viol, cval, trial)
        if best is None or key < best[0]:
            best = (key, labeling, rows, out)
    key, labeling, rows, out = best
    return labeling, {"maxViolation": key[0], "cost": key[1],
                      "perRow": rows, "trial": key[2],
                      "layers": out[1] if isinstance(out, tuple) else None}


# ---------------------------------------------------------------------------
# the full pipeline


@dataclass
class RoundingParams:
    mode: str = "cost-free"            # or "cost-preserving"
    trials: int | None = None
    seed: int = 0
    k_bits: int | None = None
    solver: str = "highs"
    height: int | None = None
    lp_shape: str = "states"           # or "paths"
    prune: bool = True
    dump_lp_path: str | None = None


@dataclass
class SolveResult:
    status: str                        # "ok" | "lp-infeasible" | "no-solution"
    witness: object = None
    labeling: object = None
    diagnostics: DiagnosticsReport | None = None
    lp_objective: object = None
    reduction: object = None
    detail: dict = field(default_factory=dict)


def default_trials(mode, eps, m):
    if mode == "cost-preserving":
        return 20 * math.ceil(1 + math.log(1 / eps) / math.log(max(m, 2)))
    return 20


def _reindex_choices(inst, inst2, node):
    """Map a witness over a preprocessed instance back to the original:
    preprocessing only deletes choices, so each surviving choice appears
    verbatim in the original problem at a possibly larger index."""
    p2 = inst2.problem(node.problem_id)
    if p2.base:
        return node
    ci = inst.problem(node.problem_id).choices.index(p2.choices[node.choice_index])
    kids = tuple(_reindex_choices(inst, inst2, c) for c in node.children)
    return WitnessNode(problem_id=node.problem_id, choice_index=ci,
                       children=kids)


def solve_additive_dp(inst, delta, eps=0.5, params=None):
    """Reduce, relax, round, lift.  The returned witness (if any) is always
    verified against the instance; packing rows may exceed 1 by design."""
    params = params or RoundingParams()
    errs = validate_instance(inst)
    if errs:
        raise ValueError("invalid instance: " + "; ".join(errs))
    inst2, ok = preprocess_instance(inst)
    if not ok:
        return SolveResult(status="no-solution")

    k = math.ceil(1 / eps)
    if params.height is not None:
        hfn = lambda d2: params.height
    else:
        hfn = lambda d2: k * math.ceil(fast_height(d2) / k)
    red = reduce_chain(inst2, delta, height_fn=hfn)
    pbtl, eps2, coll, unpad = normalize_epsilon(red.pbtl, eps)

    if params.lp_shape == "paths":
        sol = build_compact_lp(coll, pbtl, with_cost=True, prune=params.prune)
    else:
        sol = build_state_lp(coll, pbtl, with_cost=True)
    if params.dump_lp_path:
        with open(params.dump_lp_path, "w") as fh:
            dump_lp(sol.model, fh)
    res = solve_lp(sol.model, params.solver)
    if res.status == "infeasible":
        return SolveResult(status="lp-infeasible", reduction=red)
    if res.status != "optimal":
        raise RuntimeError("LP solver returned %s" % res.status)
    attach_solution(sol, res)
    source = compact_to_recursive(sol)
    prod = productive_table(pbtl)

    trials = params.trials or default_trials(params.mode, float(eps2), inst.m)
    seed_seq = np.random.SeedSequence(params.seed)
    if params.mode == "cost-preserving":
        fn = lambda rng: round_with_cost(source, coll, pbtl, rng,
                                         k_bits=params.k_bits, prod=prod)
    else:
        fn = lambda rng: round_without_cost(source, coll, pbtl, rng, prod=prod)
    labeling, info = boost(fn, pbtl, trials, seed_seq)

    witness = lift_labeling(red, unpad(labeling))
    if inst2 is not inst:
        witness = make_witness(inst, _reindex_choices(inst, inst2,
                                                      witness.root))
    rows, viol = check_packing(inst, witness.vector)
    diag = DiagnosticsReport(
        per_row_packing=rows, max_violation=viol,
        cost_value=vec_dot(inst.cost, witness.vector),
        lp_cost=res.objective, phi=instance_phi(inst), delta_used=delta,
        seed=params.seed, trials_run=trials)
    return SolveResult(status="ok", witness=witness, labeling=labeling,
                       diagnostics=diag, lp_objective=res.objective,
                       reduction=red, detail=info)
