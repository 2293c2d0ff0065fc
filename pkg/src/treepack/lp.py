"""Compact LP relaxations of perfect-binary-tree labelings.

The tree is cut into super-layers of ``step`` levels.  For a super-vertex
carrying label l, the distribution over the 2^step descendant labels lives in
the convex hull of valid partial labelings of the little depth-``step`` tree
below it; that hull has a polynomial equality description in terms of one
variable per (inner vertex, triple) pair (``hull blocks``).

Two LP shapes share those blocks:

* ``build_compact_lp``  -- one block per super-tree *path* (explicit vertex
  LP; exact, but the path count grows with the tree, so there is a ``prune``
  switch that drops unreachable/unfinishable labels and cuts zero-vector
  subtrees);
* ``build_state_lp``    -- one block per (layer, label) *state*, aggregating
  all same-labeled vertices of a layer.  Mass flows are exact by symmetry;
  vector variables are routed per (parent label, child label), which
  relaxes per-vertex vector consistency.  Much smaller; used by the
  production pipeline.  Its optimum never exceeds the vertex LP's.

Solvers: scipy's HiGHS (default), a small bundled dense two-phase simplex
with Bland's rule, the same simplex over exact fractions, or an external
binary fed an LP-format file.
"""

from __future__ import annotations

import math
import os
import subprocess
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.optimize
import scipy.sparse

from .reduce import BOT, Labeling, PbtlInstance


# ---------------------------------------------------------------------------
# generic model container


@dataclass
class LpModel:
    """min c.x  s.t. rows, x >= 0.  Rows are sparse dicts var->coef with
    sense "==" or "<="."""
    n: int = 0
    meta: list = field(default_factory=list)      # per-var debug tag
    rows: list = field(default_factory=list)      # (coefs, sense, rhs)
    objective: dict = field(default_factory=dict)

    def add_var(self, tag=None, obj=0):
        self.meta.append(tag)
        if obj:
            self.objective[self.n] = self.objective.get(self.n, 0) + obj
        self.n += 1
        return self.n - 1

    def add_vars(self, k, tag=None):
        return [self.add_var((tag, i) if tag is not None else None)
                for i in range(k)]

    def add_row(self, coefs, sense, rhs):
        if sense not in ("==", "<="):
            raise ValueError(sense)
        self.rows.append(({v: c for v, c in coefs.items() if c}, sense, rhs))

    def row_residuals(self, x):
        """Signed residuals: equality rows give |lhs-rhs|, inequality rows
        give max(0, lhs-rhs)."""
        out = []
        for coefs, sense, rhs in self.rows:
            lhs = sum(c * x[v] for v, c in coefs.items())
            out.append(abs(lhs - rhs) if sense == "==" else max(0.0, lhs - rhs))
        return out

    def objective_value(self, x):
        return sum(c * x[v] for v, c in self.objective.items())


@dataclass
class LpResult:
    status: str                 # "optimal" | "infeasible" | "unbounded" | "error"
    x: list | None = None
    objective: object = None


def solve_lp(model, method="highs"):
    """Solve an LpModel.  method: "highs", "bundled", "exact", or
    "external:<path-to-binary>"."""
    if method == "highs":
        return _solve_highs(model)
    if method == "bundled":
        return _simplex(model, exact=False)
    if method == "exact":
        return _simplex(model, exact=True)
    if method.startswith("external:"):
        return _solve_external(model, method.split(":", 1)[1])
    raise ValueError("unknown LP method %r" % method)


def _solve_highs(model):
    rows_eq, rows_ub = [], []
    for coefs, sense, rhs in model.rows:
        (rows_eq if sense == "==" else rows_ub).append((coefs, rhs))

    def pack(rows):
        data, ri, ci, b = [], [], [], []
        for r, (coefs, rhs) in enumerate(rows):
            for v, c in coefs.items():
                data.append(float(c))
                ri.append(r)
                ci.append(v)
            b.append(float(rhs))
        mat = scipy.sparse.coo_matrix((data, (ri, ci)),
                                      shape=(len(rows), model.n))
        return mat.tocsr(), np.array(b)

    c = np.zeros(model.n)
    for v, coef in model.objective.items():
        c[v] = float(coef)
    kw = {}
    if rows_eq:
        kw["A_eq"], kw["b_eq"] = pack(rows_eq)
    if rows_ub:
        kw["A_ub"], kw["b_ub"] = pack(rows_ub)
    res = scipy.optimize.linprog(c, bounds=(0, None), method="highs", **kw)
    if res.status == 0:
        return LpResult("optimal", list(res.x), float(res.fun))
    if res.status == 2:
        return LpResult("infeasible")
    if res.status == 3:
        return LpResult("unbounded")
    return LpResult("error")


# ---------------------------------------------------------------------------
# bundled dense two-phase simplex (Bland's rule)


def _simplex(model, exact):
    """Dense two-phase simplex with Bland's rule.  ``exact`` switches the
    arithmetic to fractions (no tolerances, no cycling)."""
    if exact:
        num = lambda v: v if isinstance(v, Fraction) else Fraction(v)
        zero, tol = Fraction(0), Fraction(0)
    else:
        num = float
        zero, tol = 0.0, 1e-9

    n = model.n
    nslack = sum(1 for _, s, _ in model.rows if s == "<=")
    nrows = len(model.rows)
    total = n + nslack
    ncols = total + nrows      # one artificial per row keeps phase 1 trivial

    tab = []
    basis = []
    si = 0
    for i, (coefs, sense, rhs) in enumerate(model.rows):
        row = [zero] * (ncols + 1)
        for v, c in coefs.items():
            row[v] = num(c)
        if sense == "<=":
            row[n + si] = num(1)
            si += 1
        row[-1] = num(rhs)
        if row[-1] < zero:
            row = [-v for v in row]
        row[total + i] = num(1)
        tab.append(row)
        basis.append(total + i)

    def pivot(pr, pc):
        prow = tab[pr]
        pv = prow[pc]
        tab[pr] = [v / pv for v in prow]
        prow = tab[pr]
        for i, row in enumerate(tab):
            if i != pr and row[pc] != zero:
                f = row[pc]
                tab[i] = [a - f * b for a, b in zip(row, prow)]
        basis[pr] = pc

    def run_phase(costs, limit):
        # minimize costs.x over columns [0, limit); Bland's rule: the
        # entering column is the first with negative reduced cost, the
        # leaving row breaks ratio ties by smallest basis column
        while True:
            lam = [costs[b] for b in basis]
            entering = -1
            for j in range(limit):
                if j in basis:
                    continue
                rc = costs[j] - sum(lam[i] * tab[i][j]
                                    for i in range(nrows) if tab[i][j] != zero)
                if rc < -tol:
                    entering = j
                    break
            if entering < 0:
                return True
            pr, best = -1, None
            for i, row in enumerate(tab):
                a = row[entering]
                if a > tol:
                    ratio = row[-1] / a
                    if best is None or ratio < best or \
                       (ratio == best and basis[i] < basis[pr]):
                        pr, best = i, ratio
            if pr < 0:
                return False
            pivot(pr, entering)

    costs1 = [zero] * ncols + [zero]
    for j in range(total, ncols):
        costs1[j] = num(1)
    run_phase(costs1, ncols)
    obj1 = sum(tab[i][-1] for i in range(nrows) if basis[i] >= total)
    if obj1 > tol:
        return LpResult("infeasible")
    # pivot leftover (zero-valued) artificials out where possible
    for i in range(nrows):
        if basis[i] >= total:
            for j in range(total):
                if (tab[i][j] != zero) if exact else (abs(tab[i][j]) > tol):
                    pivot(i, j)
                    break

    costs2 = [zero] * ncols + [zero]
    for v, c in model.objective.items():
        costs2[v] = num(c)
    if not run_phase(costs2, total):
        return LpResult("unbounded")
    x = [zero] * n
    for i, b in enumerate(basis):
        if b < n:
            x[b] = tab[i][-1]
    obj = sum(costs2[v] * x[v] for v in range(n) if x[v] != zero)
    return LpResult("optimal", x, obj)


# ---------------------------------------------------------------------------
# LP-format dump and external solver hand-off


def dump_lp(model, fh):
    names = ["x%d" % i for i in range(model.n)]

    def expr(coefs):
        parts = []
        for v in sorted(coefs):
            c = float(coefs[v])
            sign = "+" if c >= 0 else "-"
            parts.append("%s %.17g %s" % (sign, abs(c), names[v]))
        return " ".join(parts) if parts else "0 x0"

    fh.write("Minimize\n obj: %s\n" % expr(model.objective))
    fh.write("Subject To\n")
    for i, (coefs, sense, rhs) in enumerate(model.rows):
        op = "=" if sense == "==" else "<="
        fh.write(" r%d: %s %s %.17g\n" % (i, expr(coefs), op, float(rhs)))
    fh.write("Bounds\n")
    for nm in names:
        fh.write(" 0 <= %s\n" % nm)
    fh.write("End\n")


def _solve_external(model, path):
    """Protocol: the binary gets the LP file path as its sole argument and
    prints "status optimal|infeasible|unbounded", then "objective <v>" and
    one "x<i> <v>" line per nonzero variable."""
    with tempfile.NamedTemporaryFile("w", suffix=".lp", delete=False) as fh:
        dump_lp(model, fh)
        name = fh.name
    try:
        out = subprocess.run([path, name], capture_output=True, text=True,
                             timeout=600)
        if out.returncode != 0:
            return LpResult("error")
        status, obj, x = "error", None, [0.0] * model.n
        for line in out.stdout.splitlines():
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "status":
                status = parts[1]
            elif parts[0] == "objective":
                obj = float(parts[1])
            elif parts[0].startswith("x"):
                x[int(parts[0][1:])] = float(parts[1])
        if status != "optimal":
            return LpResult(status)
        return LpResult("optimal", x, obj)
    finally:
        os.unlink(name)


# ---------------------------------------------------------------------------
# label tables


def productive_table(pbtl):
    """prod[r] = labels that admit some valid perfect subtree of height r."""
    byp = pbtl.triples_by_parent()
    prod = [set(pbtl.labels)]
    for r in range(1, pbtl.H + 1):
        below = prod[r - 1]
        prod.append({l for l in pbtl.labels
                     if any(t[1] in below and t[2] in below
                            for t in byp.get(l, ()))})
    return prod


def null_table(pbtl, prod=None):
    """nul[r] = productive labels whose height-r subtrees all sum to zero."""
    if prod is None:
        prod = productive_table(pbtl)
    byp = pbtl.triples_by_parent()
    nul = [{l for l in pbtl.labels if not pbtl.vector(l)}]
    for r in range(1, pbtl.H + 1):
        cur = set()
        for l in prod[r]:
            ts = [t for t in byp.get(l, ())
                  if t[1] in prod[r - 1] and t[2] in prod[r - 1]]
            if ts and all(t[1] in nul[r - 1] and t[2] in nul[r - 1]
                          for t in ts):
                cur.add(l)
        nul.append(cur)
    return nul


# ---------------------------------------------------------------------------
# epsilon normalization


@dataclass
class CollapsedTree:
    """Super-layer structure: the height-H tree grouped every step levels."""
    eps: Fraction
    H: int
    step: int         # eps * H, integral
    layers: int       # 1/eps
    arity: int        # 2**step


def normalize_epsilon(pbtl, eps):
    """Round eps to 1/ceil(1/eps) and, if H is not a multiple of 1/eps',
    deepen the tree with copy chains so that it is.  Returns
    (pbtl', eps', collapsed, unpad) where unpad maps a labeling of pbtl'
    back to one of pbtl."""
    k = math.ceil(1 / eps)
    eps2 = Fraction(1, k)
    H = pbtl.H
    H2 = k * math.ceil(H / k)
    if H2 == H:
        coll = CollapsedTree(eps=eps2, H=H, step=H // k, layers=k,
                             arity=1 << (H // k))
        return pbtl, eps2, coll, lambda lab: lab
    pbtl2 = _pad_instance(pbtl, H2)
    coll = CollapsedTree(eps=eps2, H=H2, step=H2 // k, layers=k,
                         arity=1 << (H2 // k))

    def unpad(labeling):
        asg = {}
        for (depth, i), (_, orig) in labeling.assignment.items():
            if depth <= H and not (orig == BOT and labeling.implicit_bot):
                asg[(depth, i)] = orig
        out = Labeling(H=H, assignment=asg, vector=dict(labeling.vector),
                       implicit_bot=labeling.implicit_bot)
        return out

    return pbtl2, eps2, coll, unpad


def _pad_instance(pbtl, H2):
    """Level-indexed deepening: labels become (H2 - depth, original); below
    the original leaf level every label is carried down by copy chains, with
    the dummy label filling second slots."""
    H = pbtl.H
    triples = []
    labels = set()

    def lab(h, l):
        out = (h, l)
        labels.add(out)
        return out

    byp = pbtl.triples_by_parent()
    # restrict each depth to labels actually reachable from the root
    depth_labels = [{pbtl.root}]
    for depth in range(H):
        nxt = set()
        for l in depth_labels[depth]:
            for t in byp.get(l, ()):
                nxt.add(t[1])
                nxt.add(t[2])
        depth_labels.append(nxt)
    for depth in range(H):
        hp = H2 - depth
        for l in depth_labels[depth]:
            for t in byp.get(l, ()):
                triples.append((lab(hp, l), lab(hp - 1, t[1]),
                                lab(hp - 1, t[2])))
    # depth H..H2-1: copy chains for every label that can sit at depth H
    for depth in range(H, H2):
        hp = H2 - depth
        for l in depth_labels[H]:
            triples.append((lab(hp, l), lab(hp - 1, l), lab(hp - 1, BOT)))
        triples.append((lab(hp, BOT), lab(hp - 1, BOT), lab(hp - 1, BOT)))
    # make sure the dummy chain exists at every height (sparse labelings)
    for hp in range(H2, 0, -1):
        t = (lab(hp, BOT), lab(hp - 1, BOT), lab(hp - 1, BOT))
        if t not in triples:
            triples.append(t)
    vectors = {}
    for l in depth_labels[H]:
        v = pbtl.vector(l)
        if v:
            vectors[(0, l)] = dict(v)
        labels.add((0, l))
    labels.add((0, BOT))
    root = (H2, pbtl.root)
    labels.add(root)
    return PbtlInstance(H=H2, labels=sorted(labels, key=repr), root=root,
                        vectors=vectors, triples=triples,
                        packing=pbtl.packing, cost=pbtl.cost,
                        d=pbtl.d, m=pbtl.m)


# ---------------------------------------------------------------------------
# hull blocks


@dataclass
class HullBlock:
    """Equality description of the label distribution over one super-vertex's
    depth-``step`` subtree.  Variable keys are (local, triple) with locals in
    heap order (1 = the super-vertex, children 2u / 2u+1); leaf slots of the
    block are locals step levels down, exposed as slot = local - 2^step."""
    ell: object
    step: int
    rem: int                                  # remaining height at the root
    feasible: bool
    phi_keys: list = field(default_factory=list)
    root_keys: list = field(default_factory=list)        # sum == scale
    cons_rows: list = field(default_factory=list)        # (plus, minus): sums equal
    child_exprs: dict = field(default_factory=dict)      # (slot,label)->keys
    tri_at: dict = field(default_factory=dict)           # local->{label:[triples]}

    def labels_of(self, assignment_triples):
        """Labels of every local given a triple choice per inner local."""
        out = {1: self.ell}
        for u in sorted(assignment_triples):
            t = assignment_triples[u]
            out[2 * u] = t[1]
            out[2 * u + 1] = t[2]
        return out


def build_convex_hull_system(collapsed, pbtl, ell, rem, prod=None):
    """Hull block for a super-vertex labeled ell with rem levels of the big
    tree below it.  Triples whose children cannot finish a subtree of the
    right height are left out (their variables would be forced to zero)."""
    g = collapsed.step
    if prod is None:
        prod = productive_table(pbtl)
    byp = pbtl.triples_by_parent()
    B = 1 << g
    blk = HullBlock(ell=ell, step=g, rem=rem, feasible=True)
    labels_at = {1: [ell]}
    inflow = {}      # (local,label) -> [phi keys]
    for u in range(1, B):
        lev = u.bit_length() - 1
        r = rem - lev
        tri = {}
        for L in labels_at.get(u, ()):
            ts = [t for t in byp.get(L, ())
                  if t[1] in prod[r - 1] and t[2] in prod[r - 1]]
            ts.sort(key=repr)
            tri[L] = ts
        blk.tri_at[u] = tri
        kids = [{}, {}]
        for L, ts in tri.items():
            for t in ts:
                key = (u, t)
                blk.phi_keys.append(key)
                for side in (0, 1):
                    kids[side].setdefault(t[1 + side], []).append(key)
        for side in (0, 1):
            v = 2 * u + side
            labels_at[v] = sorted(kids[side], key=repr)
            for L, keys in kids[side].items():
                inflow[(v, L)] = keys
    blk.root_keys = [(1, t) for t in blk.tri_at[1].get(ell, ())]
    if not blk.root_keys:
        blk.feasible = False
        return blk
    for u in range(2, B):
        for L in labels_at.get(u, ()):
            outk = [(u, t) for t in blk.tri_at[u].get(L, ())]
            blk.cons_rows.append((outk, inflow[(u, L)]))
    for v in range(B, 2 * B):
        for L in labels_at.get(v, ()):
            blk.child_exprs[(v - B, L)] = inflow[(v, L)]
    return blk


# ---------------------------------------------------------------------------
# compact vertex-path LP


@dataclass
class PathRec:
    idx: int
    layer: int
    parent: int | None
    slot: int | None
    label: object
    chi: int
    null: bool = False
    x: list | None = None
    phi: dict | None = None                  # phi key -> var
    block: HullBlock | None = None
    children: dict = field(default_factory=dict)   # (slot,label) -> path idx


@dataclass
class CompactLpSolution:
    model: LpModel
    collapsed: CollapsedTree
    pbtl: PbtlInstance
    mode: str                   # "paths" | "states"
    paths: list | None = None
    states: dict | None = None  # (layer,label) -> StateRec
    values: list | None = None
    objective: object = None
    with_cost: bool = True

    def value(self, var):
        return self.values[var]


def build_compact_lp(collapsed, pbtl, with_cost=True, prune=True):
    """Explicit vertex LP: one chi/x block per path of the super-tree."""
    model = LpModel()
    g, K = collapsed.step, collapsed.layers
    prod = productive_table(pbtl)
    nul = null_table(pbtl, prod) if prune else [set() for _ in range(pbtl.H + 1)]
    if not prune:
        prod = [set(pbtl.labels) for _ in range(pbtl.H + 1)]
    blocks = {}
    paths = []

    def new_path(layer, parent, slot, label):
        rec = PathRec(idx=len(paths), layer=layer, parent=parent, slot=slot,
                      label=label, chi=model.add_var(("chi", len(paths))))
        rec.null = label in nul[pbtl.H - layer * g]
        paths.append(rec)
        return rec

    root = new_path(0, None, None, pbtl.root)
    model.add_row({root.chi: 1}, "==", 1)
    queue = [root]
    while queue:
        rec = queue.pop(0)
        rem = pbtl.H - rec.layer * g
        if not rec.null:
            if rec.x is None:   # parents allocate children's x ahead of time
                rec.x = model.add_vars(pbtl.d, ("x", rec.idx))
            for j, arow in enumerate(pbtl.packing):
                coefs = {rec.x[i]: a for i, a in arow.items()}
                coefs[rec.chi] = coefs.get(rec.chi, 0) - 1
                model.add_row(coefs, "<=", 0)
        if rec.layer == K:
            if not rec.null:
                xl = pbtl.vector(rec.label)
                for i in range(pbtl.d):
                    model.add_row({rec.x[i]: 1, rec.chi: -xl.get(i, 0)},
                                  "==", 0)
            continue
        if rec.null:
            continue    # zero-vector subtree: keep the mass, cut the detail
        bkey = (rem, rec.label)
        if bkey not in blocks:
            blocks[bkey] = build_convex_hull_system(collapsed, pbtl,
                                                    rec.label, rem, prod)
        blk = blocks[bkey]
        if not blk.feasible:
            model.add_row({rec.chi: 1}, "==", 0)
            if rec.x is not None:
                for i in range(pbtl.d):
                    model.add_row({rec.x[i]: 1}, "==", 0)
            continue
        rec.block = blk
        rec.phi = {key: model.add_var(("phi", rec.idx, key))
                   for key in blk.phi_keys}
        model.add_row({**{rec.phi[k]: 1 for k in blk.root_keys},
                       rec.chi: -1}, "==", 0)
        for outk, ink in blk.cons_rows:
            coefs = {}
            for k in outk:
                coefs[rec.phi[k]] = coefs.get(rec.phi[k], 0) + 1
            for k in ink:
                coefs[rec.phi[k]] = coefs.get(rec.phi[k], 0) - 1
            model.add_row(coefs, "==", 0)
        for (slot, L), keys in sorted(blk.child_exprs.items(),
                                      key=lambda kv: (kv[0][0], repr(kv[0][1]))):
            q = new_path(rec.layer + 1, rec.idx, slot, L)
            rec.children[(slot, L)] = q.idx
            coefs = {q.chi: 1}
            for k in keys:
                coefs[rec.phi[k]] = coefs.get(rec.phi[k], 0) - 1
            model.add_row(coefs, "==", 0)
            queue.append(q)
        # vector conservation once the children exist
        for i in range(pbtl.d):
            coefs = {rec.x[i]: 1}
            for q in rec.children.values():
                qr = paths[q]
                if not qr.null:
                    if qr.x is None:
                        qr.x = model.add_vars(pbtl.d, ("x", qr.idx))
                    coefs[qr.x[i]] = -1
            model.add_row(coefs, "==", 0)

    # deduplicate x vars allocated ahead of the queue
    if with_cost and root.x is not None:
        for i, c in enumerate(pbtl.cost):
            if c:
                model.objective[root.x[i]] = float(c)
    return CompactLpSolution(model=model, collapsed=collapsed, pbtl=pbtl,
                             mode="paths", paths=paths, with_cost=with_cost)


# ---------------------------------------------------------------------------
# collapsed state LP


@dataclass
class StateRec:
    layer: int
    label: object
    psi: int
    null: bool = False
    x: list | None = None
    phi: dict | None = None
    block: HullBlock | None = None
    z: dict = field(default_factory=dict)     # child label -> d vars


def build_state_lp(collapsed, pbtl, with_cost=True):
    """Aggregated LP over (layer, label) states.  Mass flows between states
    are exact; vector routing variables Z split each state's vector over the
    labels of the next layer (a relaxation of per-vertex consistency)."""
    model = LpModel()
    g, K = collapsed.step, collapsed.layers
    prod = productive_table(pbtl)
    nul = null_table(pbtl, prod)
    blocks = {}
    states = {}

    def new_state(layer, label):
        rec = StateRec(layer=layer, label=label,
                       psi=model.add_var(("psi", layer, label)))
        rec.null = label in nul[pbtl.H - layer * g]
        if not rec.null:
            rec.x = model.add_vars(pbtl.d, ("X", layer, label))
        states[(layer, label)] = rec
        return rec

    if pbtl.root not in prod[pbtl.H]:
        # no valid labeling exists at all
        v = model.add_var(("psi", 0, pbtl.root))
        model.add_row({v: 1}, "==", 1)
        model.add_row({v: 1}, "==", 0)
        return CompactLpSolution(model=model, collapsed=collapsed, pbtl=pbtl,
                                 mode="states", states={}, with_cost=with_cost)

    root = new_state(0, pbtl.root)
    model.add_row({root.psi: 1}, "==", 1)
    layer_states = [root]
    for k in range(K):
        rem = pbtl.H - k * g
        inflow = {}     # child label -> coefs dict over model vars
        for rec in layer_states:
            bkey = (rem, rec.label)
            if bkey not in blocks:
                blocks[bkey] = build_convex_hull_system(collapsed, pbtl,
                                                        rec.label, rem, prod)
            blk = blocks[bkey]
            if not blk.feasible:   # cannot happen for productive labels
                model.add_row({rec.psi: 1}, "==", 0)
                continue
            rec.block = blk
            rec.phi = {key: model.add_var(("phi", k, rec.label, key))
                       for key in blk.phi_keys}
            model.add_row({**{rec.phi[kk]: 1 for kk in blk.root_keys},
                           rec.psi: -1}, "==", 0)
            for outk, ink in blk.cons_rows:
                coefs = {}
                for kk in outk:
                    coefs[rec.phi[kk]] = coefs.get(rec.phi[kk], 0) + 1
                for kk in ink:
                    coefs[rec.phi[kk]] = coefs.get(rec.phi[kk], 0) - 1
                model.add_row(coefs, "==", 0)
            for (slot, L), keys in blk.child_exprs.items():
                dst = inflow.setdefault(L, {})
                for kk in keys:
                    dst[rec.phi[kk]] = dst.get(rec.phi[kk], 0) + 1
        nxt = []
        for L in sorted(inflow, key=repr):
            child = new_state(k + 1, L)
            coefs = dict(inflow[L])
            coefs[child.psi] = coefs.get(child.psi, 0) - 1
            model.add_row(coefs, "==", 0)
            nxt.append(child)
        # vector routing between consecutive layers
        for rec in layer_states:
            if rec.null or rec.block is None:
                continue
            kid_labels = sorted({L for (_, L) in rec.block.child_exprs
                                 if not states[(k + 1, L)].null}, key=repr)
            for L in kid_labels:
                rec.z[L] = model.add_vars(pbtl.d, ("Z", k, rec.label, L))
            for i in range(pbtl.d):
                coefs = {rec.x[i]: 1}
                for L in kid_labels:
                    coefs[rec.z[L][i]] = -1
                model.add_row(coefs, "==", 0)
        for child in nxt:
            if child.null:
                continue
            for i in range(pbtl.d):
                coefs = {child.x[i]: 1}
                for rec in layer_states:
                    if L_in := rec.z.get(child.label):
                        coefs[L_in[i]] = coefs.get(L_in[i], 0) - 1
                model.add_row(coefs, "==", 0)
        layer_states = nxt

    # leaf layer vectors and packing everywhere
    for (k, L), rec in states.items():
        if rec.null:
            continue
        if k == K:
            xl = pbtl.vector(L)
            for i in range(pbtl.d):
                model.add_row({rec.x[i]: 1, rec.psi: -xl.get(i, 0)}, "==", 0)
        for arow in pbtl.packing:
            coefs = {rec.x[i]: a for i, a in arow.items()}
            coefs[rec.psi] = coefs.get(rec.psi, 0) - 1
            model.add_row(coefs, "<=", 0)

    if with_cost and not root.null:
        for i, c in enumerate(pbtl.cost):
            if c:
                model.objective[root.x[i]] = float(c)
    return CompactLpSolution(model=model, collapsed=collapsed, pbtl=pbtl,
                             mode="states", states=states, with_cost=with_cost)


def attach_solution(sol, result):
    sol.values = result.x
    sol.objective = result.objective
    return sol


# ---------------------------------------------------------------------------
# certificates


@dataclass
class RecursiveCertificate:
    """Per-unit view of one super-vertex: its label, the per-unit vector x,
    the per-unit hull variables phi, and the per-unit child masses chi."""
    layer: int
    label: object
    x: dict                  # per-unit subtree vector (sparse over 0..d-1)
    phi: dict                # (local, triple) -> per-unit value
    chi: dict                # (slot, label) -> per-unit mass
    block: HullBlock | None
    null: bool = False
    key: object = None


class CertificateSource:
    """Lazy per-unit certificates over a solved compact LP (either mode)."""

    def __init__(self, sol, tol=1e-9):
        if sol.values is None:
            raise ValueError("LP solution not attached")
        self.sol = sol
        self.tol = tol
        self._cache = {}

    def _make(self, key, layer, label, scale, x_vars, phi_vars, block, null):
        val = self.sol.value
        if scale <= self.tol:
            return RecursiveCertificate(layer=layer, label=label, x={},
                                        phi={}, chi={}, block=block,
                                        null=True, key=key)
        x = {}
        if x_vars is not None:
            for i, v in enumerate(x_vars):
                w = val(v) / scale
                if w:
                    x[i] = w
        phi = {}
        if phi_vars:
            for k, v in phi_vars.items():
                w = val(v) / scale
                if w > 0:
                    phi[k] = w
        chi = {}
        if block is not None and block.feasible:
            for (slot, L), keys in block.child_exprs.items():
                w = sum(phi.get(k, 0.0) for k in keys)
                if w > 0:
                    chi[(slot, L)] = w
        return RecursiveCertificate(layer=layer, label=label, x=x, phi=phi,
                                    chi=chi, block=block, null=null, key=key)

    def root(self):
        if self.sol.mode == "paths":
            rec = self.sol.paths[0]
            return self._path_cert(rec)
        rec = self.sol.states.get((0, self.sol.pbtl.root))
        if rec is None:
            return None
        return self._state_cert(rec)

    def _path_cert(self, rec):
        if rec.idx in self._cache:
            return self._cache[rec.idx]
        scale = self.sol.value(rec.chi)
        cert = self._make(rec.idx, rec.layer, rec.label, scale,
                          rec.x, rec.phi, rec.block, rec.null)
        self._cache[rec.idx] = cert
        return cert

    def _state_cert(self, rec):
        key = (rec.layer, rec.label)
        if key in self._cache:
            return self._cache[key]
        scale = self.sol.value(rec.psi)
        cert = self._make(key, rec.layer, rec.label, scale,
                          rec.x, rec.phi, rec.block, rec.null)
        self._cache[key] = cert
        return cert

    def child(self, cert, slot, label):
        """Certificate for the child super-vertex at the given slot/label.
        Returns a null-style certificate when the LP put (numerically) no
        mass there; callers then fall back to a canonical completion."""
        if self.sol.mode == "paths":
            rec = self.sol.paths[cert.key]
            q = rec.children.get((slot, label))
            if q is None:
                return RecursiveCertificate(layer=cert.layer + 1, label=label,
                                            x={}, phi={}, chi={}, block=None,
                                            null=True)
            return self._path_cert(self.sol.paths[q])
        rec = self.sol.states.get((cert.layer + 1, label))
        if rec is None:
            return RecursiveCertificate(layer=cert.layer + 1, label=label,
                                        x={}, phi={}, chi={}, block=None,
                                        null=True)
        return self._state_cert(rec)


def compact_to_recursive(sol, tol=1e-9):
    return CertificateSource(sol, tol=tol)
