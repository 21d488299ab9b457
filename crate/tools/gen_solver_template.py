#!/usr/bin/env python3
"""Offline generator for the five-quadric elimination template.

The reduced polynomial system solved inside the R7Pfr core is a family of
five quadrics in (b1, b2, b3, q, l) over the fixed monomial support

    [b1 q, b1 l, b1, b2 q, b2 l, b2, b3 q, b3 l, b3, q, l, 1].

This script derives, once, an elimination template for that family:

 1. instantiate the family with random integer coefficients and compute a
    grevlex Groebner basis over the rationals, giving the 10-dimensional
    quotient basis;
 2. pick the multiplication (action) variable and the reductions needed to
    express action * basis in the basis;
 3. find a sparse set of polynomial multiples whose row space contains the
    needed reductions (L1 minimization over all multiples up to degree 3,
    then greedy removal validated on several random instances);
 4. verify the final template numerically on fresh random instances:
    column-ordered Gauss-Jordan, 10x10 action-matrix eigendecomposition,
    Newton polish, residual check;
 5. emit JSON consumed by `crates/core/src/r7pfr.rs` at build time.

Requires sympy, numpy, scipy. The output is deterministic for the seeds
below and is checked in; rerunning is only needed if the monomial support
of the family ever changes.
"""

import functools
import itertools
import json
import random

import numpy as np
import sympy as sp
from scipy.optimize import linprog

SEED = 7
NV = 5
B1, B2, B3, Q, L = sp.symbols("b1 b2 b3 q l")
GENS = (B1, B2, B3, Q, L)
STRUCTURE = [
    (1, 0, 0, 1, 0), (1, 0, 0, 0, 1), (1, 0, 0, 0, 0),
    (0, 1, 0, 1, 0), (0, 1, 0, 0, 1), (0, 1, 0, 0, 0),
    (0, 0, 1, 1, 0), (0, 0, 1, 0, 1), (0, 0, 1, 0, 0),
    (0, 0, 0, 1, 0), (0, 0, 0, 0, 1), (0, 0, 0, 0, 0),
]
ACTION = (0, 0, 0, 0, 1)  # multiply by l


def mon_of(e):
    m = sp.Integer(1)
    for g, x in zip(GENS, e):
        m *= g ** x
    return m


def mul_exp(a, b):
    return tuple(x + y for x, y in zip(a, b))


def grevlex_greater(a, b):
    da, db = sum(a), sum(b)
    if da != db:
        return da > db
    for i in range(NV - 1, -1, -1):
        d = a[i] - b[i]
        if d != 0:
            return d < 0
    return False


def gsort(mons):
    cmp = lambda x, y: -1 if grevlex_greater(x, y) else (1 if grevlex_greater(y, x) else 0)
    return sorted(mons, key=functools.cmp_to_key(cmp))


def all_mons(dmax):
    return [e for e in itertools.product(range(dmax + 1), repeat=NV) if sum(e) <= dmax]


def quotient_basis(coeffs):
    polys = [sum(coeffs[k][j] * mon_of(STRUCTURE[j]) for j in range(12)) for k in range(5)]
    gb = sp.groebner(polys, *GENS, order="grevlex")
    lts = [tuple(sp.degree(sp.LM(g, GENS, order="grevlex"), v) for v in GENS) for g in gb.exprs]
    divides = lambda a, b: all(x <= y for x, y in zip(a, b))
    basis = [e for e in all_mons(4) if not any(divides(t, e) for t in lts)]
    return gsort(basis), gb


def make_cols(rows, basis):
    cs = set()
    for _, mu in rows:
        for j in range(12):
            cs.add(mul_exp(mu, STRUCTURE[j]))
    nonbasis = gsort([c for c in cs if c not in set(basis)])
    return nonbasis + list(basis), len(nonbasis)


def fill(rows, colidx, coeffs):
    m = np.zeros((len(rows), len(colidx)))
    for i, (k, mu) in enumerate(rows):
        for j in range(12):
            m[i, colidx[mul_exp(mu, STRUCTURE[j])]] += coeffs[k][j]
    return m


def rref_check(m, n_nonbasis, needed_idx, tol=1e-10):
    m = m.copy()
    nrows = m.shape[0]
    scale = max(np.max(np.abs(m)), 1e-300)
    used = np.zeros(nrows, dtype=bool)
    pivrow = {}
    for c in range(n_nonbasis):
        col = np.abs(m[:, c]).copy()
        col[used] = 0.0
        r = int(np.argmax(col))
        if col[r] < tol * scale:
            continue
        used[r] = True
        pivrow[c] = r
        m[r, :] /= m[r, c]
        mask = np.ones(nrows, dtype=bool)
        mask[r] = False
        m[mask, :] -= np.outer(m[mask, c], m[r, :])
    for ci in needed_idx:
        if ci not in pivrow:
            return False, pivrow, m
        row = m[pivrow[ci], :].copy()
        row[ci] = 0.0
        if np.max(np.abs(row[:n_nonbasis])) > 1e-6:
            return False, pivrow, m
    return True, pivrow, m


def template_valid(rows, basis, needed, instances):
    cols, nnb = make_cols(rows, basis)
    colidx = {c: i for i, c in enumerate(cols)}
    if any(t not in colidx for t in needed):
        return False
    needed_idx = [colidx[t] for t in needed]
    return all(rref_check(fill(rows, colidx, c), nnb, needed_idx)[0] for c in instances)


def solve_with_template(rows, basis, coeffs, polish_steps=4):
    cols, nnb = make_cols(rows, basis)
    colidx = {c: i for i, c in enumerate(cols)}
    needed_idx = [colidx[mul_exp(m, ACTION)] for m in basis if mul_exp(m, ACTION) not in set(basis)]
    ok, pivrow, red = rref_check(fill(rows, colidx, coeffs), nnb, needed_idx)
    if not ok:
        return None
    bpos = {b: i for i, b in enumerate(basis)}
    act = np.zeros((10, 10))
    for j, m in enumerate(basis):
        t = mul_exp(m, ACTION)
        if t in bpos:
            act[j, bpos[t]] = 1.0
        else:
            act[j, :] = -red[pivrow[colidx[t]], len(cols) - 10:]
    _, vecs = np.linalg.eig(act)
    cf = np.asarray(coeffs, dtype=float)
    pos1 = bpos[(0, 0, 0, 0, 0)]
    vpos = [bpos[e] for e in [(1, 0, 0, 0, 0), (0, 1, 0, 0, 0), (0, 0, 1, 0, 0), (0, 0, 0, 1, 0), (0, 0, 0, 0, 1)]]
    roots = []
    for i in range(10):
        v = vecs[:, i]
        if abs(v[pos1]) < 1e-12:
            continue
        v = v / v[pos1]
        x = np.array([v[p] for p in vpos], dtype=complex)
        for _ in range(polish_steps):
            b1, b2, b3, q, l = x
            vals = np.array([b1 * q, b1 * l, b1, b2 * q, b2 * l, b2, b3 * q, b3 * l, b3, q, l, 1.0])
            f = cf @ vals
            jac = np.zeros((5, 5), dtype=complex)
            jac[:, 0] = cf[:, 0] * q + cf[:, 1] * l + cf[:, 2]
            jac[:, 1] = cf[:, 3] * q + cf[:, 4] * l + cf[:, 5]
            jac[:, 2] = cf[:, 6] * q + cf[:, 7] * l + cf[:, 8]
            jac[:, 3] = cf[:, 0] * b1 + cf[:, 3] * b2 + cf[:, 6] * b3 + cf[:, 9]
            jac[:, 4] = cf[:, 1] * b1 + cf[:, 4] * b2 + cf[:, 7] * b3 + cf[:, 10]
            try:
                x = x + np.linalg.solve(jac, -f)
            except np.linalg.LinAlgError:
                break
        roots.append(x)
    return roots


def max_residual(coeffs, roots):
    cf = np.asarray(coeffs, dtype=float)
    norms = np.linalg.norm(cf, axis=1)
    worst = 0.0
    for b1, b2, b3, q, l in roots:
        vals = np.array([b1 * q, b1 * l, b1, b2 * q, b2 * l, b2, b3 * q, b3 * l, b3, q, l, 1.0])
        worst = max(worst, float(np.max(np.abs(cf @ vals) / norms)))
    return worst


def main():
    random.seed(SEED)
    coeffs = [[sp.Integer(random.randint(-50, 50)) for _ in range(12)] for _ in range(5)]
    basis, gb = quotient_basis(coeffs)
    assert len(basis) == 10, f"unexpected quotient dimension {len(basis)}"
    needed = gsort(list({mul_exp(m, ACTION) for m in basis} - set(basis)))
    print("quotient basis:", [str(mon_of(e)) for e in basis])
    print("needed reductions:", [str(mon_of(e)) for e in needed])

    # L1-sparse exact combinations of degree-<=3 multiples per needed target.
    mults = all_mons(3)
    rows_all = [(k, mu) for k in range(5) for mu in mults]
    cols, _ = make_cols(rows_all, basis)
    colidx = {c: i for i, c in enumerate(cols)}
    mf = fill(rows_all, colidx, [[float(c) for c in row] for row in coeffs])
    support = set()
    for t in needed:
        target = sp.expand(mon_of(t) - gb.reduce(mon_of(t))[1])
        rhs = np.zeros(len(cols))
        for mono, coeff in sp.Poly(target, *GENS).terms():
            rhs[colidx[tuple(mono)]] = float(coeff)
        n = len(rows_all)
        res = linprog(np.ones(2 * n), A_eq=np.hstack([mf.T, -mf.T]), b_eq=rhs,
                      bounds=[(0, None)] * (2 * n), method="highs")
        assert res.success, f"LP failed for {mon_of(t)}"
        e = res.x[:n] - res.x[n:]
        support.update(i for i in range(n) if abs(e[i]) > 1e-9)
    rows = [rows_all[i] for i in sorted(support)]
    print("rows after L1:", len(rows))

    rng = np.random.default_rng(123)
    insts = [rng.standard_normal((5, 12)) for _ in range(10)]
    order = sorted(range(len(rows)), key=lambda i: (sum(rows[i][1]), rows[i][0]), reverse=True)
    removed = set()
    for i in order:
        trial = [rows[j] for j in range(len(rows)) if j != i and j not in removed]
        if template_valid(trial, basis, needed, insts):
            removed.add(i)
    rows = [rows[j] for j in range(len(rows)) if j not in removed]
    cols, nnb = make_cols(rows, basis)
    print("pruned template:", len(rows), "x", len(cols))

    worst = 0.0
    for i in range(50):
        c = np.random.default_rng(2000 + i).standard_normal((5, 12))
        roots = solve_with_template(rows, basis, c)
        assert roots is not None and len(roots) == 10, f"instance {i}"
        worst = max(worst, max_residual(c, roots))
    print(f"verification: 50 instances, worst residual {worst:.2e}")
    assert worst < 1e-9

    out = {
        "version": 1,
        "action": list(ACTION),
        "monomials": [list(c) for c in cols],
        "n_nonbasis": nnb,
        "basis": [list(b) for b in basis],
        "rows": [{"poly": k, "mult": list(mu)} for k, mu in rows],
        "structure_monomials": [list(m) for m in STRUCTURE],
    }
    path = "crates/core/src/r7pfr_template.json"
    with open(path, "w") as f:
        json.dump(out, f)
    print("written", path)


if __name__ == "__main__":
    main()
