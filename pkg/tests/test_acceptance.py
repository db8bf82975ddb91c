"""Acceptance criteria 1-9, each at its stated tolerance.

Each test records one pass/fail line (shown in the terminal summary).
"""

import itertools
import math
import time

import numpy as np
import pytest

from momentsum.charsum import CharPoly, vcharacter, weil_audit
from momentsum.counting import (MomentSpace, MomentTarget, active_indices, brute_sums,
                                count_table, duality_transform, reach_rows, reduce_targets)
from momentsum.evalsets import (EvalSetDesc, image_set, preimage_count, value_set_size_formula,
                                vdickson)
from momentsum.field import make_field, prime_power
from momentsum.regimes import (RegimeParams, brun_vectors, choe_recursion, choe_recursion_exact,
                               decide, large_k_guarantee, liwan_bound, liwan_deviation,
                               medium_k_guarantee)

pytestmark = pytest.mark.acceptance


def field_of(q):
    return make_field(*prime_power(q))


def prime_powers(lo, hi):
    out = []
    for q in range(lo, hi + 1):
        try:
            out.append(prime_power(q))
        except ValueError:
            pass
    return out


def a_values(ctx, count=3, seed=0):
    nonzero = np.arange(1, ctx.q)
    if nonzero.size <= count:
        return [int(a) for a in nonzero]
    return sorted(int(a) for a in np.random.default_rng(seed).choice(nonzero, count, replace=False))


def symbolic_sets(ctx, nmax=6, a_count=3):
    descs = [EvalSetDesc.monomial(n) for n in range(1, min(nmax, ctx.q - 1) + 1)]
    for n in range(1, min(nmax, ctx.q - 1) + 1):
        descs += [EvalSetDesc.dickson(n, a) for a in a_values(ctx, a_count)]
    return descs


def distinct_images(ctx, descs):
    """Map image elements -> (image, descriptors generating it)."""
    out = {}
    for desc in descs:
        D = image_set(ctx, desc)
        out.setdefault(D.elements, (D, []))[1].append(desc)
    return list(out.values())


def consistent_targets(ctx, m, count, rng):
    """Seeded sample of targets with b_{ip} = b_i^p (all of them when few)."""
    active = active_indices(ctx.p, m)
    total = ctx.q ** len(active)
    if total <= count:
        choices = itertools.product(range(ctx.q), repeat=len(active))
    else:
        choices = (tuple(int(x) for x in rng.integers(0, ctx.q, len(active))) for _ in range(count))
    out = []
    for values in choices:
        b = [0] * m
        for j, v in zip(active, values):
            b[j - 1] = v
        for j in range(1, m + 1):
            if j % ctx.p == 0:
                b[j - 1] = ctx.pow(b[j // ctx.p - 1], ctx.p)
        out.append(MomentTarget(m, tuple(b)))
    return out


# -- 1 -----------------------------------------------------------------------------------

BRUTE_CAP_C1 = 10**6


def test_criterion_1_oracle_equivalence(criterion):
    start = time.time()
    rng = np.random.default_rng(0)
    mismatches, histograms, decisions = [], 0, 0
    for q in (4, 5, 7, 8, 9, 11, 13, 16, 25, 27, 49):
        ctx = field_of(q)
        for D, descs in distinct_images(ctx, symbolic_sets(ctx)):
            d = D.d
            full = active_indices(ctx.p, 3)
            brute = {}
            for k in range(d + 1):
                if math.comb(d, k) <= BRUTE_CAP_C1:
                    brute[k] = brute_sums(ctx, D, full, k, BRUTE_CAP_C1)
            for m in (1, 2, 3):
                active = active_indices(ctx.p, m)
                space = MomentSpace(ctx, active)
                table = count_table(ctx, D, active, d)
                for k, rows in brute.items():
                    idx = space.index_of_digits(rows[:, :space.ndigits])
                    hist = np.bincount(idx, minlength=space.size)
                    histograms += 1
                    if not np.array_equal(hist, table[k].astype(np.int64)):
                        mismatches.append(("dp-vs-brute", q, str(descs[0]), m, k))
                for target in consistent_targets(ctx, m, 25, rng):
                    rt = reduce_targets(ctx, target)
                    col = space.encode(rt.b_active)
                    for k in range(d + 1):
                        out = decide(ctx, descs[0], target, k)
                        decisions += 1
                        if out.yes != (table[k, col] > 0):
                            mismatches.append(("decide", q, str(descs[0]), m, target.b, k))
    elapsed = time.time() - start
    passed = not mismatches and elapsed < 600
    criterion(1, passed, f"{histograms} DP/brute histograms, {decisions} decide calls, "
              f"{len(mismatches)} mismatches, {elapsed:.0f}s")
    assert not mismatches, mismatches[:5]


# -- 2 -----------------------------------------------------------------------------------

def test_criterion_2_formulas(criterion):
    start = time.time()
    bad, checks = [], 0
    for p, s in prime_powers(3, 343):
        if p == 2:
            continue
        ctx = make_field(p, s)
        for n in range(1, min(10, ctx.q - 1) + 1):
            desc = EvalSetDesc.monomial(n)
            checks += 1
            if value_set_size_formula(ctx, desc) != image_set(ctx, desc).d:
                bad.append(("monomial", ctx.q, n))
            for a in range(1, ctx.q):
                desc = EvalSetDesc.dickson(n, a)
                checks += 1
                if value_set_size_formula(ctx, desc) != image_set(ctx, desc).d:
                    bad.append(("dickson", ctx.q, n, a))
    for p, s in prime_powers(2, 343):
        if p == 2:
            ctx = make_field(p, s)
            for n in range(1, min(10, ctx.q - 1) + 1):
                desc = EvalSetDesc.monomial(n)
                checks += 1
                if value_set_size_formula(ctx, desc) != image_set(ctx, desc).d:
                    bad.append(("monomial", ctx.q, n))
    fibers = 0
    for p, s in prime_powers(2, 64):
        ctx = make_field(p, s)
        xs = ctx.elements()
        for n in range(2, 7):
            for a in range(1, ctx.q):
                values = vdickson(ctx, n, a, xs)
                sizes = np.bincount(values, minlength=ctx.q)[values]
                for x0 in range(ctx.q):
                    fibers += 1
                    if preimage_count(ctx, n, a, x0) != sizes[x0]:
                        bad.append(("fiber", ctx.q, n, a, x0))
    elapsed = time.time() - start
    criterion(2, not bad and elapsed < 300,
              f"{checks} value-set sizes, {fibers} fibers, {len(bad)} mismatches, {elapsed:.0f}s")
    assert not bad, bad[:5]


# -- 3 -----------------------------------------------------------------------------------

def audit_plan():
    """(field, m, descriptors) covering every field q <= 343.

    Complete-field sums run with m = 3 on every field.  Image sweeps with
    m = 3 cost q^3 sums per weight vector when p >= 5, so they run on every
    p >= 5 field with q <= 125 and on q = 343; the other p >= 5 fields sweep
    their images with m = 2.  For p in {2, 3} the admissible f with m = 3
    have only two free coefficients and every field gets m = 3 throughout.
    """
    plan = []
    for p, s in prime_powers(2, 343):
        q = p**s
        ctx = make_field(p, s)
        a_count = 1 if q == 343 else 2
        descs = [EvalSetDesc.monomial(n) for n in range(1, 7) if n <= q - 1]
        descs += [EvalSetDesc.dickson(n, a) for n in range(2, 7) if n <= q - 1
                  for a in a_values(ctx, a_count)]
        if p <= 3 or q <= 125 or q == 343:
            plan.append((ctx, 3, [None] + descs))
        else:
            plan.append((ctx, 3, [None]))
            plan.append((ctx, 2, descs))
    return plan


def test_criterion_3_weil_audits(criterion):
    start = time.time()
    covered, violations, families = 0, [], set()
    max_disc = 0.0
    for ctx, m, descs in audit_plan():
        for rep in weil_audit(ctx, descs, m, keep="worst"):
            families.add(rep.context["family"])
            covered += rep.n_covered if rep.n_covered > 1 else 0
            if rep.discrepancy is not None:
                max_disc = max(max_disc, rep.discrepancy)
            if not rep.passed:
                violations.append(rep.record())
    elapsed = time.time() - start
    criterion(3, not violations and elapsed < 600,
              f"{covered} sums over {len(families)} families, {len(violations)} violations, "
              f"max twist discrepancy {max_disc:.1e}, {elapsed:.0f}s")
    assert not violations, violations[:3]


# -- 4 -----------------------------------------------------------------------------------

def test_criterion_4_medium_k(criterion):
    start = time.time()
    ctx = make_field(5, 6)
    desc = EvalSetDesc.monomial(1)
    D = image_set(ctx, desc)
    rng = np.random.default_rng(0)
    targets = consistent_targets(ctx, 1, 10, rng)
    ks = list(range(5, 56))
    rows = reach_rows(ctx, D, active_indices(5, 1), ks)
    contradictions, certified = [], 0
    for target in targets:
        rt = reduce_targets(ctx, target)
        for k in ks:
            rp = RegimeParams.of(ctx, 1, rt, k, D.d)
            if medium_k_guarantee(rp) is None:
                contradictions.append(("not certified", target.b, k))
                continue
            certified += 1
            if not rows[k][rt.b_active[0]]:
                contradictions.append(("dp says no", target.b, k))
    out = decide(ctx, desc, targets[0], 10)
    regime_ok = out.regime == "medium-k-theorem" and out.yes
    elapsed = time.time() - start
    criterion(4, not contradictions and regime_ok and elapsed < 1800,
              f"{certified} certified YES confirmed by boolean DP, "
              f"{len(contradictions)} contradictions, {elapsed:.0f}s")
    assert not contradictions and regime_ok


# -- 5 -----------------------------------------------------------------------------------

def test_criterion_5_large_k(criterion):
    start = time.time()
    rng = np.random.default_rng(0)
    results = []
    for (p, s), ks in (((2, 12), (37, 100, 500, 2048)), ((5, 7), (68, 70))):
        ctx = make_field(p, s)
        desc = EvalSetDesc.monomial(1)
        D = image_set(ctx, desc)
        rows = reach_rows(ctx, D, active_indices(p, 1), ks)
        for target in consistent_targets(ctx, 1, 5, rng):
            rt = reduce_targets(ctx, target)
            for k in ks:
                cert = large_k_guarantee(RegimeParams.of(ctx, 1, rt, k, D.d))
                confirmed = bool(rows[k][rt.b_active[0]])
                results.append((ctx.q, k, target.b, cert is not None, confirmed))
        if p == 2:
            out = decide(ctx, desc, MomentTarget(1, (5,)), 40)
            results.append((ctx.q, 40, "decide", out.regime == "large-k-theorem-even", out.yes))
    bad = [r for r in results if not (r[3] and r[4])]
    elapsed = time.time() - start
    criterion(5, not bad and elapsed < 2700,
              f"{len(results)} certified YES checks, {len(bad)} contradictions, {elapsed:.0f}s")
    assert not bad, bad


# -- 6 and 8 -------------------------------------------------------------------------------

def small_instances():
    """Distinct images with |D| <= 10 from monomials and Dickson polynomials (n <= 6)."""
    out = []
    for p, s in prime_powers(2, 32):
        ctx = make_field(p, s)
        descs = [EvalSetDesc.monomial(n) for n in range(1, min(6, ctx.q - 1) + 1)]
        descs += [EvalSetDesc.dickson(n, a) for n in range(1, min(6, ctx.q - 1) + 1)
                  for a in range(1, ctx.q)]
        for D, gens in distinct_images(ctx, descs):
            if D.d <= 10:
                n = min(g.n for g in gens)
                out.append((ctx, D, n))
    return out


def exact_ordered_counts(ctx, D, active, kmax):
    table = count_table(ctx, D, active, kmax)
    return [table[k].astype(object) * math.factorial(k) for k in range(kmax + 1)]


def test_criterion_6_brun(criterion):
    violations, checked = [], 0
    for ctx, D, n in small_instances():
        for m in (1, 2):
            active = active_indices(ctx.p, m)
            M = exact_ordered_counts(ctx, D, active, min(4, D.d))
            for k in range(0, min(4, D.d) + 1):
                R, R12 = brun_vectors(ctx, D, active, k)
                lower = R.astype(object) - math.comb(k, 2) * R12.astype(object)
                checked += R.size
                bad = np.flatnonzero(M[k] < lower)
                violations += [(ctx.q, D.elements, m, k, int(i)) for i in bad]
    criterion(6, not violations, f"{checked} (instance, b) pairs, {len(violations)} violations")
    assert not violations, violations[:5]


def test_criterion_8_liwan(criterion):
    violations, checked, skipped = [], 0, 0
    for ctx, D, n in small_instances():
        for m in (1, 2):
            active = active_indices(ctx.p, m)
            M = exact_ordered_counts(ctx, D, active, min(4, D.d))
            for k in range(0, min(4, D.d) + 1):
                rp = RegimeParams(ctx.q, ctx.p, n, m, len(active), k, D.d)
                sharp, _ = liwan_bound(rp)
                if sharp <= 0:
                    skipped += M[k].size
                    continue
                for i, value in enumerate(M[k]):
                    checked += 1
                    if not float(liwan_deviation(int(value), rp)) < sharp:
                        violations.append((ctx.q, D.elements, m, k, i))
    criterion(8, not violations,
              f"{checked} checks with positive factors ({skipped} skipped), "
              f"{len(violations)} violations")
    assert not violations, violations[:5]


# -- 7 -----------------------------------------------------------------------------------

def distinct_tuple_sum(values, k):
    """sum over ordered k-tuples of distinct indices of prod values[i] (direct)."""
    d = values.size
    total = np.zeros((d,) * k, dtype=complex)
    total[...] = 1
    for axis in range(k):
        shape = [1] * k
        shape[axis] = d
        total = total * values.reshape(shape)
    grids = np.indices((d,) * k)
    mask = np.ones((d,) * k, dtype=bool)
    for i, j in itertools.combinations(range(k), 2):
        mask &= grids[i] != grids[j]
    return complex(total[mask].sum())


def test_criterion_7_choe(criterion):
    rng = np.random.default_rng(0)
    worst_rel, bound_checks, bound_fail, rec_checks = 0.0, 0, [], 0
    for s in (3, 4, 5):
        ctx = make_field(2, s)
        for D, descs in distinct_images(ctx, symbolic_sets(ctx)):
            if D.d <= 3:
                continue
            polys = [CharPoly((c1, 0, c3)) for c1 in range(ctx.q) for c3 in range(ctx.q)
                     if c1 or c3]
            sample = [polys[i] for i in rng.choice(len(polys), min(8, len(polys)), replace=False)]
            for f in sample:
                c = int(rng.integers(1, ctx.q))
                values = vcharacter(ctx, c, f(ctx, D.array))
                for k in range(1, min(4, D.d) + 1):
                    direct = distinct_tuple_sum(values, k)
                    rec = choe_recursion(ctx, D, f, c, k)
                    rel = abs(rec - direct) / max(1.0, abs(direct))
                    worst_rel = max(worst_rel, rel)
                    rec_checks += 1
            for f in polys if D.d > 4 else ():
                s1 = int(round(float(np.sum(vcharacter(ctx, 1, f(ctx, D.array))).real)))
                if 16 * abs(s1) > D.d:
                    continue
                for k in range(1, D.d // 2 + 1):
                    bound_checks += 1
                    if not abs(choe_recursion_exact(s1, D.d, k)) * 16**k < (9 * D.d) ** k:
                        bound_fail.append((ctx.q, D.elements, f.coeffs, k))
    passed = worst_rel <= 1e-6 and not bound_fail
    criterion(7, passed, f"{rec_checks} recursion checks (max rel err {worst_rel:.1e}), "
              f"{bound_checks} (9/16|D|)^k checks, {len(bound_fail)} bound failures")
    assert passed, bound_fail[:5]


# -- 9 -----------------------------------------------------------------------------------

def test_criterion_9_reductions(criterion):
    rng = np.random.default_rng(0)
    mismatches, inconsistent_checks, dual_checks = [], 0, 0
    # inconsistency: brute force over all m equations, including p | j
    for q in (4, 8, 9, 16, 27):
        ctx = field_of(q)
        for D, descs in distinct_images(ctx, symbolic_sets(ctx, nmax=3, a_count=1)):
            if D.d > 14:
                continue
            m = ctx.p + 1
            allj = tuple(range(1, m + 1))
            full_space = MomentSpace(ctx, allj)
            for _ in range(10):
                b = [int(x) for x in rng.integers(0, ctx.q, m)]
                target = MomentTarget(m, tuple(b))
                rt = reduce_targets(ctx, target)
                if rt.consistent:
                    continue
                want = full_space.vector_digits(b)
                for k in range(D.d + 1):
                    rows = brute_sums(ctx, D, allj, k)
                    count = int(np.count_nonzero((rows == want).all(axis=1)))
                    out = decide(ctx, descs[0], target, k)
                    inconsistent_checks += 1
                    if out.yes or count != 0 or out.regime != "inconsistent-targets":
                        mismatches.append(("inconsistent", q, b, k, count))
    # duality: exhaustive b, all k
    for q in (4, 5, 7, 8, 9, 11, 13):
        ctx = field_of(q)
        for D, descs in distinct_images(ctx, symbolic_sets(ctx)):
            if D.d > 14:
                continue
            for m in (1, 2):
                active = active_indices(ctx.p, m)
                space = MomentSpace(ctx, active)
                hists = []
                for k in range(D.d + 1):
                    idx = space.index_of_digits(brute_sums(ctx, D, active, k))
                    hists.append(np.bincount(idx, minlength=space.size))
                for values in itertools.product(range(ctx.q), repeat=len(active)):
                    b = [0] * m
                    for j, v in zip(active, values):
                        b[j - 1] = v
                    rt = reduce_targets(ctx, MomentTarget(m, tuple(b)))
                    for k in range(D.d + 1):
                        rt2, k2 = duality_transform(ctx, D, rt, k)
                        dual_checks += 1
                        if hists[k][space.encode(rt.b_active)] != hists[k2][space.encode(rt2.b_active)]:
                            mismatches.append(("duality", q, b, k))
    criterion(9, not mismatches, f"{inconsistent_checks} inconsistent-target checks, "
              f"{dual_checks} duality checks, {len(mismatches)} mismatches")
    assert not mismatches, mismatches[:5]
