"""Small-instance oracle suites behind the ``selftest`` subcommand."""

from __future__ import annotations

import numpy as np

from .charsum import weil_audit
from .counting import (brute_sums, count_table, MomentSpace, active_indices, duality_transform,
                       count_brute, reduce_targets, MomentTarget)
from .evalsets import (EvalSetDesc, enumerated_preimage_count, image_set, preimage_count,
                       value_set_size_formula)
from .field import make_field

FIELDS = [(2, 2), (5, 1), (7, 1), (2, 3), (3, 2)]


def _sets(ctx):
    out = [EvalSetDesc.monomial(n) for n in (1, 2, 3)]
    out += [EvalSetDesc.dickson(n, a) for n in (2, 3) for a in (1, ctx.q - 1)]
    return out


def check_counts() -> tuple[bool, str]:
    cases = 0
    for p, s in FIELDS:
        ctx = make_field(p, s)
        for desc in _sets(ctx):
            D = image_set(ctx, desc)
            for m in (1, 2):
                active = active_indices(p, m)
                space = MomentSpace(ctx, active)
                table = count_table(ctx, D, active, D.d)
                for k in range(D.d + 1):
                    idx = space.index_of_digits(brute_sums(ctx, D, active, k))
                    hist = np.bincount(idx, minlength=space.size)
                    if not np.array_equal(hist, table[k].astype(np.int64)):
                        return False, f"DP and brute force differ on {ctx} {desc} m={m} k={k}"
                    cases += 1
    return True, f"{cases} count histograms agree"


def check_duality() -> tuple[bool, str]:
    ctx = make_field(7)
    D = image_set(ctx, EvalSetDesc.monomial(1))
    rng = np.random.default_rng(0)
    for _ in range(20):
        b = tuple(int(x) for x in rng.integers(0, 7, size=2))
        rt = reduce_targets(ctx, MomentTarget(2, b))
        k = int(rng.integers(0, D.d + 1))
        rt2, k2 = duality_transform(ctx, D, rt, k)
        if count_brute(ctx, D, rt, k).value != count_brute(ctx, D, rt2, k2).value:
            return False, f"duality fails for b={b} k={k}"
    return True, "20 complement pairs agree"


def check_formulas() -> tuple[bool, str]:
    checks = 0
    for q_ps in [(3, 1), (5, 1), (7, 1), (3, 2), (11, 1), (2, 2), (2, 3), (2, 4)]:
        ctx = make_field(*q_ps)
        for n in range(2, min(7, ctx.q)):
            for a in range(1, ctx.q):
                if ctx.p != 2:
                    desc = EvalSetDesc.dickson(n, a)
                    if value_set_size_formula(ctx, desc) != image_set(ctx, desc).d:
                        return False, f"value-set size differs for {ctx} {desc}"
                for x0 in range(ctx.q):
                    if preimage_count(ctx, n, a, x0) != enumerated_preimage_count(ctx, n, a, x0):
                        return False, f"fiber size differs for {ctx} n={n} a={a} x0={x0}"
                    checks += 1
    return True, f"{checks} fiber sizes agree"


def check_audits() -> tuple[bool, str]:
    total = 0
    for p, s in [(5, 1), (7, 1), (2, 4), (5, 2)]:
        ctx = make_field(p, s)
        descs = [None, EvalSetDesc.monomial(2), EvalSetDesc.dickson(3, 1)]
        reports = weil_audit(ctx, descs, 3, keep="worst")
        bad = [r for r in reports if not r.passed]
        if bad:
            return False, f"bound violated: {bad[0].record()}"
        total += sum(r.n_covered for r in reports)
    return True, f"{total} character sums within their bounds"


SUITES = [("counting", check_counts), ("duality", check_duality),
          ("formulas", check_formulas), ("audits", check_audits)]


def run_selftest():
    return [(name, *fn()) for name, fn in SUITES]
