"""Regime checks, sieve quantities and the decision dispatcher.

Every theorem hypothesis is evaluated in exact integer or rational
arithmetic.  Square roots are removed by squaring both sides, and the
logarithm in the large-k condition for odd p is replaced by a rigorous
upper bound from interval arithmetic, so a certificate is issued only
when the inequality provably holds.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np
from mpmath.libmp import to_rational

from .charsum import CharPoly, vcharacter
from .counting import (BRUTE_CAP, MEMORY_CAP, InstanceTooLarge, MomentSpace, MomentTarget,
                       ReducedTarget, StateSpaceTooLarge, count_brute, count_table,
                       duality_transform, reach_rows, reduce_targets)
from .evalsets import EvalSetDesc, ImageSet, image_set
from .field import FieldCtx

DEFAULT_BUDGET = 10**9
SEARCH_BUDGET = 10**6
WITNESS_BUDGET = 10**4

REGIMES = ("inconsistent-targets", "exact-dp", "exact-brute", "small-k-search",
           "medium-k-theorem", "large-k-theorem-odd", "large-k-theorem-even", "fallback-exact")

CERTIFICATE_SCHEMA = {
    "type": "object",
    "required": ["answer", "regime", "duality_applied", "hypotheses", "witness", "count"],
    "properties": {
        "answer": {"enum": ["YES", "NO"]},
        "regime": {"enum": list(REGIMES)},
        "duality_applied": {"type": "boolean"},
        "hypotheses": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "lhs", "rhs", "holds"],
                "properties": {
                    "name": {"type": "string"},
                    "lhs": {"type": "string"},
                    "rhs": {"type": "string"},
                    "holds": {"type": "boolean"},
                },
            },
        },
        "witness": {"type": ["array", "null"], "items": {"type": "integer"}},
        "count": {"type": ["integer", "null"]},
    },
}


class BudgetExceeded(RuntimeError):
    """No certified regime applies and the exact engines exceed the budget."""

    def __init__(self, message: str, hypotheses=()):
        super().__init__(message)
        self.hypotheses = list(hypotheses)


def default_budget() -> int:
    env = os.environ.get("MSS_BUDGET")
    return int(env) if env else DEFAULT_BUDGET


@dataclass(frozen=True)
class Hypothesis:
    name: str
    lhs: str
    rhs: str
    holds: bool

    @classmethod
    def check(cls, name: str, lhs, rhs, holds: bool) -> "Hypothesis":
        return cls(name, str(lhs), str(rhs), bool(holds))


@dataclass(frozen=True)
class RegimeParams:
    q: int
    p: int
    n: int
    m: int
    m_p: int
    k: int
    d: int

    @classmethod
    def of(cls, ctx: FieldCtx, n: int, rt: ReducedTarget, k: int, d: int) -> "RegimeParams":
        return cls(ctx.q, ctx.p, n, rt.m, rt.m_p, k, d)

    @property
    def s(self) -> int:
        return round(math.log(self.q, self.p))

    @property
    def sqrt_q(self) -> float:
        return math.sqrt(self.q)

    @property
    def ln_q(self) -> float:
        return math.log(self.q)

    @property
    def log2_q(self) -> float:
        return math.log2(self.q)


@dataclass
class DecisionOutcome:
    answer: str
    regime: str
    duality_applied: bool = False
    hypotheses: list[Hypothesis] = field(default_factory=list)
    witness: tuple[int, ...] | None = None
    count: int | None = None

    @property
    def yes(self) -> bool:
        return self.answer == "YES"

    def to_json(self) -> dict:
        return {
            "answer": self.answer,
            "regime": self.regime,
            "duality_applied": self.duality_applied,
            "hypotheses": [asdict(h) for h in self.hypotheses],
            "witness": None if self.witness is None else list(self.witness),
            "count": self.count,
        }


# -- theorem checks ------------------------------------------------------------------

def medium_k_hypotheses(rp: RegimeParams) -> list[Hypothesis]:
    """2n(mn+1) < q^(1/6) and 3m_p+1 < k < q^(5/12), as integer powers."""
    a = 2 * rp.n * (rp.m * rp.n + 1)
    return [
        Hypothesis.check("(2n(mn+1))^6 < q", a**6, rp.q, a**6 < rp.q),
        Hypothesis.check("3m_p+1 < k", 3 * rp.m_p + 1, rp.k, 3 * rp.m_p + 1 < rp.k),
        Hypothesis.check("k^12 < q^5", rp.k**12, rp.q**5, rp.k**12 < rp.q**5),
    ]


def medium_k_guarantee(rp: RegimeParams) -> list[Hypothesis] | None:
    """Checked hypotheses when the medium-k theorem certifies YES, else None."""
    hyps = medium_k_hypotheses(rp)
    return hyps if all(h.holds for h in hyps) else None


@lru_cache(maxsize=None)
def ln_upper(q: int) -> Fraction:
    """A rational number >= ln q, from the upper end of an interval enclosure."""
    with mpmath.workprec(80):
        interval = mpmath.iv.log(mpmath.iv.mpf(q))
    num, den = to_rational(interval._mpi_[1])
    return Fraction(num, den)


def large_k_hypotheses(rp: RegimeParams) -> list[Hypothesis]:
    mn1 = rp.m * rp.n + 1
    if rp.p == 2:
        s = rp.s
        lhs = 256 * rp.n**2 * mn1**2
        return [
            Hypothesis.check("256 n^2 (mn+1)^2 < q", lhs, rp.q, lhs < rp.q),
            Hypothesis.check("305 m_p log2(q) < 100 k", 305 * rp.m_p * s, 100 * rp.k,
                             305 * rp.m_p * s < 100 * rp.k),
            Hypothesis.check("2k <= |D|", 2 * rp.k, rp.d, 2 * rp.k <= rp.d),
        ]
    lhs = mn1**2 * rp.q * 10**6
    rhs = 169 * rp.d**2
    bound = 6 * rp.m_p * ln_upper(rp.q)
    return [
        Hypothesis.check("(mn+1)^2 q 10^6 <= 169 |D|^2", lhs, rhs, lhs <= rhs),
        Hypothesis.check("6 m_p ln(q) <= k [ln q rounded up]", f"{float(bound):.6f}", rp.k,
                         bound <= rp.k),
        Hypothesis.check("2k <= |D|", 2 * rp.k, rp.d, 2 * rp.k <= rp.d),
    ]


def large_k_guarantee(rp: RegimeParams) -> list[Hypothesis] | None:
    hyps = large_k_hypotheses(rp)
    return hyps if all(h.holds for h in hyps) else None


# -- sieve quantities ------------------------------------------------------------------

def _convolve_power(space: MomentSpace, hist: np.ndarray, start: np.ndarray, steps: int):
    out = start
    nz = np.flatnonzero(hist)
    for _ in range(steps):
        acc = np.zeros_like(out)
        for v in nz:
            acc += hist[v] * out[space.shift(int(v))]
        out = acc
    return out


def brun_vectors(ctx: FieldCtx, D: ImageSet, active, k: int,
                 memory_cap: int = MEMORY_CAP) -> tuple[np.ndarray, np.ndarray]:
    """R and R_12 for every target vector at once, indexed like the moment space."""
    space = MomentSpace(ctx, active)
    if space.size * 8 * 4 > memory_cap:
        raise StateSpaceTooLarge(f"moment space of size {space.size} exceeds the memory cap")
    dtype = np.int64 if D.d ** max(k, 1) < 2**62 else object
    hist = np.bincount(space.moment_index(D.array), minlength=space.size).astype(dtype)
    # moment vector of 2 x^j: double every digit mod p
    doubled = space.index_of_digits((2 * space.moment_digits(D.array)) % ctx.p)
    hist2 = np.bincount(doubled, minlength=space.size).astype(dtype)
    unit = np.zeros(space.size, dtype=dtype)
    unit[0] = 1
    R = _convolve_power(space, hist, unit, k)
    R12 = np.zeros(space.size, dtype=dtype) if k < 2 else _convolve_power(space, hist, hist2, k - 2)
    return R, R12


def brun_terms(ctx: FieldCtx, D: ImageSet, rt: ReducedTarget, k: int,
               memory_cap: int = MEMORY_CAP) -> tuple[int, int]:
    """(R, R_12): ordered k-tuples over D meeting the equations, and (k-1)-tuples
    whose first coordinate counts twice."""
    R, R12 = brun_vectors(ctx, D, rt.active, k, memory_cap)
    target = MomentSpace(ctx, rt.active).encode(rt.b_active)
    return int(R[target]), int(R12[target])


def choe_recursion(ctx: FieldCtx, D: ImageSet, f: CharPoly, c: int, k: int) -> complex:
    """S_D(k, psi_c, f), the sum over ordered k-tuples of distinct elements of D."""
    d = D.d
    if d <= 3:
        raise ValueError("the recursion needs |D| > 3")
    if not 1 <= k <= d:
        raise ValueError(f"k must lie in [1, {d}]")
    s1 = complex(np.sum(vcharacter(ctx, c, f(ctx, D.array))))
    prev, cur = 1 + 0j, s1
    for j in range(2, k + 1):
        coef = d if j == 2 else (d - j + 2) * (j - 1)
        prev, cur = cur, s1 * cur - coef * prev
    return cur


def choe_recursion_exact(S1: int, d: int, k: int) -> int:
    """The same recursion over the integers, for real-valued S_D(1) (p = 2)."""
    prev, cur = 1, S1
    for j in range(2, k + 1):
        coef = d if j == 2 else (d - j + 2) * (j - 1)
        prev, cur = cur, S1 * cur - coef * prev
    return cur if k >= 1 else 1


def falling_factorial(x, k: int):
    """(x)_k = x (x-1) ... (x-k+1); 0 when some factor is <= 0."""
    out = 1
    for i in range(k):
        factor = x - i
        if factor <= 0:
            return 0
        out *= factor
    return out


def liwan_bound(rp: RegimeParams) -> tuple[float, float]:
    """(sharp, relaxed) falling-factorial bounds on |M_k - (|D|)_k / q^{m_p}|."""
    w = (rp.m * rp.n + 1) * math.sqrt(rp.q)
    sharp = falling_factorial(w + rp.k + abs(w - rp.d) / rp.p - 1, rp.k)
    relaxed = falling_factorial(0.013 * rp.d + rp.k + rp.d / rp.p, rp.k)
    return float(sharp), float(relaxed)


def liwan_deviation(M_k: int, rp: RegimeParams) -> Fraction:
    """|M_k - (|D|)_k / q^{m_p}| exactly."""
    return abs(Fraction(M_k) - Fraction(math.perm(rp.d, rp.k), rp.q**rp.m_p))


# -- small k ---------------------------------------------------------------------------

class SearchBudgetExceeded(RuntimeError):
    pass


def small_k_solver(ctx: FieldCtx, D: ImageSet, rt: ReducedTarget, k: int,
                   node_budget: int = SEARCH_BUDGET) -> DecisionOutcome:
    """Exhaustive search over k-subsets with the last element found by table lookup."""
    hyps = [Hypothesis.check("k <= 3m+1", k, 3 * rt.m + 1, k <= 3 * rt.m + 1)]
    if not rt.consistent:
        return DecisionOutcome("NO", "inconsistent-targets", hypotheses=hyps)
    if k > D.d:
        return DecisionOutcome("NO", "small-k-search", hypotheses=hyps)
    elems = D.elements
    space = MomentSpace(ctx, rt.active)
    p, place = ctx.p, ctx.p ** np.arange(space.ndigits, dtype=np.int64)
    moments = space.moment_digits(D.array)
    target = space.vector_digits(rt.b_active)
    if k == 0:
        if not target.any():
            return DecisionOutcome("YES", "small-k-search", hypotheses=hyps, witness=())
        return DecisionOutcome("NO", "small-k-search", hypotheses=hyps)
    where: dict[int, list[int]] = {}
    for i, idx in enumerate(space.index_of_digits(moments).tolist()):
        where.setdefault(idx, []).append(i)
    nodes = 0

    def search(start: int, depth: int, remaining: np.ndarray, chosen: list[int]):
        nonlocal nodes
        nodes += 1
        if nodes > node_budget:
            raise SearchBudgetExceeded(f"search exceeded {node_budget} nodes")
        if depth == 1:
            for i in where.get(int(remaining @ place), ()):
                if i >= start:
                    return chosen + [i]
            return None
        stop = len(elems) - depth + 1
        rests = (remaining - moments[start:stop]) % p
        if depth == 2:
            # the last element is a table lookup, so scan all second-to-last choices at once
            nodes += stop - start
            for off, idx in enumerate((rests @ place).tolist()):
                for j in where.get(idx, ()):
                    if j > start + off:
                        return chosen + [start + off, j]
            if nodes > node_budget:
                raise SearchBudgetExceeded(f"search exceeded {node_budget} nodes")
            return None
        for off in range(stop - start):
            found = search(start + off + 1, depth - 1, rests[off], chosen + [start + off])
            if found is not None:
                return found
        return None

    found = search(0, k, target, [])
    if found is None:
        return DecisionOutcome("NO", "small-k-search", hypotheses=hyps)
    return DecisionOutcome("YES", "small-k-search", hypotheses=hyps,
                           witness=tuple(elems[i] for i in found))


# -- dispatcher ------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _image(ctx: FieldCtx, desc: EvalSetDesc) -> ImageSet:
    return image_set(ctx, desc)


_TABLES: dict = {}


def _count_layers(ctx: FieldCtx, D: ImageSet, active, k: int, memory_cap: int) -> np.ndarray:
    """Counting table with at least k+1 layers, cached per set (layers grow by doubling)."""
    key = (ctx, D.elements, tuple(active))
    table = _TABLES.get(key)
    if table is None or table.shape[0] <= k:
        have = 0 if table is None else table.shape[0] - 1
        kmax = min(D.d, max(k, 2 * have))
        try:
            table = count_table(ctx, D, active, kmax, memory_cap)
        except StateSpaceTooLarge:
            table = count_table(ctx, D, active, k, memory_cap)
        _remember(key, table)
    return table


def _reach_layer(ctx: FieldCtx, D: ImageSet, active, k: int, memory_cap: int) -> np.ndarray:
    """Boolean DP row k; all rows up to |D|/2 are computed and cached when that is cheap."""
    key = ("reach", ctx, D.elements, tuple(active))
    rows = _TABLES.get(key)
    if rows is None or k not in rows:
        size = ctx.q ** len(active)
        half = D.d // 2
        if k <= half and D.d * half * size <= 10**8:
            rows = reach_rows(ctx, D, active, range(half + 1), memory_cap)
        else:
            rows = reach_rows(ctx, D, active, [k], memory_cap)
        _remember(key, rows)
    return rows[k]


def _remember(key, value) -> None:
    if len(_TABLES) >= 8:
        _TABLES.pop(next(iter(_TABLES)))
    _TABLES[key] = value


def count_cost(d: int, k: int, size: int) -> int:
    """Cost of the counting DP in boolean-transition units.

    A 64-bit count moves 8 bytes per state; counts beyond 64 bits live in
    Python integers, priced at 512 units per state.
    """
    per_state = 8 if math.comb(d, min(k, d - k)) < 2**62 else 512
    return d * max(k, 1) * size * per_state


def verify_witness(ctx: FieldCtx, D: ImageSet, rt: ReducedTarget, k: int, witness) -> bool:
    members = set(D.elements)
    if len(set(witness)) != k or any(w not in members for w in witness):
        return False
    ws = np.array(witness, dtype=np.int64)
    return all(ctx.vsum(ctx.vpow(ws, j)) == b for j, b in zip(rt.active, rt.b_active))


def decide(ctx: FieldCtx, desc: EvalSetDesc, target: MomentTarget, k: int,
           budget: int | None = None, search_budget: int = SEARCH_BUDGET,
           memory_cap: int = MEMORY_CAP) -> DecisionOutcome:
    """Decide whether some k-subset of D = g(F_q) has the prescribed moments."""
    if k < 0:
        raise ValueError("k must be non-negative")
    budget = default_budget() if budget is None else budget
    D = _image(ctx, desc)
    rt = reduce_targets(ctx, target)
    if not rt.consistent:
        return DecisionOutcome("NO", "inconsistent-targets", hypotheses=[
            Hypothesis.check("b_i^p = b_ip for all ip <= m", "false", "true", False)])
    d = D.d
    if k > d:
        return DecisionOutcome("NO", "exact-dp", count=0,
                               hypotheses=[Hypothesis.check("k <= |D|", k, d, False)])
    hyps: list[Hypothesis] = []
    dual = 2 * k > d
    work_rt, work_k = duality_transform(ctx, D, rt, k) if dual else (rt, k)
    size = ctx.q**rt.m_p

    def finish(out: DecisionOutcome) -> DecisionOutcome:
        if out.yes and out.witness is None and work_k <= 3 * rt.m + 1:
            # exact regimes certify by count; attach a witness when one is cheap to find
            try:
                found = small_k_solver(ctx, D, work_rt, work_k, WITNESS_BUDGET)
                out.witness = found.witness
            except SearchBudgetExceeded:
                pass
        out.duality_applied = dual
        out.hypotheses = hyps + out.hypotheses
        if out.witness is not None and dual:
            chosen = set(out.witness)
            out.witness = tuple(y for y in D.elements if y not in chosen)
        if out.witness is not None and not verify_witness(ctx, D, rt, k, out.witness):
            raise AssertionError("witness failed verification")
        return out

    # exact counting when the table fits the budget
    cost = count_cost(d, work_k, size)
    hyps.append(Hypothesis.check("counting DP cost <= budget", cost, budget, cost <= budget))
    if cost <= budget:
        try:
            table = _count_layers(ctx, D, rt.active, work_k, memory_cap)
            count = int(table[work_k, MomentSpace(ctx, rt.active).encode(work_rt.b_active)])
            return finish(DecisionOutcome("YES" if count else "NO", "exact-dp", count=count))
        except StateSpaceTooLarge:
            if math.comb(d, work_k) <= BRUTE_CAP:
                count = count_brute(ctx, D, work_rt, work_k).value
                return finish(DecisionOutcome("YES" if count else "NO", "exact-brute",
                                              count=count))

    if work_k <= 3 * rt.m + 1:
        try:
            return finish(small_k_solver(ctx, D, work_rt, work_k, search_budget))
        except SearchBudgetExceeded:
            hyps.append(Hypothesis.check("search nodes <= budget", f">{search_budget}",
                                         search_budget, False))

    if desc.symbolic:
        rp = RegimeParams.of(ctx, desc.n, rt, work_k, d)
        medium = medium_k_hypotheses(rp)
        if all(h.holds for h in medium):
            return finish(DecisionOutcome("YES", "medium-k-theorem", hypotheses=medium))
        large = large_k_hypotheses(rp)
        if all(h.holds for h in large):
            regime = "large-k-theorem-even" if ctx.p == 2 else "large-k-theorem-odd"
            return finish(DecisionOutcome("YES", regime, hypotheses=medium + large))
        hyps.extend(medium + large)

    bool_cost = d * max(work_k, 1) * size
    if bool_cost <= budget:
        try:
            row = _reach_layer(ctx, D, rt.active, work_k, memory_cap)
            hit = bool(row[MomentSpace(ctx, rt.active).encode(work_rt.b_active)])
            return finish(DecisionOutcome("YES" if hit else "NO", "fallback-exact"))
        except StateSpaceTooLarge:
            pass
    raise BudgetExceeded("outside certified regimes and the exact engines exceed the budget "
                         f"(boolean DP cost {bool_cost}, budget {budget})", hyps)


def decide_counts(ctx: FieldCtx, D: ImageSet, rt: ReducedTarget, k: int) -> int:
    """Exact N_k through the cached table (used by oracle sweeps)."""
    if not rt.consistent or k > D.d:
        return 0
    table = _count_layers(ctx, D, rt.active, k, MEMORY_CAP)
    return int(table[k, MomentSpace(ctx, rt.active).encode(rt.b_active)])


__all__ = [
    "BudgetExceeded", "CERTIFICATE_SCHEMA", "DecisionOutcome", "Hypothesis", "RegimeParams",
    "brun_terms", "brun_vectors", "choe_recursion", "choe_recursion_exact", "decide", "falling_factorial",
    "large_k_guarantee", "liwan_bound", "liwan_deviation", "medium_k_guarantee",
    "small_k_solver", "InstanceTooLarge",
]
