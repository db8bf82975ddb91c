"""Exact counts of moment subset-sum solutions.

N_k(D, b, m) counts k-subsets S of D with sum_{y in S} y^j = b_j for every
active index j (1 <= j <= m, p not dividing j).  Moment vectors live in
F_q^{m_p}; a vector is stored as one integer, the base-p number whose
digits are the coefficient digits of each component, component t
occupying digits s*t .. s*t + s - 1.  Adding two moment vectors is
digit-wise addition mod p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations

import numpy as np

from .evalsets import ImageSet
from .field import FieldCtx

MEMORY_CAP = 2 * 2**30
BRUTE_CAP = 10**7
_SMALL_BRUTE = 200_000


class StateSpaceTooLarge(RuntimeError):
    pass


class InstanceTooLarge(RuntimeError):
    pass


@dataclass(frozen=True)
class MomentTarget:
    m: int
    b: tuple[int, ...]

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be positive")
        if len(self.b) != self.m:
            raise ValueError(f"expected {self.m} target values, got {len(self.b)}")


@dataclass(frozen=True)
class ReducedTarget:
    active: tuple[int, ...]
    b_active: tuple[int, ...]
    consistent: bool
    m: int

    @property
    def m_p(self) -> int:
        return len(self.active)


@dataclass(frozen=True)
class CountResult:
    value: int
    kind: str  # "N_k" or "M_k"

    def __int__(self) -> int:
        return self.value


def active_indices(p: int, m: int) -> tuple[int, ...]:
    return tuple(j for j in range(1, m + 1) if j % p)


def reduce_targets(ctx: FieldCtx, t: MomentTarget) -> ReducedTarget:
    """Check b_i^p = b_{ip} for all ip <= m and drop the indices divisible by p."""
    for e in t.b:
        ctx.check(e)
    p = ctx.p
    consistent = all(ctx.pow(t.b[i - 1], p) == t.b[i * p - 1] for i in range(1, t.m // p + 1))
    active = active_indices(p, t.m)
    return ReducedTarget(active, tuple(t.b[j - 1] for j in active), consistent, t.m)


class MomentSpace:
    """The group F_q^{m_p} of moment vectors, indexed by integers in [0, q^{m_p})."""

    def __init__(self, ctx: FieldCtx, active):
        self.ctx = ctx
        self.active = tuple(active)
        self.width = len(self.active)
        self.ndigits = ctx.s * self.width
        self.size = ctx.q**self.width

    def encode(self, values) -> int:
        q = self.ctx.q
        return sum(int(v) * q**t for t, v in enumerate(values))

    def decode(self, index: int) -> tuple[int, ...]:
        q = self.ctx.q
        return tuple((index // q**t) % q for t in range(self.width))

    def moment_digits(self, ys) -> np.ndarray:
        """Digits of the moment vectors (y^j)_j for an array of elements, shape (len, ndigits)."""
        ys = np.asarray(ys, dtype=np.int64)
        cols = [self.ctx.vdigits(self.ctx.vpow(ys, j)) for j in self.active]
        if not cols:
            return np.zeros((ys.size, 0), dtype=np.int64)
        return np.concatenate(cols, axis=-1).reshape(ys.size, self.ndigits)

    def vector_digits(self, values) -> np.ndarray:
        return np.concatenate([self.ctx.vdigits(np.array([v]))[0] for v in values]) \
            if values else np.zeros(0, dtype=np.int64)

    @cached_property
    def _place(self) -> np.ndarray:
        return self.ctx.p ** np.arange(self.ndigits, dtype=np.int64)

    def index_of_digits(self, digits: np.ndarray) -> np.ndarray:
        return np.asarray(digits, dtype=np.int64) @ self._place

    def moment_index(self, ys) -> np.ndarray:
        return self.index_of_digits(self.moment_digits(ys))

    @cached_property
    def _state_digits(self) -> np.ndarray:
        idx = np.arange(self.size, dtype=np.int64)
        return (idx[:, None] // self._place) % self.ctx.p

    def shift(self, v: int) -> np.ndarray:
        """Permutation ``perm`` with ``perm[x] = x - v`` in the group."""
        p = self.ctx.p
        idx = np.arange(self.size, dtype=np.int64)
        if p == 2:
            return idx ^ v
        if self.ndigits == 1:
            return (idx - v) % p
        vd = (v // self._place) % p
        return ((self._state_digits - vd) % p) @ self._place


def _check_memory(layers: int, size: int, itemsize: int, cap: int) -> None:
    need = layers * size * itemsize
    if need > cap:
        raise StateSpaceTooLarge(
            f"DP table needs {need / 2**30:.2f} GiB (cap {cap / 2**30:.2f} GiB); "
            "use the boolean engine or brute force")


def count_table(ctx: FieldCtx, D: ImageSet, active, kmax: int,
                memory_cap: int = MEMORY_CAP) -> np.ndarray:
    """Table T[c, v]: number of c-subsets of D with moment vector v, for c <= kmax.

    Elements are processed in sorted order; exact 64-bit counts are used
    when C(|D|, |D|//2) fits, Python integers otherwise.
    """
    space = MomentSpace(ctx, active)
    d = D.d
    kmax = min(kmax, d)
    exact64 = math.comb(d, d // 2) < 2**62
    dtype = np.int64 if exact64 else object
    _check_memory(kmax + 1, space.size, 8 if exact64 else 32, memory_cap)
    table = np.zeros((kmax + 1, space.size), dtype=dtype)
    table[0, 0] = 1
    moments = space.moment_index(D.array)
    for i, v in enumerate(moments):
        top = min(i + 1, kmax)
        if top == 0:
            break
        perm = space.shift(int(v))
        table[1:top + 1] += table[0:top][:, perm]
    return table


def reach_rows(ctx: FieldCtx, D: ImageSet, active, ks,
               memory_cap: int = MEMORY_CAP, seed: int = 0) -> dict[int, np.ndarray]:
    """Boolean rows R[k, v] (some k-subset of D has moment vector v) for each k in ``ks``.

    Elements are visited in a fixed pseudorandom order (``seed``) so that
    partial sums spread over the group early; the rows do not depend on
    the order.  A layer that already holds every vector can no longer
    change, and a layer only matters while it feeds an unsaturated
    requested layer above it, so each step updates just the layers still
    needed and the scan ends once every requested layer is saturated.
    """
    space = MomentSpace(ctx, active)
    d = D.d
    ks = sorted({int(k) for k in ks})
    if any(k < 0 for k in ks):
        raise ValueError("k must be non-negative")
    wanted = [k for k in ks if k <= d]
    out = {k: np.zeros(space.size, dtype=bool) for k in ks if k > d}
    if not wanted:
        return out
    kmax = wanted[-1]
    _check_memory(kmax + 1, space.size, 1, memory_cap)
    table = np.zeros((kmax + 1, space.size), dtype=bool)
    table[0, 0] = True
    layer = np.arange(kmax + 1)
    big = kmax + 1
    is_target = np.zeros(kmax + 1, dtype=bool)
    is_target[wanted] = True
    next_target = np.minimum.accumulate(np.where(is_target, layer, big)[::-1])[::-1]
    full = np.zeros(kmax + 1, dtype=bool)
    full[0] = space.size == 1

    def needed_layers() -> np.ndarray:
        next_full = np.minimum.accumulate(np.where(full, layer, big)[::-1])[::-1]
        return (next_target < next_full) & ~full

    needed = needed_layers()
    moments = space.moment_index(D.array)
    order = np.random.default_rng(seed).permutation(d)
    for i, pos in enumerate(order):
        top = min(i + 1, kmax)
        rows = np.flatnonzero(needed[1:top + 1]) + 1
        if rows.size:
            perm = space.shift(int(moments[pos]))
            table[rows] |= table[rows - 1][:, perm]
        if i % 4 == 3 or i + 1 >= kmax:
            full[rows] = table[rows].all(axis=1)
            needed = needed_layers()
            if not needed[1:].any():
                break
    for k in wanted:
        out[k] = table[k].copy()
    return out


def reach_table(ctx: FieldCtx, D: ImageSet, active, kmax: int,
                memory_cap: int = MEMORY_CAP, seed: int = 0) -> np.ndarray:
    """Boolean table R[c, v] for every layer c <= min(kmax, |D|)."""
    kmax = min(kmax, D.d)
    rows = reach_rows(ctx, D, active, range(kmax + 1), memory_cap, seed)
    return np.stack([rows[c] for c in range(kmax + 1)])


def _target_index(ctx: FieldCtx, rt: ReducedTarget) -> int:
    return MomentSpace(ctx, rt.active).encode(rt.b_active)


def count_exact_dp(ctx: FieldCtx, D: ImageSet, rt: ReducedTarget, k: int,
                   memory_cap: int = MEMORY_CAP) -> CountResult:
    if k < 0:
        raise ValueError("k must be non-negative")
    if not rt.consistent or k > D.d:
        return CountResult(0, "N_k")
    table = count_table(ctx, D, rt.active, k, memory_cap)
    return CountResult(int(table[k, _target_index(ctx, rt)]), "N_k")


def reachable(ctx: FieldCtx, D: ImageSet, rt: ReducedTarget, k: int,
              memory_cap: int = MEMORY_CAP) -> bool:
    """Boolean DP: does some k-subset of D meet every active moment equation?"""
    if k < 0:
        raise ValueError("k must be non-negative")
    if not rt.consistent or k > D.d:
        return False
    row = reach_rows(ctx, D, rt.active, [k], memory_cap)[k]
    return bool(row[_target_index(ctx, rt)])


# -- brute force ---------------------------------------------------------------

def brute_sums(ctx: FieldCtx, D: ImageSet, active, k: int, cap: int = BRUTE_CAP) -> np.ndarray:
    """Moment-vector digits of every k-subset of D, one row per subset.

    Subsets are listed one by one.  Small instances go through
    itertools.combinations; larger ones extend index-sorted partial
    subsets level by level.  Above |D|/2 the rows are produced from the
    enumerated complements as (moments of D) - (moments of the complement).
    """
    d = D.d
    if k < 0 or k > d:
        return np.zeros((0, ctx.s * len(active)), dtype=np.int64)
    n_subsets = math.comb(d, k)
    if n_subsets > cap:
        raise InstanceTooLarge(f"C({d}, {k}) = {n_subsets} subsets exceeds the brute-force cap {cap}")
    space = MomentSpace(ctx, active)
    table = space.moment_digits(D.array)
    p = ctx.p
    if n_subsets <= _SMALL_BRUTE:
        if k == 0:
            return np.zeros((1, space.ndigits), dtype=np.int64)
        combos = np.array(list(combinations(range(d), k)), dtype=np.int64).reshape(-1, k)
        return table[combos].sum(axis=1) % p
    if 2 * k > d:
        total = table.sum(axis=0) % p
        return (total - _level_sums(table, d - k, p)) % p
    return _level_sums(table, k, p)


def _level_sums(table: np.ndarray, k: int, p: int) -> np.ndarray:
    d = table.shape[0]
    if k == 0:
        return np.zeros((1, table.shape[1]), dtype=np.int64)
    last = np.arange(d - k + 1, dtype=np.int64)
    sums = table[last].copy()
    for r in range(2, k + 1):
        limit = d - 1 - (k - r)  # largest index that still leaves room
        counts = np.maximum(limit - last, 0)
        parent = np.repeat(np.arange(last.size), counts)
        starts = np.cumsum(counts) - counts
        offsets = np.arange(parent.size) - np.repeat(starts, counts)
        last = last[parent] + 1 + offsets
        sums = (sums[parent] + table[last]) % p
    return sums


def count_brute(ctx: FieldCtx, D: ImageSet, rt: ReducedTarget, k: int,
                cap: int = BRUTE_CAP) -> CountResult:
    if not rt.consistent or k < 0 or k > D.d:
        return CountResult(0, "N_k")
    sums = brute_sums(ctx, D, rt.active, k, cap)
    target = MomentSpace(ctx, rt.active).vector_digits(rt.b_active)
    return CountResult(int(np.count_nonzero((sums == target).all(axis=1))), "N_k")


def ordered_count(ctx: FieldCtx, D: ImageSet, rt: ReducedTarget, k: int,
                  memory_cap: int = MEMORY_CAP) -> CountResult:
    n_k = count_exact_dp(ctx, D, rt, k, memory_cap).value
    return CountResult(math.factorial(k) * n_k, "M_k")


def power_sums(ctx: FieldCtx, D: ImageSet, exponents) -> tuple[int, ...]:
    return tuple(ctx.vsum(ctx.vpow(D.array, j)) for j in exponents)


def duality_transform(ctx: FieldCtx, D: ImageSet, rt: ReducedTarget, k: int):
    """Complement map: N_k(D, b) = N_{|D|-k}(D, P - b), P the power sums of D."""
    totals = power_sums(ctx, D, rt.active)
    b_new = tuple(ctx.sub(P, b) for P, b in zip(totals, rt.b_active))
    return ReducedTarget(rt.active, b_new, rt.consistent, rt.m), D.d - k
