"""Additive character sums over evaluation sets and audits of their bounds.

Characters are psi_c(x) = exp(2 pi i Tr(c x) / p).  Every audited sum has
the shape  sum_y G(y) psi_c(f(y))  for a weight function G on F_q (the
indicator of an image set, fiber counts, or a twist summed over each
fiber), so one engine covers all families.  Exhaustive sweeps run over
every admissible f with the canonical character psi_1, which reaches every
(f, psi_c) pair because psi_c(f) = psi_1(c f).  For fixed higher
coefficients the sums over all linear coefficients c_1 form one additive
Fourier transform of F_q, computed with numpy's FFT on the digit grid.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .evalsets import EvalSetDesc, evaluate, image_set
from .field import FieldCtx

EPS_NUM = 1e-6
EQUALITY_TOL = 1e-9


@dataclass(frozen=True)
class CharPoly:
    """f(x) = sum_j coeffs[j-1] x^j with c_j = 0 whenever p | j."""

    coeffs: tuple[int, ...]

    @property
    def m(self) -> int:
        return len(self.coeffs)

    @property
    def degree(self) -> int:
        return max((j for j, c in enumerate(self.coeffs, 1) if c), default=0)

    def validate(self, ctx: FieldCtx) -> None:
        for j, c in enumerate(self.coeffs, 1):
            ctx.check(c)
            if c and j % ctx.p == 0:
                raise ValueError(f"coefficient c_{j} must vanish since p={ctx.p} divides {j}")

    def __call__(self, ctx: FieldCtx, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        out = np.zeros_like(x)
        for j, c in enumerate(self.coeffs, 1):
            if c:
                out = ctx.vadd(out, ctx.vmul(c, ctx.vpow(x, j)))
        return out


@dataclass
class CharSumReport:
    sum_value: complex
    bound: float
    context: dict
    n_covered: int = 1
    discrepancy: float | None = None

    @property
    def margin(self) -> float:
        return self.bound - abs(self.sum_value)

    @property
    def passed(self) -> bool:
        ok = self.margin >= -EPS_NUM
        if self.discrepancy is not None:
            ok = ok and self.discrepancy <= EQUALITY_TOL
        return ok

    def record(self) -> dict:
        out = dict(self.context)
        out.update(abs_sum=abs(self.sum_value), bound=self.bound, margin=self.margin,
                   passed=self.passed)
        if self.n_covered != 1:
            out["n_covered"] = self.n_covered
        if self.discrepancy is not None:
            out["discrepancy"] = self.discrepancy
        return out


# -- characters ----------------------------------------------------------------

def _roots(p: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(p) / p)


def additive_character(ctx: FieldCtx, c: int, x: int) -> complex:
    t = ctx.trace(ctx.mul(c, x))
    return complex(np.exp(2j * np.pi * t / ctx.p))


def vcharacter(ctx: FieldCtx, c: int, x) -> np.ndarray:
    return _roots(ctx.p)[ctx.vtrace(ctx.vmul(c, x))]


def weighted_char_sum(ctx: FieldCtx, weights: np.ndarray, f: CharPoly, c: int = 1) -> complex:
    """sum_y weights[y] psi_c(f(y)) by direct summation."""
    ys = np.flatnonzero(weights)
    if ys.size == 0:
        return 0j
    return complex(np.sum(weights[ys] * vcharacter(ctx, c, f(ctx, ys))))


def poly_char_sum(ctx, D, f: CharPoly, c: int = 1) -> complex:
    """sum_{x in D} psi_c(f(x)); numpy's pairwise summation keeps rounding small."""
    xs = D.array if hasattr(D, "array") else np.asarray(D, dtype=np.int64)
    return complex(np.sum(vcharacter(ctx, c, f(ctx, xs))))


# -- audit families --------------------------------------------------------------

@dataclass
class Family:
    name: str
    weights: np.ndarray  # complex, length q
    bound: callable  # degree of f -> bound
    twin: np.ndarray | None = None  # second weight vector that must give an equal sum
    notes: dict = field(default_factory=dict)


def audit_families(ctx: FieldCtx, desc: EvalSetDesc | None) -> list[Family]:
    """Weight functions and bounds to audit for a set descriptor (None = whole field)."""
    q, sq = ctx.q, math.sqrt(ctx.q)
    xs = ctx.elements()
    if desc is None:
        return [Family("complete", np.ones(q, dtype=complex), lambda deg: (deg - 1) * sq)]
    if desc.kind == "explicit":
        return []
    if desc.kind == "monomial" or desc.a == 0:
        n = desc.n
        if (n + 1) ** 2 > q:
            return []
        ind = np.zeros(q, dtype=complex)
        ind[np.array(image_set(ctx, desc).elements)] = 1
        return [Family("monomial-image", ind, lambda deg: deg * sq)]

    n, a = desc.n, desc.a
    values = evaluate(ctx, desc, xs)
    ind = np.zeros(q, dtype=complex)
    ind[values] = 1
    fibers = np.bincount(values, minlength=q).astype(complex)
    fams = [
        Family("dickson-image", ind, lambda deg: (deg * n + 1) * sq),
        Family("dickson-complete", fibers, lambda deg: (deg * n - 1) * sq),
    ]
    if ctx.p != 2:
        disc = ctx.vadd(ctx.vmul(xs, xs), ctx.vneg(np.full(q, ctx.mul(4 % ctx.p, a))))
        eta = ctx.vquadratic_character(disc).astype(float)
        w = np.bincount(values, weights=eta, minlength=q).astype(complex)
        fams.append(Family("dickson-eta-twist", w, lambda deg: (deg * n + 1) * sq))
    else:
        nz = xs[1:]
        inv = ctx.vinv(nz)
        sign1 = 1.0 - 2.0 * ctx.vtrace(ctx.vmul(a, ctx.vmul(inv, inv)))
        a_half = ctx.pow(a, q // 2)
        sign2 = 1.0 - 2.0 * ctx.vtrace(ctx.vmul(a_half, inv))
        w1 = np.bincount(values[1:], weights=sign1, minlength=q).astype(complex)
        w2 = np.bincount(values[1:], weights=sign2, minlength=q).astype(complex)
        fams.append(Family("dickson-trace-twist", w1, lambda deg: (deg * n + 1) * sq, twin=w2))
    return fams


# -- exhaustive sweep ------------------------------------------------------------

class _Sweeper:
    """Sums sum_y G(y) psi_1(f(y)) for all f with coefficients on ``js``."""

    def __init__(self, ctx: FieldCtx, js):
        self.ctx = ctx
        self.js = tuple(js)
        q, p, s = ctx.q, ctx.p, ctx.s
        xs = ctx.elements()
        # trace form: Tr(c * y) = <U[c], digits(y)> mod p
        basis = p ** np.arange(s, dtype=np.int64)
        self.U = np.stack([ctx.vtrace(ctx.vmul(xs, b)) for b in basis], axis=1)
        self.perm_u = self.U @ basis
        self.phase = {j: (self.U @ ctx.vdigits(ctx.vpow(xs, j)).T) % p for j in self.js if j != 1}
        self.roots = _roots(p)

    def _transform(self, g: np.ndarray) -> np.ndarray:
        """Map g[..., y] to out[..., c1] = sum_y g[..., y] psi_1(c1 y)."""
        ctx = self.ctx
        shape = g.shape[:-1]
        grid = g.reshape(shape + (ctx.p,) * ctx.s)
        axes = tuple(range(len(shape), len(shape) + ctx.s))
        out = np.fft.ifftn(grid, axes=axes).reshape(shape + (ctx.q,)) * ctx.q
        return out[..., self.perm_u]

    def batches(self, weights: np.ndarray):
        """Yield (outer_coeffs, sums) with sums[..., i, c1] for each outer coefficient row i.

        ``weights`` has shape (F, q); ``outer_coeffs`` has one row per higher
        coefficient vector (c_j for j in js, j != 1) and ``sums`` has shape
        (F, rows, q).
        """
        q = self.ctx.q
        outer = [j for j in self.js if j != 1]
        if not outer:
            yield np.zeros((1, 0), dtype=np.int64), self._transform(weights[:, None, :])
            return
        head, last = outer[:-1], outer[-1]
        for fixed in itertools.product(range(q), repeat=len(head)):
            base = np.zeros(q, dtype=np.int64)
            for j, c in zip(head, fixed):
                base += self.phase[j][c]
            ph = (base[None, :] + self.phase[last]) % self.ctx.p
            g = weights[:, None, :] * self.roots[ph][None, :, :]
            coeffs = np.column_stack([np.tile(np.array(fixed, dtype=np.int64), (q, 1)),
                                      np.arange(q, dtype=np.int64)])
            yield coeffs, self._transform(g)


def _degrees(js, outer_coeffs: np.ndarray, q: int) -> np.ndarray:
    """Degree of f for every (outer row, c1) pair, 0 for the zero polynomial."""
    rows = outer_coeffs.shape[0]
    deg = np.zeros((rows, q), dtype=np.int64)
    deg[:, 1:] = 1
    outer = [j for j in js if j != 1]
    for col, j in enumerate(outer):
        nz = outer_coeffs[:, col] != 0
        deg[nz, :] = j
    return deg


def _coeff_tuple(m: int, js, outer_row, c1) -> tuple[int, ...]:
    coeffs = [0] * m
    coeffs[0] = int(c1)
    for j, c in zip([j for j in js if j != 1], outer_row):
        coeffs[j - 1] = int(c)
    return tuple(coeffs)


def _context(ctx, desc, fam, m, char, coeffs, seed=None) -> dict:
    out = {"field": str(ctx), "set": str(desc) if desc is not None else "complete",
           "family": fam.name, "m": m, "character": char, "coeffs": list(coeffs)}
    if seed is not None:
        out["seed"] = seed
    return out


def _exhaustive(ctx, items, m: int, keep: str) -> list[list[CharSumReport]]:
    """Sweep every admissible f once for all ``(desc, Family)`` items.

    Identical weight vectors are transformed only once.  Returns one report
    list per item, in input order.
    """
    js = [j for j in range(1, m + 1) if j % ctx.p]
    vectors: list[np.ndarray] = []
    slot: dict[bytes, int] = {}

    def row_of(w):
        key = w.tobytes()
        if key not in slot:
            slot[key] = len(vectors)
            vectors.append(w)
        return slot[key]

    rows = [(row_of(f.weights), None if f.twin is None else row_of(f.twin)) for _, f in items]
    main = np.array([r for r, _ in rows])
    twins = [(i, r, r2) for i, (r, r2) in enumerate(rows) if r2 is not None]
    tables = np.array([[f.bound(max(d, 1)) for d in range(m + 1)] for _, f in items], dtype=float)
    weights = np.stack(vectors)
    sweeper = _Sweeper(ctx, js)
    out: list[list[CharSumReport]] = [[] for _ in items]
    worst: list[CharSumReport | None] = [None] * len(items)
    top_disc = [0.0] * len(items)
    covered = 0
    for outer, sums in sweeper.batches(weights):
        deg = _degrees(js, outer, ctx.q)
        live = deg > 0
        covered += int(live.sum())
        bound = tables[:, deg]  # (items, rows, q)
        margin = bound - np.abs(sums)[main]
        margin[:, ~live] = np.inf
        bad = margin < -EPS_NUM
        disc = {}
        for idx, r, r2 in twins:
            disc[idx] = np.where(live, np.abs(sums[r] - sums[r2]), 0.0)
            top_disc[idx] = max(top_disc[idx], float(disc[idx].max()))
            bad[idx] |= disc[idx] > EQUALITY_TOL

        def report(idx, i, c1):
            desc, fam = items[idx]
            d = disc.get(idx)
            return CharSumReport(
                complex(sums[main[idx]][i, c1]), float(bound[idx, i, c1]),
                _context(ctx, desc, fam, m, 1, _coeff_tuple(m, js, outer[i], c1)),
                discrepancy=None if d is None else float(d[i, c1]))

        if keep == "all":
            for idx in range(len(items)):
                out[idx].extend(report(idx, i, c1) for i, c1 in np.argwhere(live))
            continue
        for idx, i, c1 in np.argwhere(bad):
            out[idx].append(report(idx, i, c1))
        flat = margin.reshape(len(items), -1)
        best = flat.argmin(axis=1)
        for idx, pos in enumerate(best):
            if np.isfinite(flat[idx, pos]) and (worst[idx] is None
                                                or flat[idx, pos] < worst[idx].margin):
                worst[idx] = report(idx, *np.unravel_index(pos, margin.shape[1:]))
    if keep != "all":
        for idx, w in enumerate(worst):
            if w is not None:
                w.n_covered = covered
                if w.discrepancy is not None:
                    w.discrepancy = top_disc[idx]
                out[idx].insert(0, w)
    return out


def _random_poly(rng, ctx: FieldCtx, m: int) -> CharPoly:
    while True:
        coeffs = tuple(int(rng.integers(ctx.q)) if j % ctx.p else 0 for j in range(1, m + 1))
        if any(coeffs):
            return CharPoly(coeffs)


def _audit_family_sampled(ctx, desc, fam: Family, m: int, count: int, seed: int):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        f = _random_poly(rng, ctx, m)
        c = int(rng.integers(1, ctx.q))
        value = weighted_char_sum(ctx, fam.weights, f, c)
        disc = None
        if fam.twin is not None:
            disc = abs(value - weighted_char_sum(ctx, fam.twin, f, c))
        out.append(CharSumReport(value, float(fam.bound(f.degree)),
                                 _context(ctx, desc, fam, m, c, f.coeffs, seed), discrepancy=disc))
    return out


def weil_audit(ctx: FieldCtx, desc, m: int, coverage="exhaustive",
               keep: str = "all", threads: int = 1) -> list[CharSumReport]:
    """Audit the character-sum bounds that apply to ``desc``.

    ``desc`` is a descriptor, None for the whole field, or a list of those
    (sharing one sweep).  ``coverage`` is ``"exhaustive"`` or
    ``("sample", count, seed)``.  With exhaustive coverage and
    ``keep="worst"`` each family contributes its smallest-margin record
    (carrying ``n_covered``) followed by every violation.
    """
    descs = desc if isinstance(desc, list) else [desc]
    items = [(d, fam) for d in descs for fam in audit_families(ctx, d)]
    if not items:
        return []
    if coverage == "exhaustive":
        chunks = _exhaustive(ctx, items, m, keep)
    else:
        _, count, seed = coverage
        work = lambda item: _audit_family_sampled(ctx, item[0], item[1], m, count, seed)  # noqa: E731
        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                chunks = list(pool.map(work, items))
        else:
            chunks = [work(it) for it in items]
    return [r for chunk in chunks for r in chunk]
