"""Evaluation sets D = g(F_q) for monomials and Dickson polynomials.

Besides materialising images by enumeration, this module carries the
closed formulas for Dickson value-set sizes and fiber sizes so that both
can be compared against enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .field import FieldCtx, FieldError

ENUM_CAP = 2**24


class EvalSetError(ValueError):
    pass


class FormulaUnavailable(EvalSetError):
    """The closed formula does not cover this case; use enumeration."""


@dataclass(frozen=True)
class EvalSetDesc:
    """Symbolic description of an evaluation set.

    ``kind`` is ``"monomial"``, ``"dickson"`` or ``"explicit"``.  Dickson
    with ``a == 0`` is the monomial x^n.
    """

    kind: str
    n: int = 1
    a: int = 0
    elements: tuple[int, ...] = ()

    @classmethod
    def monomial(cls, n: int) -> "EvalSetDesc":
        return cls("monomial", n=n)

    @classmethod
    def dickson(cls, n: int, a: int) -> "EvalSetDesc":
        return cls("dickson", n=n, a=a)

    @classmethod
    def explicit(cls, elements) -> "EvalSetDesc":
        return cls("explicit", elements=tuple(int(e) for e in elements))

    @property
    def symbolic(self) -> bool:
        return self.kind in ("monomial", "dickson")

    def validate(self, ctx: FieldCtx) -> None:
        if self.kind not in ("monomial", "dickson", "explicit"):
            raise EvalSetError(f"unknown set kind {self.kind!r}")
        if self.symbolic:
            if not 1 <= self.n <= ctx.q - 1:
                raise EvalSetError(f"degree n={self.n} outside [1, q-1] for q={ctx.q}")
            ctx.check(self.a)
        else:
            if len(set(self.elements)) != len(self.elements):
                raise EvalSetError("explicit set has repeated elements")
            for e in self.elements:
                ctx.check(e)

    def __str__(self) -> str:
        if self.kind == "monomial":
            return f"monomial:n={self.n}"
        if self.kind == "dickson":
            return f"dickson:n={self.n},a={self.a}"
        return "explicit:" + ",".join(map(str, self.elements))


@dataclass(frozen=True)
class ImageSet:
    elements: tuple[int, ...]
    source: EvalSetDesc = field(compare=False)

    @property
    def d(self) -> int:
        return len(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    @cached_property
    def array(self) -> np.ndarray:
        a = np.array(self.elements, dtype=np.int64)
        a.flags.writeable = False
        return a


# -- Dickson polynomials -------------------------------------------------------

def dickson_recurrence(ctx: FieldCtx, n: int, a: int, x: int) -> int:
    """D_n(x, a) from D_0 = 2, D_1 = x, D_j = x D_{j-1} - a D_{j-2}."""
    prev, cur = ctx.scalar(2), x
    if n == 0:
        return prev
    for _ in range(n - 1):
        prev, cur = cur, ctx.sub(ctx.mul(x, cur), ctx.mul(a, prev))
    return cur


def dickson_coefficients(n: int, p: int) -> list[tuple[int, int]]:
    """Pairs (i, n/(n-i) * C(n-i, i) mod p) for 0 <= i <= n/2, computed over Z first."""
    if n == 0:
        return [(0, 2 % p)]
    return [(i, (n * math.comb(n - i, i) // (n - i)) % p) for i in range(n // 2 + 1)]


def dickson_closed_form(ctx: FieldCtx, n: int, a: int, x: int) -> int:
    out = 0
    minus_a = ctx.neg(a)
    for i, c in dickson_coefficients(n, ctx.p):
        if c:
            term = ctx.mul(ctx.scalar(c), ctx.mul(ctx.pow(minus_a, i), ctx.pow(x, n - 2 * i)))
            out = ctx.add(out, term)
    return out


def vdickson(ctx: FieldCtx, n: int, a: int, x) -> np.ndarray:
    """Vectorised D_n(x, a) by index doubling on the Lucas pair (D_j, D_{j+1}).

    Uses D_{2j} = D_j^2 - 2a^j and D_{2j+1} = D_j D_{j+1} - a^j x.
    """
    x = np.asarray(x, dtype=np.int64)
    two = ctx.scalar(2)
    if n == 0:
        return np.full_like(x, two)
    if a == 0:
        return ctx.vpow(x, n)
    lo = np.full_like(x, two)  # D_j
    hi = x.copy()  # D_{j+1}
    aj = 1  # a^j
    for bit in bin(n)[2:]:
        two_aj = ctx.mul(two, aj)
        if bit == "0":
            # j -> 2j
            new_lo = ctx.vadd(ctx.vmul(lo, lo), ctx.neg(two_aj))
            new_hi = ctx.vadd(ctx.vmul(lo, hi), ctx.vneg(ctx.vmul(aj, x)))
            aj = ctx.mul(aj, aj)
        else:
            # j -> 2j + 1
            new_lo = ctx.vadd(ctx.vmul(lo, hi), ctx.vneg(ctx.vmul(aj, x)))
            aj1 = ctx.mul(aj, a)
            new_hi = ctx.vadd(ctx.vmul(hi, hi), ctx.neg(ctx.mul(two, aj1)))
            aj = ctx.mul(aj, aj1)
        lo, hi = new_lo, new_hi
    return lo


def dickson_eval(ctx: FieldCtx, n: int, a: int, x: int) -> int:
    if n < 0:
        raise EvalSetError("Dickson degree must be non-negative")
    return int(vdickson(ctx, n, a, np.array([x]))[0])


def evaluate(ctx: FieldCtx, desc: EvalSetDesc, x) -> np.ndarray:
    """Apply the generating polynomial of a symbolic descriptor to an array."""
    if desc.kind == "monomial":
        return ctx.vpow(np.asarray(x, dtype=np.int64), desc.n)
    if desc.kind == "dickson":
        return vdickson(ctx, desc.n, desc.a, x)
    raise EvalSetError("explicit sets have no generating polynomial")


def image_set(ctx: FieldCtx, desc: EvalSetDesc, cap: int = ENUM_CAP) -> ImageSet:
    desc.validate(ctx)
    if desc.kind == "explicit":
        return ImageSet(tuple(sorted(desc.elements)), desc)
    if ctx.q > cap:
        raise EvalSetError(f"q = {ctx.q} exceeds the enumeration cap {cap}")
    values = evaluate(ctx, desc, ctx.elements())
    return ImageSet(tuple(np.unique(values).tolist()), desc)


def fiber_sizes(ctx: FieldCtx, desc: EvalSetDesc) -> np.ndarray:
    """Array of length q: number of preimages of each field element."""
    values = evaluate(ctx, desc, ctx.elements())
    return np.bincount(values, minlength=ctx.q)


# -- closed formulas ---------------------------------------------------------

def _two_adic(n: int) -> int:
    t = 0
    while n % 2 == 0:
        n //= 2
        t += 1
    return t


def _strip_p(n: int, p: int) -> int:
    while n % p == 0:
        n //= p
    return n


def value_set_size_formula(ctx: FieldCtx, desc: EvalSetDesc) -> int:
    """|g(F_q)| from the closed formulas (monomials any q; Dickson odd q)."""
    desc.validate(ctx)
    q = ctx.q
    if desc.kind == "monomial" or (desc.kind == "dickson" and desc.a == 0):
        return 1 + (q - 1) // math.gcd(desc.n, q - 1)
    if desc.kind != "dickson":
        raise FormulaUnavailable("explicit sets have no value-set formula")
    if ctx.p == 2:
        raise FormulaUnavailable("Dickson value-set formula covers odd q only")
    n = _strip_p(desc.n, ctx.p)
    r = _two_adic(q * q - 1)
    t = _two_adic(n)
    if t == r - 1 and ctx.quadratic_character(desc.a) == -1:
        delta = Fraction(1)
    elif 1 <= t <= r - 2:
        delta = Fraction(1, 2)
    else:
        delta = Fraction(0)
    size = (Fraction(q - 1, 2 * math.gcd(n, q - 1)) + Fraction(q + 1, 2 * math.gcd(n, q + 1))
            + delta)
    if size.denominator != 1:
        raise EvalSetError(f"value-set formula produced non-integer {size}")
    return int(size)


def value_set_size(ctx: FieldCtx, desc: EvalSetDesc) -> tuple[int, str]:
    """Value-set size with the method used: ``"formula"`` or ``"enumerated"``."""
    try:
        return value_set_size_formula(ctx, desc), "formula"
    except FormulaUnavailable:
        return image_set(ctx, desc).d, "enumerated"


def preimage_count(ctx: FieldCtx, n: int, a: int, x0: int) -> Fraction:
    """|D_n^{-1}(D_n(x0, a))| from the case analysis for a != 0, n >= 2."""
    if n < 2:
        raise EvalSetError("preimage formula needs n >= 2")
    if a == 0:
        raise EvalSetError("preimage formula needs a != 0")
    q, p = ctx.q, ctx.p
    n = _strip_p(n, p)
    g_minus, g_plus = math.gcd(n, q - 1), math.gcd(n, q + 1)
    average = Fraction(g_minus + g_plus, 2)
    v = dickson_eval(ctx, n, a, x0)

    if p == 2:
        if v == 0:
            return average
        if x0 == 0:
            # z^2 + a = (z + sqrt(a))^2 always splits
            reducible = True
        else:
            reducible = ctx.trace(ctx.mul(a, ctx.inv(ctx.mul(x0, x0)))) == 0
        return Fraction(g_minus if reducible else g_plus)

    eta = ctx.quadratic_character(ctx.sub(ctx.mul(x0, x0), ctx.mul(4 % p, a)))
    special = ctx.mul(v, v) == ctx.mul(4 % p, ctx.pow(a, n))
    if eta == 1 and not special:
        return Fraction(g_minus)
    if eta == -1 and not special:
        return Fraction(g_plus)
    r = _two_adic(q * q - 1)
    t = _two_adic(n)
    eta_a = ctx.quadratic_character(a)
    cond_c = False
    if special and 1 <= t <= r - 1 and eta_a == -1:
        cond_c = True
    if 1 <= t <= r - 2 and eta_a == 1:
        minus_two_root = ctx.neg(ctx.mul(2, ctx.pow(a, n // 2)))
        cond_c = cond_c or v == minus_two_root
    if cond_c and eta == 1:
        return Fraction(g_minus, 2)
    if cond_c and eta == -1:
        return Fraction(g_plus, 2)
    return average


def enumerated_preimage_count(ctx: FieldCtx, n: int, a: int, x0: int) -> int:
    values = vdickson(ctx, n, a, ctx.elements())
    return int(np.count_nonzero(values == values[x0]))


def check_field_element(ctx: FieldCtx, x: int) -> int:
    try:
        return ctx.check(x)
    except FieldError as exc:
        raise EvalSetError(str(exc)) from None
