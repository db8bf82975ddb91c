"""Exact arithmetic in GF(p^s).

Elements are plain Python ints in ``[0, q)``: the element with polynomial
coefficients ``c_0 + c_1 x + ... + c_{s-1} x^{s-1}`` (reduced modulo the
field's modulus) is encoded as ``sum(c_i * p**i)``.  Every public routine
takes and returns these encodings.  The ``v*`` methods are vectorised
variants working on numpy integer arrays of encodings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property, reduce

import numpy as np

Q_CAP = 2**32


class FieldError(ValueError):
    """Invalid field parameters or an undefined field operation."""


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for f in (2, 3, 5, 7, 11, 13):
        if n % f == 0:
            return n == f
    f = 17
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def prime_power(q: int) -> tuple[int, int]:
    """Split ``q`` as ``p**s``; raise FieldError if ``q`` is not a prime power."""
    if q < 2:
        raise FieldError(f"{q} is not a prime power")
    p = next(f for f in range(2, q + 1) if q % f == 0)
    s, r = 0, q
    while r % p == 0:
        r //= p
        s += 1
    if r != 1:
        raise FieldError(f"{q} is not a prime power")
    return p, s


# -- dense polynomials over F_p, coefficient lists low-to-high ----------------

def _trim(a: list[int]) -> list[int]:
    while a and a[-1] == 0:
        a.pop()
    return a


def _poly_mod(a: list[int], f: list[int], p: int) -> list[int]:
    a = _trim([c % p for c in a])
    df = len(f) - 1
    inv_lead = pow(f[-1], p - 2, p)
    while len(a) - 1 >= df:
        c = a[-1] * inv_lead % p
        shift = len(a) - 1 - df
        for i, fi in enumerate(f):
            a[shift + i] = (a[shift + i] - c * fi) % p
        _trim(a)
    return a


def _poly_mulmod(a: list[int], b: list[int], f: list[int], p: int) -> list[int]:
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                out[i + j] += ai * bj
    return _poly_mod(out, f, p)


def _poly_powmod(a: list[int], e: int, f: list[int], p: int) -> list[int]:
    result = [1]
    base = _poly_mod(a, f, p)
    while e:
        if e & 1:
            result = _poly_mulmod(result, base, f, p)
        base = _poly_mulmod(base, base, f, p)
        e >>= 1
    return result


def _poly_gcd(a: list[int], b: list[int], p: int) -> list[int]:
    a, b = _trim([c % p for c in a]), _trim([c % p for c in b])
    while b:
        a, b = b, _poly_mod(a, b, p)
    return a


def _prime_factors(n: int) -> list[int]:
    out, f = [], 2
    while f * f <= n:
        if n % f == 0:
            out.append(f)
            while n % f == 0:
                n //= f
        f += 1
    if n > 1:
        out.append(n)
    return out


def is_irreducible(f: list[int], p: int) -> bool:
    """Rabin's test for a monic polynomial ``f`` (low-to-high) over F_p."""
    s = len(f) - 1
    if s < 1:
        return False
    if s == 1:
        return True
    x = [0, 1]

    def frob_power(k: int) -> list[int]:
        # x^(p^k) mod f by k successive p-th powers
        r = x
        for _ in range(k):
            r = _poly_powmod(r, p, f, p)
        return r

    def minus_x(h: list[int]) -> list[int]:
        d = h + [0] * max(0, 2 - len(h))
        d[1] = (d[1] - 1) % p
        return _trim(d)

    if minus_x(frob_power(s)):
        return False
    for r in _prime_factors(s):
        if len(_poly_gcd(f, minus_x(frob_power(s // r)), p)) > 1:
            return False
    return True


def smallest_irreducible(p: int, s: int) -> tuple[int, ...]:
    """Monic irreducible of degree ``s`` whose lower coefficients have the smallest encoding."""
    for code in range(p**s):
        low = [(code // p**i) % p for i in range(s)]
        f = low + [1]
        if is_irreducible(f, p):
            return tuple(f)
    raise FieldError(f"no irreducible polynomial of degree {s} over F_{p}")  # unreachable


@dataclass(frozen=True)
class FieldCtx:
    """A concrete finite field GF(p^s) with a fixed modulus.

    ``modulus`` holds ``s + 1`` coefficients, lowest degree first, with a
    leading 1.  For ``s == 1`` the modulus is ``x`` and arithmetic is plain
    modular arithmetic.
    """

    p: int
    s: int
    modulus: tuple[int, ...]

    @property
    def q(self) -> int:
        return self.p**self.s

    def __str__(self) -> str:
        if self.s == 1:
            return str(self.p)
        return f"{self.p}^{self.s}:modulus=" + ",".join(map(str, self.modulus))

    # -- encodings ---------------------------------------------------------

    def digits(self, x: int) -> list[int]:
        return [(x // self.p**i) % self.p for i in range(self.s)]

    def from_digits(self, coeffs) -> int:
        return sum((int(c) % self.p) * self.p**i for i, c in enumerate(coeffs))

    def vdigits(self, x: np.ndarray) -> np.ndarray:
        """Digits of an array of encodings, shape ``x.shape + (s,)``."""
        x = np.asarray(x, dtype=np.int64)
        if self.s == 1:
            return x[..., None]
        pw = self.p ** np.arange(self.s, dtype=np.int64)
        return (x[..., None] // pw) % self.p

    def vfrom_digits(self, d: np.ndarray) -> np.ndarray:
        pw = self.p ** np.arange(self.s, dtype=np.int64)
        return (np.asarray(d, dtype=np.int64) * pw).sum(axis=-1)

    def check(self, x: int) -> int:
        if not 0 <= x < self.q:
            raise FieldError(f"{x} is not an element encoding of GF({self.q})")
        return x

    # -- scalar arithmetic ------------------------------------------------

    def add(self, x: int, y: int) -> int:
        p = self.p
        if self.s == 1:
            return (x + y) % p
        if p == 2:
            return x ^ y
        out, pw = 0, 1
        while x or y:
            x, a = divmod(x, p)
            y, b = divmod(y, p)
            out += ((a + b) % p) * pw
            pw *= p
        return out

    def neg(self, x: int) -> int:
        if self.s == 1:
            return (-x) % self.p
        if self.p == 2:
            return x
        return self.from_digits([-c for c in self.digits(x)])

    def sub(self, x: int, y: int) -> int:
        return self.add(x, self.neg(y))

    def mul(self, x: int, y: int) -> int:
        if self.s == 1:
            return x * y % self.p
        a, b = self.digits(x), self.digits(y)
        prod = _poly_mulmod(a, b, list(self.modulus), self.p)
        return self.from_digits(prod)

    def pow(self, x: int, e: int) -> int:
        if e < 0:
            x, e = self.inv(x), -e
        if self.s == 1:
            return pow(x, e, self.p)
        result, base = 1, x
        while e:
            if e & 1:
                result = self.mul(result, base)
            base = self.mul(base, base)
            e >>= 1
        return result

    def inv(self, x: int) -> int:
        if x == 0:
            raise FieldError("inversion of zero")
        return self.pow(x, self.q - 2)

    def scalar(self, n: int) -> int:
        """Image of the integer ``n`` in the prime subfield."""
        return n % self.p

    def frobenius(self, x: int, k: int = 1) -> int:
        return self.pow(x, self.p**k)

    # -- vectorised arithmetic ---------------------------------------------

    @cached_property
    def _reduction(self) -> np.ndarray:
        """Row i holds the digits of x^(s+i) mod the modulus, for i < s - 1."""
        s, p = self.s, self.p
        f = list(self.modulus)
        rows = []
        for i in range(max(s - 1, 0)):
            r = _poly_mod([0] * (s + i) + [1], f, p)
            rows.append(r + [0] * (s - len(r)))
        return np.array(rows, dtype=np.int64).reshape(-1, s)

    def vadd(self, x, y) -> np.ndarray:
        x, y = np.asarray(x, dtype=np.int64), np.asarray(y, dtype=np.int64)
        if self.s == 1:
            return (x + y) % self.p
        if self.p == 2:
            return x ^ y
        return self.vfrom_digits((self.vdigits(x) + self.vdigits(y)) % self.p)

    def vsum(self, x) -> int:
        """Field sum of all entries of an array of encodings."""
        x = np.asarray(x, dtype=np.int64).ravel()
        if self.s == 1:
            return int(x.sum() % self.p) if self.p < 2**31 else sum(map(int, x)) % self.p
        if self.p == 2:
            return int(np.bitwise_xor.reduce(x)) if x.size else 0
        return int(self.vfrom_digits(self.vdigits(x).sum(axis=0) % self.p))

    def vneg(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        if self.s == 1:
            return (-x) % self.p
        if self.p == 2:
            return x
        return self.vfrom_digits((-self.vdigits(x)) % self.p)

    def vmul(self, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=np.int64), np.asarray(y, dtype=np.int64))
        p, s = self.p, self.s
        if s == 1:
            if p >= 2**31:
                return np.array([int(a) * int(b) % p for a, b in zip(x.ravel(), y.ravel())],
                                dtype=np.int64).reshape(x.shape)
            return x * y % p
        a, b = self.vdigits(x), self.vdigits(y)
        prod = np.zeros(x.shape + (2 * s - 1,), dtype=np.int64)
        for i in range(s):
            prod[..., i:i + s] += a[..., i:i + 1] * b
        prod %= p
        red = self._reduction
        for k in range(2 * s - 2, s - 1, -1):
            prod[..., :s] += prod[..., k:k + 1] * red[k - s]
        return self.vfrom_digits(prod[..., :s] % p)

    def vpow(self, x, e: int) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        if e < 0:
            x, e = self.vinv(x), -e
        result = np.ones_like(x)
        base = x.copy()
        while e:
            if e & 1:
                result = self.vmul(result, base)
            e >>= 1
            if e:
                base = self.vmul(base, base)
        return result

    def vinv(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        if np.any(x == 0):
            raise FieldError("inversion of zero")
        return self.vpow(x, self.q - 2)

    # -- trace and quadratic character -------------------------------------

    @cached_property
    def _basis_traces(self) -> np.ndarray:
        out = []
        for i in range(self.s):
            b = self.p**i  # encoding of x^i
            t, y = 0, b
            for _ in range(self.s):
                t = self.add(t, y)
                y = self.pow(y, self.p)
            out.append(t)
        # traces lie in the prime field, so their encodings are residues mod p
        return np.array(out, dtype=np.int64)

    def trace(self, x: int) -> int:
        """Absolute trace Tr(x) = x + x^p + ... + x^(p^(s-1)), as a residue mod p."""
        return int(np.dot(self.digits(x), self._basis_traces) % self.p)

    def vtrace(self, x) -> np.ndarray:
        return (self.vdigits(x) @ self._basis_traces) % self.p

    def quadratic_character(self, x: int) -> int:
        if self.p == 2:
            raise FieldError("quadratic character is undefined in characteristic 2")
        if x == 0:
            return 0
        return 1 if self.pow(x, (self.q - 1) // 2) == 1 else -1

    def vquadratic_character(self, x) -> np.ndarray:
        if self.p == 2:
            raise FieldError("quadratic character is undefined in characteristic 2")
        x = np.asarray(x, dtype=np.int64)
        r = self.vpow(x, (self.q - 1) // 2)
        return np.where(x == 0, 0, np.where(r == 1, 1, -1)).astype(np.int64)

    def elements(self) -> np.ndarray:
        return np.arange(self.q, dtype=np.int64)


def make_field(p: int, s: int = 1, modulus=None) -> FieldCtx:
    """Build GF(p^s), verifying the modulus or choosing the canonical one."""
    if not is_prime(p):
        raise FieldError(f"{p} is not prime")
    if s < 1:
        raise FieldError(f"extension degree must be positive, got {s}")
    if p**s > Q_CAP:
        raise FieldError(f"q = {p}^{s} exceeds the cap 2^32")
    if modulus is None:
        modulus = (0, 1) if s == 1 else smallest_irreducible(p, s)
    else:
        modulus = tuple(int(c) for c in modulus)
        if len(modulus) == s:
            modulus = modulus + (1,)
        if len(modulus) != s + 1:
            raise FieldError(f"modulus has degree {len(modulus) - 1}, expected {s}")
        if modulus[-1] != 1:
            raise FieldError("modulus must be monic")
        if any(not 0 <= c < p for c in modulus):
            raise FieldError(f"modulus coefficients must lie in [0, {p})")
        if not is_irreducible(list(modulus), p):
            raise FieldError(f"modulus {modulus} is reducible over F_{p}")
    return FieldCtx(p, s, tuple(modulus))


def arith(ctx: FieldCtx, op: str, x: int, y: int | None = None) -> int:
    """Dispatch one of add, sub, mul, inv, pow on element encodings."""
    ops = {
        "add": lambda: ctx.add(x, y),
        "sub": lambda: ctx.sub(x, y),
        "mul": lambda: ctx.mul(x, y),
        "inv": lambda: ctx.inv(x),
        "pow": lambda: ctx.pow(x, y),
    }
    if op not in ops:
        raise FieldError(f"unknown operation {op!r}")
    ctx.check(x)
    if op in ("add", "sub", "mul"):
        ctx.check(y)
    return ops[op]()


_FIELD_RE = re.compile(r"^(\d+)(?:\^(\d+))?(?::modulus=([0-9,\s]+))?$")


def parse_field(text: str) -> FieldCtx:
    """Parse ``"7"``, ``"49"``, ``"7^2"`` or ``"7^2:modulus=3,6,1"``."""
    m = _FIELD_RE.match(text.strip())
    if not m:
        raise FieldError(f"field descriptor {text!r}: expected 'p^s' or 'q' with optional ':modulus=c0,c1,...'")
    base, exp, mod = m.groups()
    if exp is None:
        p, s = prime_power(int(base))
    else:
        p, s = int(base), int(exp)
    modulus = None
    if mod is not None:
        modulus = [int(c) for c in mod.split(",") if c.strip()]
    return make_field(p, s, modulus)


def product(ctx: FieldCtx, xs) -> int:
    return reduce(ctx.mul, xs, 1)
