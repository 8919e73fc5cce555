"""Residue sets of d-th powers and primes, their thickenings, and the Qset catalog."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np


def _as_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def ceil_fraction(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


class ResidueSet:
    """A subset of Z_t stored as a sorted int64 array.

    Instances are treated as immutable; the element array is marked read-only.
    """

    __slots__ = ("modulus", "elements")

    def __init__(self, modulus: int, elements: Iterable[int]):
        modulus = int(modulus)
        if modulus < 1:
            raise ValueError(f"modulus must be positive, got {modulus}")
        arr = np.unique(np.asarray(list(elements) if not isinstance(elements, np.ndarray) else elements,
                                   dtype=np.int64))
        if arr.size and (arr[0] < 0 or arr[-1] >= modulus):
            raise ValueError("elements must lie in [0, modulus)")
        arr.setflags(write=False)
        self.modulus = modulus
        self.elements = arr

    def __len__(self) -> int:
        return int(self.elements.size)

    def __iter__(self):
        return (int(v) for v in self.elements)

    def __contains__(self, a) -> bool:
        a = int(a) % self.modulus
        i = np.searchsorted(self.elements, a)
        return bool(i < self.elements.size and self.elements[i] == a)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ResidueSet):
            return NotImplemented
        return self.modulus == other.modulus and np.array_equal(self.elements, other.elements)

    def __hash__(self):
        return hash((self.modulus, self.elements.tobytes()))

    def __repr__(self) -> str:
        if len(self) <= 12:
            body = ", ".join(str(v) for v in self.elements)
        else:
            body = ", ".join(str(v) for v in self.elements[:6]) + ", ..."
        return f"ResidueSet(mod {self.modulus}: {{{body}}}, size {len(self)})"

    @property
    def density(self) -> Fraction:
        return Fraction(len(self), self.modulus)

    @property
    def mean_spacing(self) -> Fraction:
        if len(self) == 0:
            raise ZeroDivisionError("mean spacing of an empty set")
        return Fraction(self.modulus, len(self))

    def mask(self) -> np.ndarray:
        """Boolean indicator of the set on Z_t."""
        m = np.zeros(self.modulus, dtype=bool)
        m[self.elements] = True
        return m

    def to_list(self) -> list[int]:
        return [int(v) for v in self.elements]


@dataclass(frozen=True)
class SequenceSpec:
    kind: str = "power"
    d: int = 2

    def __post_init__(self):
        if self.kind not in ("power", "prime"):
            raise ValueError(f"unknown sequence kind {self.kind!r}")
        if self.kind == "power" and self.d < 2:
            raise ValueError("exponent d must be at least 2")

    def label(self) -> str:
        return f"k^{self.d}" if self.kind == "power" else "primes"


def _check_modulus(t: int) -> int:
    t = int(t)
    if t <= 1:
        raise ValueError(f"modulus must be at least 2, got {t}")
    return t


def _powmod_array(k: np.ndarray, d: int, t: int) -> np.ndarray:
    # square-and-multiply with a reduction after every product; safe while t < 3e9
    result = np.ones_like(k)
    base = k % t
    while d:
        if d & 1:
            result = (result * base) % t
        base = (base * base) % t
        d >>= 1
    return result


def power_residues(t: int, d: int) -> ResidueSet:
    """Units mod t that are d-th powers."""
    t = _check_modulus(t)
    if d < 2:
        raise ValueError("exponent d must be at least 2")
    if t > 3_000_000_000:
        raise ValueError("modulus too large for int64 power enumeration")
    k = np.arange(1, t + 1, dtype=np.int64)
    k = k[np.gcd(k, t) == 1]
    return ResidueSet(t, _powmod_array(k, d, t))


def coprime_residues(t: int) -> ResidueSet:
    t = _check_modulus(t)
    a = np.arange(t, dtype=np.int64)
    return ResidueSet(t, a[np.gcd(a, t) == 1])


def admissible_residues(seq: SequenceSpec, t: int) -> ResidueSet:
    """Λ_t for the given sequence, with the convention Λ_1 = {0}."""
    if t == 1:
        return ResidueSet(1, [0])
    if seq.kind == "prime":
        return coprime_residues(t)
    return power_residues(t, seq.d)


def combine_crt(a: ResidueSet, b: ResidueSet) -> ResidueSet:
    """{x mod st : x mod s in a, x mod t in b} for coprime s, t."""
    s, t = a.modulus, b.modulus
    if math.gcd(s, t) != 1:
        raise ValueError(f"moduli {s} and {t} are not coprime")
    # x = u*t*(t^-1 mod s) + v*s*(s^-1 mod t)
    es = t * pow(t, -1, s) if s > 1 else 0
    et = s * pow(s, -1, t) if t > 1 else 0
    n = s * t
    x = (a.elements[:, None] * es + b.elements[None, :] * et) % n
    return ResidueSet(n, x.ravel())


def thicken_width(lam: ResidueSet, gamma) -> int:
    """Number m of integer offsets inside the open interval (0, γ·s_t)."""
    gamma = _as_fraction(gamma)
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if len(lam) == 0:
        return 0
    return ceil_fraction(gamma * lam.mean_spacing) - 1


def shift_union(lam: ResidueSet, m: int) -> ResidueSet:
    """{λ + u : λ in Λ, 1 <= u <= m} mod t."""
    t = lam.modulus
    if m <= 0 or len(lam) == 0:
        return ResidueSet(t, np.empty(0, dtype=np.int64))
    if m >= t:
        return ResidueSet(t, np.arange(t, dtype=np.int64))
    mark = np.zeros(t, dtype=bool)
    for u in range(1, m + 1):
        mark[(lam.elements + u) % t] = True
    return ResidueSet(t, np.flatnonzero(mark))


def thicken(lam: ResidueSet, gamma) -> ResidueSet:
    return shift_union(lam, thicken_width(lam, gamma))


def negate(lam: ResidueSet) -> ResidueSet:
    return ResidueSet(lam.modulus, (-lam.elements) % lam.modulus)


def prime_sieve(limit: int, segment: int = 1 << 20) -> np.ndarray:
    """All primes <= limit, by a segmented sieve of Eratosthenes."""
    if limit < 2:
        return np.empty(0, dtype=np.int64)
    root = math.isqrt(limit)
    small = np.ones(root + 1, dtype=bool)
    small[:2] = False
    for i in range(2, math.isqrt(root) + 1):
        if small[i]:
            small[i * i::i] = False
    base = np.flatnonzero(small).astype(np.int64)
    out = [base]
    lo = root + 1
    while lo <= limit:
        hi = min(lo + segment, limit + 1)
        seg = np.ones(hi - lo, dtype=bool)
        for p in base:
            start = max(p * p, ((lo + p - 1) // p) * p)
            if start >= hi:
                continue
            seg[start - lo::p] = False
        out.append(np.flatnonzero(seg).astype(np.int64) + lo)
        lo = hi
    return np.concatenate(out)


def first_primes(n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("need at least one prime")
    if n < 6:
        limit = 15
    else:
        ln = math.log(n)
        limit = int(n * (ln + math.log(ln))) + 10
    primes = prime_sieve(limit)
    while primes.size < n:
        limit *= 2
        primes = prime_sieve(limit)
    return primes[:n]


def nth_terms(seq: SequenceSpec, N: int) -> np.ndarray:
    """n_1..n_N as an int64 array."""
    if N < 1:
        raise ValueError("N must be at least 1")
    if seq.kind == "prime":
        return first_primes(N)
    k = np.arange(1, N + 1, dtype=np.int64)
    if N ** seq.d >= 2 ** 63:
        raise OverflowError("terms exceed int64; use terms_mod instead")
    return k ** seq.d


def terms_mod(seq: SequenceSpec, Q: int, N: int) -> np.ndarray:
    """n_k mod Q for k = 1..N, without forming the (possibly huge) n_k."""
    if seq.kind == "prime":
        return first_primes(N) % Q
    k = np.arange(1, N + 1, dtype=np.int64) % Q
    return _powmod_array(k, seq.d, Q) if Q > 1 else np.zeros(N, dtype=np.int64)


@dataclass(frozen=True)
class QsetCatalog:
    """Pools of pairwise coprime odd moduli whose squarefree products form Qset."""

    p_pool: tuple = ()
    q_pool: tuple = ()
    _members: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        p = tuple(int(v) for v in self.p_pool)
        q = tuple(int(v) for v in self.q_pool)
        object.__setattr__(self, "p_pool", p)
        object.__setattr__(self, "q_pool", q)
        members = p + q
        if len(set(members)) != len(members):
            raise ValueError("pool members must be distinct")
        for v in members:
            if v < 3 or v % 2 == 0:
                raise ValueError(f"pool member {v} must be odd and > 1")
        for a, b in combinations(members, 2):
            if math.gcd(a, b) != 1:
                raise ValueError(f"pool members {a} and {b} share a factor")
        object.__setattr__(self, "_members", tuple(sorted(members)))

    @classmethod
    def for_sequence(cls, seq: SequenceSpec, p_pool: Sequence[int], q_pool: Sequence[int]) -> "QsetCatalog":
        """Catalog with the extra power-residue rule: every prime factor is 1 mod d."""
        cat = cls(tuple(p_pool), tuple(q_pool))
        if seq.kind == "power":
            for v in cat.members:
                for f in prime_factors(v):
                    if f % seq.d != 1:
                        raise ValueError(f"prime factor {f} of {v} is not 1 mod {seq.d}")
        return cat

    @property
    def members(self) -> tuple:
        return self._members

    def products(self, bound: int) -> list[int]:
        return qset_products(self, bound)

    def contains(self, Q: int) -> bool:
        for v in self._members:
            if Q % v == 0:
                Q //= v
        return Q == 1


def qset_products(catalog: QsetCatalog, bound: int) -> list[int]:
    out = [1]
    for v in catalog.members:
        out += [x * v for x in out if x * v <= bound]
    return sorted(x for x in out if x <= bound)


def prime_factors(n: int) -> list[int]:
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


def is_squarefree(n: int) -> bool:
    f = 2
    while f * f <= n:
        if n % (f * f) == 0:
            return False
        f += 1
    return True
