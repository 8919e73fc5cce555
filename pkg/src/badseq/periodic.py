"""Exact rational periodic functions on Z_N.

Values are int64 numerators over one positive integer denominator per function.  Dense
functions hold the numerators; the other classes here are lazy expressions whose period can
be far larger than what fits in memory.  Every function supports

* ``num_at(x)``      numerators at an int64 array of points,
* ``histogram()``    exact value -> count over one period (by chunked enumeration, or by the
                     block structure of :class:`BlockSplit`),
* ``envelope(M)``    for each residue x mod M, the max of the function over all y ≡ x mod M.
"""

from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction
from typing import Iterable

import numpy as np

DEFAULT_CAP = 100_000_000
CHUNK = 1 << 21


class CapExceeded(RuntimeError):
    """An exact enumeration would exceed the configured cap."""


def lcm(*xs: int) -> int:
    out = 1
    for v in xs:
        out = out * v // math.gcd(out, v)
    return out


def _to_fraction(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(str(x))
    return x if isinstance(x, Fraction) else Fraction(x)


def _fractions_from(nums: np.ndarray, den: int) -> list[Fraction]:
    return [Fraction(int(v), den) for v in nums]


def _enumerate_classes(f, g: int, cap: int, stop: int | None = None) -> dict:
    """Class histograms by brute force over [0, stop) (default: one period)."""
    stop = f.period if stop is None else stop
    if stop > cap:
        raise CapExceeded(f"enumerating {stop} points exceeds cap {cap}")
    acc: dict = {}
    for s in range(0, stop, CHUNK):
        x = np.arange(s, min(s + CHUNK, stop), dtype=np.int64)
        _add_points(acc, x % g, f.num_at(x), g)
    return acc


def _add_points(acc: dict, cls: np.ndarray, vals: np.ndarray, g: int, weight: int = 1):
    u, inv = np.unique(vals, return_inverse=True)
    counts = np.zeros((g, u.size), dtype=np.int64)
    np.add.at(counts, (cls, inv.ravel()), 1)
    for j, v in enumerate(u):
        _acc_add(acc, int(v), counts[:, j] * weight)


def _acc_add(acc: dict, v: int, counts: np.ndarray):
    if v in acc:
        acc[v] = acc[v] + counts
    else:
        acc[v] = counts.astype(np.int64, copy=True)


def _to_counter(ch: dict, den: int) -> Counter:
    return Counter({Fraction(v, den): int(c.sum()) for v, c in ch.items() if c.sum()})


def _fold(ch: dict, G: int, g: int) -> dict:
    """Class counts mod G summed down to classes mod g (g | G)."""
    if G == g:
        return ch
    return {v: c.reshape(G // g, g).sum(axis=0) for v, c in ch.items()}


def _rescale(ch: dict, count_factor: int, num_factor: int) -> dict:
    out: dict = {}
    for v, c in ch.items():
        _acc_add(out, v * num_factor, c * count_factor)   # num_factor 0 merges keys
    return out


def _spliced_classes(parts, mask: np.ndarray, g: int, period: int, den: int, cap: int) -> dict:
    """Class histograms mod g of x -> parts[i](x) where the mask (a function of x mod
    mask.size) selects part 0 where true and part 1 where false; None stands for 0.

    A point class c mod G (G = lcm(g, mask size)) meets the class c mod h of a part of
    period Pp (h = gcd(G, Pp)) in period/lcm(G, Pp) points of one full period.
    """
    m = mask.size
    G = lcm(g, m)
    c = np.arange(G, dtype=np.int64)
    sel = mask[c % m]
    out: dict = {}
    for part, on in zip(parts, (sel, ~sel)):
        if part is None:
            _acc_add(out, 0, on.astype(np.int64) * (period // G))
            continue
        h = math.gcd(G, part.period)
        factor = period // lcm(G, part.period)
        scale = den // part.den
        for v, cnt in part.class_histograms(h, cap).items():
            _acc_add(out, v * scale, np.where(on, cnt[c % h] * factor, 0))
    return _fold(out, G, g)


class PeriodicFunction:
    period: int
    den: int

    def num_at(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def value(self, x: int) -> Fraction:
        return Fraction(int(self.num_at(np.array([x % self.period], dtype=np.int64))[0]), self.den)

    def numerators(self, cap: int = DEFAULT_CAP) -> np.ndarray:
        if self.period > cap:
            raise CapExceeded(f"period {self.period} exceeds cap {cap}")
        return self.num_at(np.arange(self.period, dtype=np.int64))

    def dense(self, cap: int = DEFAULT_CAP) -> "Dense":
        return Dense(self.numerators(cap), self.den)

    def class_histograms(self, g: int, cap: int = DEFAULT_CAP) -> dict:
        """{numerator: counts per residue class mod g} over one period (g must divide it)."""
        if g < 1 or self.period % g:
            raise ValueError(f"{g} does not divide the period {self.period}")
        return self._class_histograms(g, cap)

    def _class_histograms(self, g: int, cap: int) -> dict:
        return _enumerate_classes(self, g, cap)

    def histogram(self, cap: int = DEFAULT_CAP) -> Counter:
        return _to_counter(self.class_histograms(1, cap), self.den)

    def distribution(self, cap: int = DEFAULT_CAP) -> dict:
        h = self.histogram(cap)
        total = sum(h.values())
        return {v: Fraction(c, total) for v, c in h.items()}

    def mean(self, cap: int = DEFAULT_CAP) -> Fraction:
        h = self.histogram(cap)
        return sum((v * c for v, c in h.items()), Fraction(0)) / sum(h.values())

    def envelope(self, M: int, cap: int = DEFAULT_CAP) -> np.ndarray:
        """Numerators (over self.den) of max_{y ≡ x mod M} f(y) for x in Z_M."""
        # y runs over x + MZ, which mod the period is x + gcd(M, period)Z
        g = math.gcd(M, self.period)
        if g < M:
            return np.tile(self.envelope(g, cap), M // g)
        return self._envelope(M, cap)

    def _envelope(self, M: int, cap: int = DEFAULT_CAP) -> np.ndarray:
        N = lcm(self.period, M)
        if N > cap:
            raise CapExceeded(f"envelope needs {N} points, cap {cap}")
        out = np.full(M, np.iinfo(np.int64).min, dtype=np.int64)
        for s in range(0, N, CHUNK):
            x = np.arange(s, min(s + CHUNK, N), dtype=np.int64)
            np.maximum.at(out, x % M, self.num_at(x))
        return out

    def envelope_fractions(self, M: int) -> list[Fraction]:
        return _fractions_from(self.envelope(M), self.den)

    # expression helpers
    def scaled(self, c) -> "PeriodicFunction":
        return Scaled(self, _to_fraction(c))

    def masked(self, mask: np.ndarray) -> "PeriodicFunction":
        return Masked(self, mask)

    def to_spec(self) -> dict:
        raise NotImplementedError


class Dense(PeriodicFunction):
    def __init__(self, num, den: int = 1):
        num = np.asarray(num, dtype=np.int64)
        if num.ndim != 1 or num.size == 0:
            raise ValueError("numerators must be a nonempty 1-d array")
        den = int(den)
        if den <= 0:
            raise ValueError("denominator must be positive")
        self.num = num
        self.den = den
        self.period = int(num.size)

    @classmethod
    def constant(cls, c=1, period: int = 1) -> "Dense":
        c = _to_fraction(c)
        return cls(np.full(period, c.numerator, dtype=np.int64), c.denominator)

    @classmethod
    def from_fractions(cls, values: Iterable) -> "Dense":
        vals = [_to_fraction(v) for v in values]
        den = lcm(*(v.denominator for v in vals))
        return cls(np.array([v.numerator * (den // v.denominator) for v in vals], dtype=np.int64), den)

    @classmethod
    def indicator(cls, mask: np.ndarray) -> "Dense":
        return cls(np.asarray(mask, dtype=bool).astype(np.int64), 1)

    def num_at(self, x):
        return self.num[np.asarray(x, dtype=np.int64) % self.period]

    def numerators(self, cap: int = DEFAULT_CAP) -> np.ndarray:
        return self.num

    def dense(self, cap: int = DEFAULT_CAP) -> "Dense":
        return self

    def values(self) -> list[Fraction]:
        return _fractions_from(self.num, self.den)

    def _class_histograms(self, g, cap):
        acc: dict = {}
        _add_points(acc, np.arange(self.period, dtype=np.int64) % g, self.num, g)
        return acc

    def mean(self, cap: int = DEFAULT_CAP) -> Fraction:
        return Fraction(int(self.num.sum(dtype=np.int64)), self.den * self.period)

    def _envelope(self, M: int, cap: int = DEFAULT_CAP) -> np.ndarray:
        if self.period % M == 0:
            return self.num.reshape(-1, M).max(axis=0)
        if M % self.period == 0:
            return np.tile(self.num, M // self.period)
        return super()._envelope(M, cap)

    def lifted(self, N: int) -> "Dense":
        if N % self.period:
            raise ValueError(f"{N} is not a multiple of the period {self.period}")
        return Dense(np.tile(self.num, N // self.period), self.den)

    def with_den(self, den: int) -> "Dense":
        if den % self.den:
            raise ValueError("new denominator must be a multiple")
        return Dense(self.num * (den // self.den), den)

    def reduced(self) -> "Dense":
        g = math.gcd(self.den, int(np.gcd.reduce(self.num)) if self.num.any() else self.den)
        return self if g == 1 else Dense(self.num // g, self.den // g)

    def __eq__(self, other):
        if not isinstance(other, Dense):
            return NotImplemented
        if self.period != other.period:
            return False
        return np.array_equal(self.num * other.den, other.num * self.den)

    def __repr__(self):
        return f"Dense(period={self.period}, den={self.den})"

    def to_spec(self) -> dict:
        return {"node": "dense", "den": self.den, "num": self.num}


def add_dense(*fs: Dense) -> Dense:
    N = lcm(*(f.period for f in fs))
    den = lcm(*(f.den for f in fs))
    total = np.zeros(N, dtype=np.int64)
    for f in fs:
        total += np.tile(f.num, N // f.period) * (den // f.den)
    return Dense(total, den)


def mask_dense(f: Dense, mask: np.ndarray, c=1) -> Dense:
    """c·f·1_mask as a dense function of period lcm(f.period, len(mask))."""
    c = _to_fraction(c)
    mask = np.asarray(mask, dtype=bool)
    N = lcm(f.period, mask.size)
    num = np.tile(f.num, N // f.period) * c.numerator
    num = np.where(np.tile(mask, N // mask.size), num, 0)
    return Dense(num, f.den * c.denominator)


class Scaled(PeriodicFunction):
    def __init__(self, base: PeriodicFunction, c: Fraction):
        if c < 0:
            raise ValueError("only nonnegative scalings are supported")
        self.base, self.c = base, c
        self.period = base.period
        self.den = base.den * c.denominator

    def num_at(self, x):
        return self.base.num_at(x) * self.c.numerator

    def _class_histograms(self, g, cap):
        return _rescale(self.base.class_histograms(g, cap), 1, self.c.numerator)

    def _envelope(self, M, cap=DEFAULT_CAP):
        return self.base.envelope(M, cap) * self.c.numerator

    def to_spec(self):
        return {"node": "scaled", "c": str(self.c), "base": self.base.to_spec()}


class Masked(PeriodicFunction):
    """f·1_mask with a periodic boolean mask."""

    def __init__(self, base: PeriodicFunction, mask: np.ndarray):
        self.base = base
        self.mask = np.asarray(mask, dtype=bool)
        self.period = lcm(base.period, self.mask.size)
        self.den = base.den

    def num_at(self, x):
        x = np.asarray(x, dtype=np.int64)
        return np.where(self.mask[x % self.mask.size], self.base.num_at(x), 0)

    def _class_histograms(self, g, cap):
        P, m = self.base.period, self.mask.size
        if math.gcd(P, m) != 1:
            return _spliced_classes((self.base, None), self.mask, g, self.period, self.den, cap)
        # Z_{Pm} = Z_P x Z_m, and a class mod g = g1·g2 splits into a class mod g1 | P
        # and a class mod g2 | m
        g1, g2 = math.gcd(g, P), math.gcd(g, m)
        base = self.base.class_histograms(g1, cap)
        on = np.bincount(np.flatnonzero(self.mask) % g2, minlength=g2).astype(np.int64)
        off = m // g2 - on
        c = np.arange(g)
        out = {v: on[c % g2] * cnt[c % g1] for v, cnt in base.items()}
        _acc_add(out, 0, off[c % g2] * (P // g1))
        return out

    def _envelope(self, M, cap=DEFAULT_CAP):
        if M % self.mask.size == 0:
            m = np.tile(self.mask, M // self.mask.size)
            return np.where(m, self.base.envelope(M, cap), 0)
        return super()._envelope(M, cap)

    def to_spec(self):
        return {"node": "masked", "mask": self.mask, "base": self.base.to_spec()}


class Splice(PeriodicFunction):
    """a on the mask, b off it."""

    def __init__(self, a: PeriodicFunction, b: PeriodicFunction, mask: np.ndarray):
        self.a, self.b = a, b
        self.mask = np.asarray(mask, dtype=bool)
        self.period = lcm(a.period, b.period, self.mask.size)
        self.den = lcm(a.den, b.den)

    def num_at(self, x):
        x = np.asarray(x, dtype=np.int64)
        va = self.a.num_at(x) * (self.den // self.a.den)
        vb = self.b.num_at(x) * (self.den // self.b.den)
        return np.where(self.mask[x % self.mask.size], va, vb)

    def _class_histograms(self, g, cap):
        return _spliced_classes((self.a, self.b), self.mask, g, self.period, self.den, cap)

    def _envelope(self, M, cap=DEFAULT_CAP):
        if M % self.mask.size == 0:
            m = np.tile(self.mask, M // self.mask.size)
            ea = self.a.envelope(M, cap) * (self.den // self.a.den)
            eb = self.b.envelope(M, cap) * (self.den // self.b.den)
            return np.where(m, ea, eb)
        return super()._envelope(M, cap)

    def to_spec(self):
        return {"node": "splice", "mask": self.mask, "a": self.a.to_spec(), "b": self.b.to_spec()}


class Composed(PeriodicFunction):
    """x -> base(x + shift[x mod len(shift)]), the lazy form of a block rearrangement."""

    def __init__(self, base: PeriodicFunction, shift: np.ndarray):
        self.base = base
        self.shift = np.asarray(shift, dtype=np.int64)
        self.period = lcm(base.period, self.shift.size)
        self.den = base.den

    def num_at(self, x):
        x = np.asarray(x, dtype=np.int64)
        return self.base.num_at(x + self.shift[x % self.shift.size])

    def _class_histograms(self, g, cap):
        S0, Pb = self.shift.size, self.base.period
        if S0 % g:
            return super()._class_histograms(g, cap)
        # the lifts of y in Z_{S0} read base on the whole class of y + ξ(y) mod gcd(S0, Pb)
        h = math.gcd(S0, Pb)
        base = self.base.class_histograms(h, cap)
        y = np.arange(S0, dtype=np.int64)
        src = (y + self.shift) % h
        dst = y % g
        out = {}
        for v, cnt in base.items():
            acc = np.zeros(g, dtype=np.int64)
            np.add.at(acc, dst, cnt[src])
            out[v] = acc
        return out

    def _envelope(self, M, cap=DEFAULT_CAP):
        P = self.shift.size
        if M % P == 0:
            # the shift is constant on each lift class, so the max moves with it
            inner = self.base.envelope(M, cap)
            x = np.arange(M, dtype=np.int64)
            return inner[(x + np.tile(self.shift, M // P)) % M]
        return super()._envelope(M, cap)

    def to_spec(self):
        return {"node": "composed", "shift": self.shift, "base": self.base.to_spec()}


class BlockSplit(PeriodicFunction):
    """x -> [j < s]·a(y) + [j < t]·b(y) where y = x mod N0 and j = (x div N0) mod r.

    a and b must have periods dividing N0.  Histograms are assembled per block type from the
    class histograms of a and b; when both are active their supports must be separated by
    the classes mod disjoint_mod, otherwise Z_{N0} is enumerated.
    """

    def __init__(self, a: PeriodicFunction, b: PeriodicFunction, N0: int, r: int, s: int, t: int,
                 disjoint_mod: int | None = None):
        if N0 % a.period or N0 % b.period:
            raise ValueError("component periods must divide N0")
        if not (0 <= s <= r and 0 <= t <= r):
            raise ValueError("need 0 <= s, t <= r")
        self.a, self.b = a, b
        self.N0, self.r, self.s, self.t = N0, r, s, t
        self.period = N0 * r
        self.den = lcm(a.den, b.den)
        # a and b are supported on disjoint unions of classes mod disjoint_mod (if given)
        self.disjoint_mod = disjoint_mod

    def _parts(self, y):
        return (self.a.num_at(y) * (self.den // self.a.den),
                self.b.num_at(y) * (self.den // self.b.den))

    def num_at(self, x):
        x = np.asarray(x, dtype=np.int64)
        j = (x // self.N0) % self.r
        va, vb = self._parts(x % self.N0)
        return np.where(j < self.s, va, 0) + np.where(j < self.t, vb, 0)

    def block_weights(self):
        """(weight, coefficient of a, coefficient of b) for the distinct block types."""
        lo, hi = min(self.s, self.t), max(self.s, self.t)
        out = []
        if lo:
            out.append((lo, 1, 1))
        if hi > lo:
            out.append((hi - lo, 1 if self.s > self.t else 0, 1 if self.t > self.s else 0))
        if self.r > hi:
            out.append((self.r - hi, 0, 0))
        return out

    def _enumerate_blocks(self, g, cap):
        if self.N0 > cap:
            raise CapExceeded(f"block length {self.N0} exceeds cap {cap}")
        acc: dict = {}
        for st in range(0, self.N0, CHUNK):
            y = np.arange(st, min(st + CHUNK, self.N0), dtype=np.int64)
            va, vb = self._parts(y)
            for w, ca, cb in self.block_weights():
                _add_points(acc, y % g, ca * va + cb * vb, g, w)
        return acc

    def _class_histograms(self, g, cap):
        if self.N0 % g:
            return super()._class_histograms(g, cap)
        G = lcm(g, self.disjoint_mod) if self.disjoint_mod else g
        pa, pb = self.a.period, self.b.period
        if self.N0 % G or pa % G or pb % G:
            return self._enumerate_blocks(g, cap)
        cha = _rescale(self.a.class_histograms(G, cap), self.N0 // pa, self.den // self.a.den)
        chb = _rescale(self.b.class_histograms(G, cap), self.N0 // pb, self.den // self.b.den)
        nz_a = sum((c for v, c in cha.items() if v), np.zeros(G, dtype=np.int64))
        nz_b = sum((c for v, c in chb.items() if v), np.zeros(G, dtype=np.int64))
        per_class = self.N0 // G
        out: dict = {}
        for w, ca, cb in self.block_weights():
            if ca and cb:
                if not self.disjoint_mod or np.any((nz_a > 0) & (nz_b > 0)):
                    return self._enumerate_blocks(g, cap)
                for v, c in list(cha.items()) + list(chb.items()):
                    if v:
                        _acc_add(out, v, w * c)
                _acc_add(out, 0, w * (per_class - nz_a - nz_b))
            elif ca or cb:
                for v, c in (cha if ca else chb).items():
                    _acc_add(out, v, w * c)
            else:
                _acc_add(out, 0, np.full(G, w * per_class, dtype=np.int64))
        return _fold(out, G, g)

    def _envelope(self, M, cap=DEFAULT_CAP):
        if self.N0 % M == 0:
            ea = self.a.envelope(M, cap) * (self.den // self.a.den)
            eb = self.b.envelope(M, cap) * (self.den // self.b.den)
            best = np.zeros(M, dtype=np.int64) if self.r > max(self.s, self.t) else None
            for _, ca, cb in self.block_weights():
                if ca and cb:
                    if not self.disjoint_mod or M % self.disjoint_mod:
                        return super()._envelope(M, cap)
                    # on each class mod M one of the two parts vanishes identically
                    cand = ea + eb
                else:
                    cand = ea if ca else eb if cb else np.zeros(M, dtype=np.int64)
                best = cand if best is None else np.maximum(best, cand)
            return best
        return super()._envelope(M, cap)

    def to_spec(self):
        return {"node": "blocksplit", "N0": self.N0, "r": self.r, "s": self.s, "t": self.t,
                "disjoint_mod": self.disjoint_mod, "a": self.a.to_spec(), "b": self.b.to_spec()}


class DisjointSum(PeriodicFunction):
    """a + b where a vanishes off mask and b vanishes on it (checked lazily by the builder)."""

    def __init__(self, a: PeriodicFunction, b: PeriodicFunction, mask: np.ndarray):
        self.inner = Splice(a, b, mask)
        self.a, self.b, self.mask = a, b, self.inner.mask
        self.period = self.inner.period
        self.den = self.inner.den

    def num_at(self, x):
        return self.inner.num_at(x)

    def _class_histograms(self, g, cap):
        return self.inner.class_histograms(g, cap)

    def _envelope(self, M, cap=DEFAULT_CAP):
        return self.inner.envelope(M, cap)

    def to_spec(self):
        return {"node": "disjoint", "mask": self.mask, "a": self.a.to_spec(), "b": self.b.to_spec()}


def from_spec(spec: dict) -> PeriodicFunction:
    kind = spec["node"]
    if kind == "dense":
        return Dense(np.asarray(spec["num"], dtype=np.int64), int(spec["den"]))
    if kind == "scaled":
        return Scaled(from_spec(spec["base"]), Fraction(spec["c"]))
    if kind == "masked":
        return Masked(from_spec(spec["base"]), np.asarray(spec["mask"], dtype=bool))
    if kind == "splice":
        return Splice(from_spec(spec["a"]), from_spec(spec["b"]), np.asarray(spec["mask"], dtype=bool))
    if kind == "disjoint":
        return DisjointSum(from_spec(spec["a"]), from_spec(spec["b"]), np.asarray(spec["mask"], dtype=bool))
    if kind == "composed":
        return Composed(from_spec(spec["base"]), np.asarray(spec["shift"], dtype=np.int64))
    if kind == "blocksplit":
        return BlockSplit(from_spec(spec["a"]), from_spec(spec["b"]),
                          int(spec["N0"]), int(spec["r"]), int(spec["s"]), int(spec["t"]),
                          spec.get("disjoint_mod"))
    raise ValueError(f"unknown node {kind!r}")


def _joint_against_dense(F: PeriodicFunction, H: np.ndarray, keep: np.ndarray, total: int,
                         cap: int) -> Counter:
    """Numerator pair counts of (F(x), H[x mod len H]) over Z_total where keep[x mod len H].

    H is the small side; F only enters through its class histograms mod gcd(len H, period).
    """
    Ph = H.size
    h = math.gcd(Ph, F.period)
    factor = total // lcm(Ph, F.period)
    c = np.arange(Ph, dtype=np.int64)[keep]
    hv, inv = np.unique(H[keep], return_inverse=True)
    out: Counter = Counter()
    for u, cnt in F.class_histograms(h, cap).items():
        acc = np.zeros(hv.size, dtype=np.int64)
        np.add.at(acc, inv.ravel(), cnt[c % h])
        for j in np.flatnonzero(acc):
            out[(int(u), int(hv[j]))] += int(acc[j]) * factor
    return out


def _dense_side(f: PeriodicFunction, where: np.ndarray | None, cap: int):
    n = lcm(f.period, 1 if where is None else where.size)
    if n > cap:
        raise CapExceeded(f"period {n} exceeds cap {cap}")
    x = np.arange(n, dtype=np.int64)
    keep = np.ones(n, dtype=bool) if where is None else where[x % where.size]
    return f.num_at(x), keep


def joint_histogram(fa: PeriodicFunction, fb: PeriodicFunction, cap: int = DEFAULT_CAP,
                    where: np.ndarray | None = None) -> Counter:
    """Exact counts of value pairs (fa(x), fb(x)) over one common period (optionally on a mask).

    Nothing of size beyond cap is enumerated: a BlockSplit side is taken block type by block
    type, and the other side enters through its class histograms.
    """
    where = None if where is None else np.asarray(where, dtype=bool)
    mlen = 1 if where is None else where.size
    total = lcm(fa.period, fb.period, mlen)
    acc: Counter = Counter()
    swap = False
    small, big = fb, fa
    if isinstance(fa, BlockSplit) and not isinstance(fb, BlockSplit):
        small, big, swap = fa, fb, True
    elif fa.period < fb.period and not isinstance(fb, BlockSplit):
        small, big, swap = fa, fb, True
    if isinstance(small, BlockSplit) and small.N0 % lcm(big.period, mlen) == 0:
        split = small
        n_blocks = total // split.period
        Ph = lcm(split.a.period, split.b.period, mlen)
        for w, ca, cb in split.block_weights():
            part = _Combo(split, ca, cb, Ph)
            H, keep = _dense_side(part, where, cap)
            # the pairs over Z_{N0} repeat on each of the w blocks of this type
            sub = _joint_against_dense(big, H, keep, split.N0, cap)
            for k, n in sub.items():
                acc[k] += n * w * n_blocks
    else:
        try:
            H, keep = _dense_side(small, where, cap)
            acc = _joint_against_dense(big, H, keep, total, cap)
        except CapExceeded:
            if total > cap:
                raise CapExceeded(f"joint period {total} exceeds cap {cap}")
            acc = Counter()
            for st in range(0, total, CHUNK):
                x = np.arange(st, min(st + CHUNK, total), dtype=np.int64)
                pair = np.stack([big.num_at(x), small.num_at(x)], axis=1)
                if where is not None:
                    pair = pair[where[x % where.size]]
                if pair.size == 0:
                    continue
                u, c = np.unique(pair, axis=0, return_counts=True)
                for (p, q), n in zip(u, c):
                    acc[(int(p), int(q))] += int(n)
    dbig, dsmall = big.den, small.den
    out = Counter({(Fraction(u, dbig), Fraction(v, dsmall)): n for (u, v), n in acc.items()})
    if swap:
        out = Counter({(b, a): n for (a, b), n in out.items()})
    return out


class _Combo(PeriodicFunction):
    """ca·a + cb·b for the parts of a BlockSplit, on the period of its parts."""

    def __init__(self, split: BlockSplit, ca: int, cb: int, period: int):
        self.split, self.ca, self.cb = split, ca, cb
        self.period = period
        self.den = split.den

    def num_at(self, x):
        va, vb = self.split._parts(np.asarray(x, dtype=np.int64))
        return self.ca * va + self.cb * vb


def conditional_histogram(f: PeriodicFunction, where: np.ndarray, cap: int = DEFAULT_CAP) -> Counter:
    """Counts of f's values over the points of one common period where the mask holds."""
    where = np.asarray(where, dtype=bool)
    w = where.size
    g = math.gcd(f.period, w)
    # a pair (y mod P, z mod w) occurs once in Z_lcm exactly when y ≡ z mod g
    ch = f.class_histograms(g, cap)
    k = np.bincount(np.flatnonzero(where) % g, minlength=g).astype(np.int64)
    out = Counter()
    for v, c in ch.items():
        n = int((c * k).sum())
        if n:
            out[Fraction(v, f.den)] += n
    return out


def normalize(h: Counter) -> dict:
    total = sum(h.values())
    return {v: Fraction(c, total) for v, c in h.items() if c}


def factorizes(joint: Counter) -> bool:
    """True iff the joint counts equal the product of their marginals exactly."""
    total = sum(joint.values())
    ma, mb = Counter(), Counter()
    for (a, b), c in joint.items():
        ma[a] += c
        mb[b] += c
    for a, ca in ma.items():
        for b, cb in mb.items():
            if joint.get((a, b), 0) * total != ca * cb:
                return False
    return True
