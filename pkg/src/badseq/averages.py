"""Exact Λ_Q window sums and periodicity windows over one period of a dense function."""

from __future__ import annotations

import numpy as np

from .residues import ResidueSet

# float64 FFT sums are accepted only when every entry is this close to an integer
ROUND_TOL = 0.25
DIRECT_LIMIT = 20_000_000


def representatives(lam: ResidueSet) -> np.ndarray:
    """Λ_Q as integers in [1, Q] (so Λ_1 = {0} becomes {1})."""
    a = lam.elements.copy()
    a[a == 0] = lam.modulus
    return a


def lambda_sums(num: np.ndarray, lam: ResidueSet, xs: np.ndarray | None = None) -> np.ndarray:
    """Σ_{a ∈ Λ_Q, 1<=a<=Q} num[(x + a) mod P] for x in xs (default: all of Z_P).

    Uses a direct gather when that is cheap, otherwise an FFT correlation whose result is
    rounded and checked to be integral; on a failed check the direct path is used.
    """
    num = np.asarray(num, dtype=np.int64)
    P = num.size
    cnt = np.bincount(representatives(lam) % P, minlength=P).astype(np.int64)
    return weighted_sums(num, cnt, xs)


def weighted_sums(num: np.ndarray, cnt: np.ndarray, xs: np.ndarray | None = None) -> np.ndarray:
    """Σ_r cnt[r]·num[(x + r) mod P] for x in xs, with cnt an offset multiplicity table on Z_P."""
    num = np.asarray(num, dtype=np.int64)
    cnt = np.asarray(cnt, dtype=np.int64)
    P = num.size
    offs = np.flatnonzero(cnt)
    xs = np.arange(P, dtype=np.int64) if xs is None else np.asarray(xs, dtype=np.int64) % P
    if xs.size * offs.size <= DIRECT_LIMIT:
        return _direct(num, cnt, offs, xs)
    F = np.fft.rfft(num.astype(np.float64))
    G = np.fft.rfft(cnt[::-1].astype(np.float64))
    # Σ_r cnt[r]·num[x + r] is a convolution of num with cnt reversed, shifted by one
    conv = np.fft.irfft(F * G, n=P)
    full = np.roll(conv, -(P - 1))
    out = full[xs]
    rounded = np.rint(out)
    if np.max(np.abs(out - rounded), initial=0.0) >= ROUND_TOL:
        return _direct(num, cnt, offs, xs)
    return rounded.astype(np.int64)


def _direct(num, cnt, offs, xs):
    P = num.size
    out = np.zeros(xs.size, dtype=np.int64)
    chunk = max(1, DIRECT_LIMIT // max(1, offs.size))
    for s in range(0, xs.size, chunk):
        x = xs[s:s + chunk]
        out[s:s + chunk] = (num[(x[:, None] + offs[None, :]) % P] * cnt[offs][None, :]).sum(axis=1)
    return out


def periodic_window_ok(num: np.ndarray, shift: int, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """True where num[z − shift] == num[z] for every integer z in [lo, hi] (empty if hi < lo)."""
    num = np.asarray(num, dtype=np.int64)
    P = num.size
    bad = (num != np.roll(num, shift % P)).astype(np.int64)
    total = int(bad.sum())
    lo = np.asarray(lo, dtype=np.int64)
    hi = np.asarray(hi, dtype=np.int64)
    length = np.maximum(hi - lo + 1, 0)
    if total == 0:
        return np.ones(lo.size, dtype=bool)
    cs = np.concatenate([[0], np.cumsum(np.tile(bad, 2))])
    start = lo % P
    rem = length % P
    count = (length // P) * total + cs[start + rem] - cs[start]
    return count == 0
