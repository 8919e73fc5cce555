"""Normalized gap statistics of residue sets on the circle.

Points are kept as integers in Z_t; the normalized coordinate is y = λ·|Λ|/t, so a
distance of D integer steps equals D·|Λ|/t in normalized units.  Every comparison
against a rational threshold θ is done as an integer comparison against ⌊θ·t/|Λ|⌋.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .residues import ResidueSet, shift_union, thicken, thicken_width


def _frac(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(str(x))
    return x if isinstance(x, Fraction) else Fraction(x)


class SpacingProfile:
    def __init__(self, source: ResidueSet):
        if len(source) == 0:
            raise ValueError("spacing profile of an empty set")
        self.source = source
        lam = source.elements
        t = source.modulus
        gaps = np.empty(lam.size, dtype=np.int64)
        gaps[:-1] = np.diff(lam)
        gaps[-1] = t + lam[0] - lam[-1]
        gaps.setflags(write=False)
        self.int_gaps = gaps

    @property
    def size(self) -> int:
        return len(self.source)

    @property
    def modulus(self) -> int:
        return self.source.modulus

    @property
    def normalized_points(self) -> list[Fraction]:
        n, t = self.size, self.modulus
        return [Fraction(int(v) * n, t) for v in self.source.elements]

    @property
    def circular_gaps(self) -> list[Fraction]:
        n, t = self.size, self.modulus
        return [Fraction(int(g) * n, t) for g in self.int_gaps]

    def int_threshold(self, theta) -> int:
        """Largest integer distance D with D·|Λ|/t <= θ."""
        theta = _frac(theta)
        return (theta * self.modulus / self.size).__floor__()


def profile(lam: ResidueSet) -> SpacingProfile:
    return SpacingProfile(lam)


def gap_cdf(prof: SpacingProfile, theta) -> Fraction:
    """Share of circular gaps strictly greater than θ."""
    if _frac(theta) < 0:
        raise ValueError("theta must be nonnegative")
    k = prof.int_threshold(theta)
    return Fraction(int(np.count_nonzero(prof.int_gaps > k)), prof.size)


def thickened_measure_identity(lam: ResidueSet, gamma) -> tuple[int, int]:
    m = thicken_width(lam, gamma)
    lhs = len(thicken(lam, gamma))
    if len(lam) == 0:
        return lhs, 0
    rhs = int(np.minimum(SpacingProfile(lam).int_gaps, m).sum())
    return lhs, rhs


def nearest_distance(points: np.ndarray, t: int, z: np.ndarray) -> np.ndarray:
    """Circular distance in Z_t from each z to the nearest element of sorted points."""
    n = points.size
    z = np.asarray(z, dtype=np.int64) % t
    idx = np.searchsorted(points, z)
    right = points[idx % n]
    left = points[(idx - 1) % n]
    d_right = (right - z) % t
    d_left = (z - left) % t
    d = np.minimum(d_right, d_left)
    return np.minimum(d, t - d)


def _zeta_counts(prof: SpacingProfile, ls: np.ndarray, theta) -> np.ndarray:
    lam = prof.source.elements
    t = prof.modulus
    k = prof.int_threshold(theta)
    out = np.empty(ls.size, dtype=np.int64)
    chunk = max(1, 4_000_000 // max(1, lam.size))
    for s in range(0, ls.size, chunk):
        sel = ls[s:s + chunk]
        z = (lam[None, :] - lam[sel][:, None]) % t
        d = nearest_distance(lam, t, z.ravel()).reshape(z.shape)
        out[s:s + chunk] = np.count_nonzero(d > k, axis=1)
    return out


def zeta(prof: SpacingProfile, l: int, theta) -> Fraction:
    """ζ_l(θ) with 1-based index l."""
    if not 1 <= l <= prof.size:
        raise IndexError(f"index {l} outside 1..{prof.size}")
    c = _zeta_counts(prof, np.array([l - 1]), theta)[0]
    return Fraction(int(c), prof.size)


def zeta_all(prof: SpacingProfile, theta) -> list[Fraction]:
    c = _zeta_counts(prof, np.arange(prof.size), theta)
    return [Fraction(int(v), prof.size) for v in c]


@dataclass
class PoissonCheck:
    theta: Fraction
    J: Fraction
    threshold: Fraction
    lhs: Fraction
    rhs: Fraction
    lhs_nonstrict: Fraction

    @property
    def passed(self) -> bool:
        """The inequality with the strict comparison ζ_l > threshold."""
        return self.lhs >= self.rhs

    @property
    def nonstrict_passed(self) -> bool:
        return self.lhs_nonstrict >= self.rhs

    @property
    def pairing_bound_passed(self) -> bool:
        """The bound the neighbour-pairing argument actually yields: P(ζ_l >= c) >= rhs/2."""
        return self.lhs_nonstrict >= self.rhs / 2

    def as_dict(self) -> dict:
        return {"theta": str(self.theta), "J": str(self.J), "threshold": str(self.threshold),
                "lhs": str(self.lhs), "lhs_nonstrict": str(self.lhs_nonstrict), "rhs": str(self.rhs),
                "passed": self.passed, "nonstrict_passed": self.nonstrict_passed,
                "pairing_bound_passed": self.pairing_bound_passed}


def poisson_lemma_check(prof: SpacingProfile, theta, J) -> PoissonCheck:
    """Share of l with ζ_l(θ) > (F(Jθ)+F(2θ)−1)/2 against F(2θ) − F((J−2)θ).

    The strict form can fail when the threshold is hit exactly (e.g. {0,1,3,5,6,8,9,11,12,14}
    mod 15, θ=1/4, J=8 gives 9/10 < 1), so the non-strict share is reported as well.
    """
    theta, J = _frac(theta), _frac(J)
    if theta <= 0 or J <= 4:
        raise ValueError("need theta > 0 and J > 4")
    n = prof.size
    c = (gap_cdf(prof, J * theta) + gap_cdf(prof, 2 * theta) - 1) / 2
    counts = _zeta_counts(prof, np.arange(n), theta)
    # ζ_l = counts/n > c  <=>  counts > c·n
    lhs = Fraction(int(np.count_nonzero(counts * c.denominator > c.numerator * n)), n)
    lhs_ns = Fraction(int(np.count_nonzero(counts * c.denominator >= c.numerator * n)), n)
    rhs = gap_cdf(prof, 2 * theta) - gap_cdf(prof, (J - 2) * theta)
    return PoissonCheck(theta, J, c, lhs, rhs, lhs_ns)


def condition_earth_count(lam: ResidueSet, gamma) -> int:
    """Pairs (u, v) whose difference stays more than γ·s_t away from Λ on the circle."""
    gamma = _frac(gamma)
    n, t = len(lam), lam.modulus
    if n == 0:
        return 0
    k = (gamma * t / n).__floor__()
    el = lam.elements
    total = 0
    chunk = max(1, 4_000_000 // n)
    for s in range(0, n, chunk):
        z = (el[s:s + chunk, None] - el[None, :]) % t
        d = nearest_distance(el, t, z.ravel())
        total += int(np.count_nonzero(d > k))
    return total


def condition_wine_epsilon(lam: ResidueSet, gamma) -> Fraction:
    gamma = _frac(gamma)
    return gamma - Fraction(len(thicken(lam, gamma)), lam.modulus)


@dataclass
class ConditionReport:
    condition: str
    values: dict
    threshold: object = None
    passed: bool = False
    epsilon_gamma: Fraction | None = None

    def as_dict(self) -> dict:
        return {"condition": self.condition,
                "values": {str(k): str(v) for k, v in self.values.items()},
                "threshold": None if self.threshold is None else str(self.threshold),
                "passed": self.passed,
                "epsilon_gamma": None if self.epsilon_gamma is None else str(self.epsilon_gamma)}


def wind_report(sets: Sequence[ResidueSet]) -> ConditionReport:
    """Densities along the q-chain should decrease towards zero."""
    vals = {s.modulus: s.density for s in sets}
    dens = list(vals.values())
    ok = all(b < a for a, b in zip(dens, dens[1:]))
    return ConditionReport("wind", vals, None, ok)


def howl_report(sets: Sequence[ResidueSet], floor) -> ConditionReport:
    vals = {s.modulus: s.density for s in sets}
    floor = _frac(floor)
    return ConditionReport("howl", vals, floor, all(v >= floor for v in vals.values()))


def wine_report(sets: Sequence[ResidueSet], gamma, bound=None) -> ConditionReport:
    """Per-instance ε values; the reported ε is the worst one (a finite stand-in for the liminf)."""
    vals = {s.modulus: condition_wine_epsilon(s, gamma) for s in sets}
    eps = max(vals.values()) if vals else Fraction(0)
    ok = True if bound is None else eps < _frac(bound)
    return ConditionReport("wine", vals, bound, ok, eps)


def earth_report(sets: Sequence[ResidueSet], gamma, alpha) -> ConditionReport:
    alpha = _frac(alpha)
    vals = {s.modulus: Fraction(condition_earth_count(s, gamma), len(s) ** 2) for s in sets}
    thr = 5 * alpha
    return ConditionReport("earth", vals, thr, all(v > thr for v in vals.values()))


def poisson_deviation(prof: SpacingProfile, thetas: Iterable) -> list[tuple[Fraction, Fraction, float, float]]:
    """Rows (θ, F(θ), e^{−θ}, |F(θ) − e^{−θ}|); the exponential is a float64 value."""
    rows = []
    for th in thetas:
        th = _frac(th)
        F = gap_cdf(prof, th)
        e = math.exp(-float(th))
        rows.append((th, F, e, abs(float(F) - e)))
    return rows


DEFAULT_THETAS = tuple(Fraction(k, 4) for k in range(1, 9))


def sup_deviation(prof: SpacingProfile, thetas: Iterable = DEFAULT_THETAS) -> float:
    return max(r[3] for r in poisson_deviation(prof, thetas))


def cdf_csv(prof: SpacingProfile, thetas: Iterable = DEFAULT_THETAS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta", "F", "F_float", "exp_neg_theta"])
    for th, F, e, _ in poisson_deviation(prof, thetas):
        w.writerow([str(th), str(F), f"{float(F):.12f}", f"{e:.12f}"])
    return buf.getvalue()
