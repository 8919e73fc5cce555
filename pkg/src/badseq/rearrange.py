"""Block-shift rearrangement of a T-periodic function into a pT-periodic one.

Z_{pT} is cut into ⌊√p⌋ blocks of length ⌊√p⌋·T followed by an unshifted tail; on block i
the function is read at x + ξ_i.  A random choice of shifts spreads the Λ_{pT}-hits of every
point evenly over Z_T, which :func:`find_good_omega` certifies exhaustively.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .periodic import Composed, Dense, PeriodicFunction
from .residues import ResidueSet


@dataclass(frozen=True)
class RearrangementPlan:
    T: int
    p: int
    shifts: tuple

    def __post_init__(self):
        object.__setattr__(self, "shifts", tuple(int(v) for v in self.shifts))
        if self.T < 1 or self.p < 1:
            raise ValueError("T and p must be positive")
        if math.gcd(self.p, self.T) != 1:
            raise ValueError(f"p={self.p} and T={self.T} are not coprime")
        if len(self.shifts) != self.nblocks:
            raise ValueError(f"need {self.nblocks} shifts, got {len(self.shifts)}")
        if any(not 0 <= v < self.T for v in self.shifts):
            raise ValueError("shifts must lie in [0, T)")

    @property
    def nblocks(self) -> int:
        return math.isqrt(self.p)

    @property
    def block_len(self) -> int:
        return self.nblocks * self.T

    @property
    def tail_start(self) -> int:
        return self.nblocks * self.nblocks * self.T

    @property
    def period(self) -> int:
        return self.p * self.T

    @classmethod
    def identity(cls, T: int, p: int) -> "RearrangementPlan":
        return cls(T, p, (0,) * math.isqrt(p))

    def shift_table(self) -> np.ndarray:
        """ξ(x) for x in Z_{pT}, zero on the tail."""
        out = np.zeros(self.period, dtype=np.int64)
        out[:self.tail_start] = np.repeat(np.array(self.shifts, dtype=np.int64), self.block_len)
        return out

    def boundaries(self) -> list[int]:
        return sorted({(i * self.block_len) % self.period for i in range(self.nblocks + 1)})

    def to_json(self) -> str:
        return json.dumps({"T": self.T, "p": self.p, "shifts": list(self.shifts)}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RearrangementPlan":
        d = json.loads(text)
        return cls(int(d["T"]), int(d["p"]), tuple(d["shifts"]))


def apply_rearrangement(f: PeriodicFunction, plan: RearrangementPlan) -> PeriodicFunction:
    """f read at x + ξ(x mod pT).

    A dense f of period T gives a dense result of period pT.  A function of period R·T
    (any R) gives a lazy one of period pRT; its joint law with the rearranged T-periodic
    functions is preserved when gcd(p, R) = 1.
    """
    if f.period % plan.T and plan.T % f.period:
        raise ValueError(f"period {f.period} neither divides nor is a multiple of T={plan.T}")
    shift = plan.shift_table()
    if isinstance(f, Dense) and plan.T % f.period == 0:
        f = f.lifted(plan.T)
        x = np.arange(plan.period, dtype=np.int64)
        return Dense(f.num[(x + shift) % plan.T], f.den)
    return Composed(f, shift)


def rearranged_set(E: np.ndarray, plan: RearrangementPlan) -> np.ndarray:
    """Support of the rearranged indicator of E ⊂ Z_T, as a mask on Z_{pT}."""
    E = np.asarray(E, dtype=bool)
    if E.size != plan.T:
        raise ValueError("mask length must equal T")
    x = np.arange(plan.period, dtype=np.int64)
    return E[(x + plan.shift_table()) % plan.T]


def rearranged_points(values: np.ndarray, plan: RearrangementPlan) -> np.ndarray:
    """Any per-point table on Z_T (e.g. Q_x) read through the rearrangement."""
    values = np.asarray(values)
    x = np.arange(plan.period, dtype=np.int64)
    return values[(x + plan.shift_table()) % plan.T]


def exceptional_E1(E: np.ndarray, plan: RearrangementPlan, guard: int) -> np.ndarray:
    """Rearranged E plus the windows [b − guard, b] at every block boundary b (mod pT)."""
    if guard < 0:
        raise ValueError("guard must be nonnegative")
    out = rearranged_set(E, plan).copy()
    P = plan.period
    w = np.arange(-min(guard, P - 1), 1, dtype=np.int64)
    for b in plan.boundaries():
        out[(b + w) % P] = True
    return out


def E1_measure_bound(E: np.ndarray, plan: RearrangementPlan, guard: int) -> float:
    return float(np.mean(E)) + (guard + 2 * plan.T) / (plan.T * math.sqrt(plan.p))


class OmegaSearchFailed(RuntimeError):
    def __init__(self, msg: str, stats: dict):
        super().__init__(msg)
        self.stats = stats


def _hit_counts(plan: RearrangementPlan, lam: ResidueSet) -> np.ndarray:
    """counts[x, b] = |{a in Λ : (x + a) + ξ(x + a) ≡ b mod T}| for x in Z_{pT}."""
    P, T = plan.period, plan.T
    shift = plan.shift_table()
    target = (np.arange(P, dtype=np.int64) + shift) % T  # residue read at each point
    out = np.zeros((P, T), dtype=np.int64)
    a = lam.elements
    chunk = max(1, 2_000_000 // max(1, a.size))
    for s in range(0, P, chunk):
        x = np.arange(s, min(s + chunk, P), dtype=np.int64)
        hit = target[(x[:, None] + a[None, :]) % P]
        rows = np.repeat(np.arange(x.size), a.size)
        np.add.at(out[s:s + x.size], (rows, hit.ravel()), 1)
    return out


def omega_margin(plan: RearrangementPlan, lam: ResidueSet, targets=None) -> tuple[Fraction, tuple]:
    """Worst slack of the certificate and where it occurs.

    Without targets: min over (x, b) of count(x, b) − |Λ|/(2T) (singleton indicators).
    With targets (nonnegative functions on Z_T): min over (x, f) of the Λ-average of the
    rearranged f at x minus half of E f.
    """
    counts = _hit_counts(plan, lam)
    n, T = len(lam), plan.T
    if targets is None:
        # count − n/(2T) compared as 2T·count − n
        slack = 2 * T * counts - n
        i = np.unravel_index(int(np.argmin(slack)), slack.shape)
        return Fraction(int(slack[i]), 2 * T), (int(i[0]), int(i[1]))
    worst, where = None, None
    for h, f in enumerate(targets):
        f = f if isinstance(f, Dense) else f.dense()
        if f.period != T:
            raise ValueError("target functions must have period T")
        sums = counts @ f.num  # Σ_a f̃(x+a) numerators over f.den
        # sums/(n·den) − mean/2  >= 0  <=>  2T·sums − n·Σf >= 0
        tot = int(f.num.sum())
        slack = 2 * T * sums - n * tot
        i = int(np.argmin(slack))
        val = Fraction(int(slack[i]), 2 * T * n * f.den)
        if worst is None or val < worst:
            worst, where = val, (i, h)
    return worst, where


def find_good_omega(T: int, p: int, lam_pT: ResidueSet, seed: int = 0, budget: int = 10_000,
                    targets=None) -> RearrangementPlan:
    """Draw shift vectors until one passes the exhaustive hit-count certificate."""
    if math.gcd(p, T) != 1:
        raise ValueError(f"p={p} and T={T} are not coprime")
    if lam_pT.modulus != p * T:
        raise ValueError("residue set must live in Z_{pT}")
    if targets is None and len(lam_pT) < 2 * T:
        raise ValueError(f"|Λ_pT|={len(lam_pT)} < 2T={2 * T}: the bound cannot hold for every b")
    rng = np.random.default_rng(seed)
    nb = math.isqrt(p)
    best, best_where = None, None
    for attempt in range(1, budget + 1):
        shifts = tuple(int(v) for v in rng.integers(0, T, size=nb)) if T > 1 else (0,) * nb
        plan = RearrangementPlan(T, p, shifts)
        margin, where = omega_margin(plan, lam_pT, targets)
        if margin >= 0:
            return plan
        if best is None or margin > best:
            best, best_where = margin, where
    raise OmegaSearchFailed(
        f"no certified shift vector for T={T}, p={p} in {budget} draws (best margin {best})",
        {"T": T, "p": p, "budget": budget, "seed": seed, "best_margin": str(best),
         "worst_point": best_where, "lambda_size": len(lam_pT)})
