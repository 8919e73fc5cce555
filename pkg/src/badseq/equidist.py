"""How evenly n_k fills the admissible residue classes mod Q: N(Q) and ψ(n)."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .residues import QsetCatalog, SequenceSpec, admissible_residues, first_primes, terms_mod


class HorizonWarning(UserWarning):
    """A scan still saw failures in the second half of its horizon."""


class UnboundedN(ValueError):
    """N(Q) is infinite: the residue classes are hit too rarely for the given β."""


def _frac(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(str(x))
    return x if isinstance(x, Fraction) else Fraction(x)


@lru_cache(maxsize=8)
def _cached_primes(n: int) -> np.ndarray:
    arr = first_primes(n)
    arr.setflags(write=False)
    return arr


def _residues_of_terms(seq: SequenceSpec, Q: int, N: int) -> np.ndarray:
    if seq.kind == "prime":
        return _cached_primes(N) % Q if Q > 1 else np.zeros(N, dtype=np.int64)
    return terms_mod(seq, Q, N)


def residue_counts(seq: SequenceSpec, Q: int, N: int) -> dict[int, int]:
    """|{k <= N : n_k ≡ a mod Q}| for every a in Λ_Q."""
    if Q < 1 or N < 1:
        raise ValueError("need Q >= 1 and N >= 1")
    lam = admissible_residues(seq, Q)
    counts = np.bincount(_residues_of_terms(seq, Q, N), minlength=Q)
    return {int(a): int(counts[a]) for a in lam.elements}


@dataclass
class EquidistScan:
    seq: SequenceSpec
    Q: int
    beta: Fraction
    H: int
    lam_size: int
    empirical_N: int
    checkpoints: dict = field(default_factory=dict)

    @property
    def stabilized(self) -> bool:
        return 2 * self.empirical_N <= self.H

    def as_dict(self) -> dict:
        return {"sequence": self.seq.label(), "Q": self.Q, "beta": str(self.beta), "H": self.H,
                "lambda_size": self.lam_size, "empirical_N": self.empirical_N,
                "stabilized": self.stabilized,
                "checkpoints": {str(N): [{"a": a, "count": c,
                                          "threshold": str(self.beta * N / self.lam_size)}
                                         for a, c in rows.items()]
                                for N, rows in self.checkpoints.items()}}


def _last_failure(seq, Q, beta, H) -> tuple[int, int]:
    lam = admissible_residues(seq, Q)
    n = len(lam)
    bn, bd = beta.numerator, beta.denominator
    r = _residues_of_terms(seq, Q, H)
    k = np.arange(1, H + 1, dtype=np.int64)
    keep = lam.mask()[r]
    r, k = r[keep], k[keep]
    best = 0
    if r.size:
        order = np.argsort(r, kind="stable")
        r, k = r[order], k[order]
        starts = np.flatnonzero(np.r_[True, r[1:] != r[:-1]])
        group = np.repeat(starts, np.diff(np.r_[starts, r.size]))
        before = np.arange(r.size) - group  # hits of the same class before this one
        # just before the hit at k the count is `before`; failing there means before·n <= β(k−1)
        fail = before * n * bd <= bn * (k - 1)
        if fail.any():
            best = int((k[fail] - 1).max())
        ends = np.r_[starts[1:], r.size] - 1
        final = before[ends] + 1
        if np.any(final * n * bd <= bn * H):
            best = H
        hit_classes = r[starts].size
    else:
        hit_classes = 0
    if hit_classes < n:
        best = H
    return best, n


def empirical_N(seq: SequenceSpec, Q: int, beta, H: int, warn: bool = True) -> int:
    """Largest N <= H where some class a in Λ_Q has count <= βN/|Λ_Q| (0 if none)."""
    beta = _frac(beta)
    if not 0 < beta < 1 or H < 1:
        raise ValueError("need 0 < beta < 1 and H >= 1")
    best, _ = _last_failure(seq, Q, beta, H)
    if warn and 2 * best > H:
        warnings.warn(f"Q={Q}: failure at N={best} in the second half of horizon {H}",
                      HorizonWarning, stacklevel=2)
    return best


def scan(seq: SequenceSpec, Q: int, beta, H: int, checkpoints=()) -> EquidistScan:
    beta = _frac(beta)
    best, n = _last_failure(seq, Q, beta, H)
    rows = {int(N): residue_counts(seq, Q, int(N)) for N in checkpoints if 1 <= N <= H}
    return EquidistScan(seq, Q, beta, H, n, best, rows)


def exact_N_power(seq: SequenceSpec, Q: int, beta) -> int:
    """The exact N(Q) for k^d, using that k^d mod Q is periodic in k with period Q.

    Write N = mQ + r with 0 <= r < Q.  For a class a with c roots in [1, Q) of which P_a(r)
    are <= r, count(a, N) = mc + P_a(r), and the failing condition
    (mc + P)|Λ| <= β(mQ + r) reads m(c|Λ| − βQ) <= βr − P|Λ|.  Inside a stretch where P is
    constant the right side grows with r, so only the stretch ends need checking.
    """
    if seq.kind != "power":
        raise ValueError("exact N(Q) needs a periodic sequence")
    beta = _frac(beta)
    if Q == 1:
        return 0
    lam = admissible_residues(seq, Q)
    n = len(lam)
    k = np.arange(1, Q, dtype=np.int64)
    r = terms_mod(seq, Q, Q - 1)
    keep = lam.mask()[r]
    r, k = r[keep], k[keep]
    order = np.argsort(r, kind="stable")
    r, k = r[order], k[order]
    starts = np.flatnonzero(np.r_[True, r[1:] != r[:-1]])
    sizes = np.diff(np.r_[starts, r.size])
    if starts.size < n:
        raise UnboundedN(f"Q={Q}: some class in Λ_Q is never hit")
    counts = sizes.astype(np.int64)
    bn, bd = beta.numerator, beta.denominator
    slope = counts * n * bd - bn * Q  # (c|Λ| − βQ)·bd per class
    if np.any(slope <= 0):
        raise UnboundedN(f"Q={Q}: some class density does not exceed β/|Λ_Q|")
    # stretch ends: just before each root (P = roots seen so far) and Q − 1 (P = c)
    cls = np.repeat(np.arange(starts.size), sizes)
    P = np.arange(r.size) - starts[cls]
    ends = np.concatenate([k - 1, np.full(starts.size, Q - 1, dtype=np.int64)])
    Ps = np.concatenate([P, counts])
    sl = np.concatenate([slope[cls], slope])
    rhs = bn * ends - Ps * n * bd
    ok = (rhs >= 0) & (ends >= 0)
    if not ok.any():
        return 0
    m = rhs[ok] // sl[ok]
    best = int((m * Q + ends[ok]).max())
    return best


class SRule:
    """An infinite subset S of the positive integers given by a rule."""

    def __init__(self, kind: str = "all"):
        if kind not in ("all", "pow2"):
            raise ValueError(f"unknown S rule {kind!r}")
        self.kind = kind

    def next_above(self, n: int) -> int:
        """Smallest s in S with s > n."""
        if self.kind == "all":
            return max(1, n + 1)
        s = 1
        while s <= n:
            s *= 2
        return s

    def members_upto(self, cap: int) -> np.ndarray:
        if self.kind == "all":
            return np.arange(1, cap + 1, dtype=np.int64)
        out, s = [], 1
        while s <= cap:
            out.append(s)
            s *= 2
        return np.array(out, dtype=np.int64)

    def __contains__(self, n: int) -> bool:
        if n < 1:
            return False
        return self.kind == "all" or (n & (n - 1)) == 0

    def __repr__(self):
        return f"SRule({self.kind!r})"


class PsiTable:
    """ψ(n) = min{s in S : s > N(Q) for every Q in Qset with Q <= n}.

    N(Q) comes from the exact periodic formula for power sequences (method="exact") or
    from a horizon scan (method="scan"; H may grow with Q via horizon_factor).
    """

    def __init__(self, seq: SequenceSpec, catalog: QsetCatalog, beta=Fraction(2, 5),
                 S: SRule | None = None, H: int = 100_000, method: str | None = None,
                 horizon_factor: int = 0):
        self.seq = seq
        self.catalog = catalog
        self.beta = _frac(beta)
        self.S = S or SRule("all")
        self.H = H
        self.horizon_factor = horizon_factor
        self.method = method or ("exact" if seq.kind == "power" else "scan")
        self._N: dict[int, int] = {}
        self._psi: dict[int, int] = {}
        self.warnings: list[str] = []

    def horizon(self, Q: int) -> int:
        return max(self.H, self.horizon_factor * Q)

    def N(self, Q: int) -> int:
        if Q not in self._N:
            if self.method == "exact":
                self._N[Q] = exact_N_power(self.seq, Q, self.beta)
            else:
                H = self.horizon(Q)
                v = empirical_N(self.seq, Q, self.beta, H, warn=False)
                if 2 * v > H:
                    msg = f"Q={Q}: failure at N={v} in the second half of horizon {H}"
                    self.warnings.append(msg)
                    warnings.warn(msg, HorizonWarning, stacklevel=2)
                self._N[Q] = v
        return self._N[Q]

    def __call__(self, n: int) -> int:
        n = int(n)
        if n not in self._psi:
            top = max((self.N(Q) for Q in self.catalog.products(n)), default=0)
            self._psi[n] = self.S.next_above(top)
        return self._psi[n]

    def table(self) -> dict:
        return {"S": self.S.kind, "beta": str(self.beta), "method": self.method,
                "N": {str(k): v for k, v in sorted(self._N.items())},
                "psi": {str(k): v for k, v in sorted(self._psi.items())},
                "warnings": list(self.warnings)}


def psi(n: int, catalog: QsetCatalog, S: SRule, beta, H: int, seq: SequenceSpec | None = None) -> int:
    seq = seq or SequenceSpec("power", 2)
    return PsiTable(seq, catalog, beta, S, H, method="scan")(n)


def equidist_report(seq: SequenceSpec, Qs, beta, H: int, checkpoints=()) -> str:
    rows = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", HorizonWarning)
        for Q in Qs:
            rows.append(scan(seq, Q, beta, H, checkpoints).as_dict())
    return json.dumps({"scans": rows, "warnings": [str(w.message) for w in caught]},
                      indent=2, sort_keys=True)
