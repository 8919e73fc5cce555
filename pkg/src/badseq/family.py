"""(K, M, L) families and the constructive steps of the double induction.

A family is {T, R, f_1..f_K, X_1..X_K, E, Q_x}: the f_h live on Z_T, the X_h on Z_{RT}, E is
an exceptional subset of Z_T and x -> Q_x picks, for each point, the modulus whose residue
average controls X_h(x).  Step (1, M, 0) is the constant family; each inductive step
rearranges the previous family along a prime p, cuts Z_q into Ψ_q and Δ_q, and splices in a
restricted Step (K−1, M, M) family off Δ_q.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction

import numpy as np

from .averages import lambda_sums
from .equidist import PsiTable, SRule
from .periodic import (DEFAULT_CAP, BlockSplit, CapExceeded, Composed, Dense, Masked,
                       PeriodicFunction, Scaled, Splice, lcm)
from .rearrange import (OmegaSearchFailed, RearrangementPlan, apply_rearrangement,
                        exceptional_E1, find_good_omega, rearranged_points)
from .residues import (QsetCatalog, ResidueSet, SequenceSpec, admissible_residues, negate,
                       shift_union, thicken_width)
from .spacing import condition_earth_count, condition_wine_epsilon


def _frac(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(str(x))
    return x if isinstance(x, Fraction) else Fraction(x)


def is_dyadic(x) -> bool:
    d = _frac(x).denominator
    return d & (d - 1) == 0


@dataclass(frozen=True)
class StepParams:
    K: int = 1
    M: int = 1
    L: int = 0
    gamma: Fraction = Fraction(1, 4)
    alpha: Fraction = Fraction(1, 32)
    beta: Fraction = Fraction(2, 5)
    delta: Fraction = Fraction(1, 4)
    A: Fraction = Fraction(1)
    D: int = 1
    C: Fraction = Fraction(2)
    S: str = "all"
    gamma0: Fraction = Fraction(1, 2)

    def __post_init__(self):
        for name in ("gamma", "alpha", "beta", "delta", "A", "C", "gamma0"):
            object.__setattr__(self, name, _frac(getattr(self, name)))
        if self.K < 0 or self.M < 0 or not 0 <= self.L <= self.M:
            raise ValueError(f"need K, M >= 0 and 0 <= L <= M (got K={self.K}, M={self.M}, L={self.L})")
        if not (is_dyadic(self.gamma) and is_dyadic(self.alpha)):
            raise ValueError("gamma and alpha must be dyadic rationals")
        if not 0 < self.gamma < self.gamma0 <= Fraction(1, 2):
            raise ValueError(f"need 0 < gamma < gamma0 <= 1/2 (gamma={self.gamma}, gamma0={self.gamma0})")
        if not 0 < self.alpha < 1 or not 0 < self.beta < 1:
            raise ValueError("alpha and beta must lie in (0, 1)")
        if self.delta <= 0 or self.A <= 0:
            raise ValueError("delta and A must be positive")
        if self.D < 1 or self.D % 2 == 0:
            raise ValueError(f"D must be a positive odd integer (got {self.D})")
        SRule(self.S)

    def replace(self, **kw) -> "StepParams":
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return {k: (str(v) if isinstance(v, Fraction) else v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "StepParams":
        conv = {k: (Fraction(v) if k in ("gamma", "alpha", "beta", "delta", "A", "C", "gamma0") else v)
                for k, v in d.items()}
        return cls(**conv)


# ---------------------------------------------------------------------------------------------
# Y distributions


@dataclass(frozen=True)
class YDistribution:
    n: int
    gamma: Fraction
    alpha: Fraction
    atoms: dict

    @property
    def total(self) -> Fraction:
        return sum(self.atoms.values(), Fraction(0))

    @property
    def mean(self) -> Fraction:
        return sum((v * p for v, p in self.atoms.items()), Fraction(0))

    @property
    def second_moment(self) -> Fraction:
        return sum((v * v * p for v, p in self.atoms.items()), Fraction(0))

    def tail(self, lam) -> Fraction:
        """P(Y >= λ)."""
        lam = _frac(lam)
        return sum((p for v, p in self.atoms.items() if v >= lam), Fraction(0))

    def matches(self, dist: dict) -> bool:
        """Exact equality with a value -> probability map (zero-probability atoms ignored)."""
        a = {v: p for v, p in self.atoms.items() if p}
        b = {v: p for v, p in dist.items() if p}
        return a == b

    def as_dict(self) -> dict:
        return {"n": self.n, "gamma": str(self.gamma), "alpha": str(self.alpha),
                "atoms": {str(v): str(p) for v, p in sorted(self.atoms.items())}}


def y_distribution(n: int, gamma, alpha) -> YDistribution:
    """Atoms of Y_{n,γ,α}: each step scales the old atoms by (1−γ)^{-1} with weight 1−γ,
    adds α with weight αγ and puts the remaining γ(1−α) on 0."""
    gamma, alpha = _frac(gamma), _frac(alpha)
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not (0 < gamma < 1 and 0 < alpha < 1 and is_dyadic(gamma) and is_dyadic(alpha)):
        raise ValueError("gamma and alpha must be dyadic rationals in (0, 1)")
    atoms = {Fraction(1): Fraction(1)}
    for _ in range(n):
        nxt: dict = {}
        for v, p in atoms.items():
            w = v / (1 - gamma)
            nxt[w] = nxt.get(w, Fraction(0)) + p * (1 - gamma)
        nxt[alpha] = nxt.get(alpha, Fraction(0)) + alpha * gamma
        nxt[Fraction(0)] = nxt.get(Fraction(0), Fraction(0)) + gamma * (1 - alpha)
        atoms = nxt
    return YDistribution(n, gamma, alpha, atoms)


def realize_distribution(dist: YDistribution) -> Dense:
    """A function on Z_{2^k} whose value distribution is exactly dist (dyadic weights only)."""
    den = lcm(*(p.denominator for p in dist.atoms.values()))
    if den & (den - 1):
        raise ValueError("weights are not dyadic")
    vals = []
    for v, p in sorted(dist.atoms.items()):
        vals += [v] * int(p * den)
    return Dense.from_fractions(vals)


# ---------------------------------------------------------------------------------------------
# families


@dataclass
class Family:
    params: StepParams
    T: int
    R: int
    f: list
    X: list
    E: PeriodicFunction      # 0/1 valued
    Q: Dense
    seq: SequenceSpec = field(default_factory=SequenceSpec)
    catalog: QsetCatalog | None = None
    eps: Fraction = Fraction(0)
    log: list = field(default_factory=list)
    restricted: dict | None = None

    @property
    def K(self) -> int:
        return len(self.f)

    @property
    def period_X(self) -> int:
        return self.R * self.T

    def E_measure(self) -> Fraction:
        return self.E.mean()

    def structure_problems(self) -> list[str]:
        out = []
        D = self.params.D
        if math.gcd(self.T, D) != 1:
            out.append(f"gcd(T={self.T}, D={D}) != 1")
        if math.gcd(self.R, D) != 1:
            out.append(f"gcd(R={self.R}, D={D}) != 1")
        if len(self.f) != len(self.X):
            out.append("f and X lists differ in length")
        for h, fh in enumerate(self.f, 1):
            if self.T % fh.period:
                out.append(f"period of f_{h} ({fh.period}) does not divide T={self.T}")
        for h, xh in enumerate(self.X, 1):
            if self.period_X % xh.period:
                out.append(f"period of X_{h} ({xh.period}) does not divide RT={self.period_X}")
        if self.T % self.E.period or self.T % self.Q.period:
            out.append("E or Q_x is not T-periodic")
        else:
            if self.Q.den != 1 or np.any(self.Q.num < 1):
                out.append("Q_x must be positive integers")
            elif np.any(self.T % self.Q.num):
                out.append("some Q_x does not divide T")
            elif self.catalog is not None:
                bad = [int(v) for v in np.unique(self.Q.num) if not self.catalog.contains(int(v))]
                if bad:
                    out.append(f"Q_x values outside Qset: {bad[:5]}")
        return out

    def summary(self) -> dict:
        return {"K": self.K, "M": self.params.M, "L": self.params.L, "T": self.T, "R": self.R,
                "P(E)": str(self.E_measure()), "eps": str(self.eps),
                "params": self.params.as_dict(), "sequence": self.seq.label(),
                "restricted": None if self.restricted is None else
                {k: v for k, v in self.restricted.items() if not isinstance(v, np.ndarray)}}


def _bool_dense(mask) -> Dense:
    return Dense(np.asarray(mask, dtype=bool).astype(np.int64), 1)


def empty_family(params: StepParams, seq: SequenceSpec | None = None,
                 catalog: QsetCatalog | None = None) -> Family:
    """Step (0, M, M): no functions, S = R' = 1, E' = ∅, Q'_x ≡ 1."""
    return Family(params.replace(K=0, L=params.M), 1, 1, [], [], Dense.constant(0),
                  Dense.constant(1), seq or SequenceSpec(), catalog)


def trivial_step_family(params: StepParams, seq: SequenceSpec | None = None,
                        catalog: QsetCatalog | None = None) -> Family:
    """Step (1, M, 0): T = R = 1, f_1 ≡ X_1 ≡ 1, E = ∅, Q_x ≡ 1."""
    return Family(params.replace(K=1, L=0), 1, 1, [Dense.constant(1)], [Dense.constant(1)],
                  Dense.constant(0), Dense.constant(1), seq or SequenceSpec(), catalog,
                  log=[{"step": "trivial", "K": 1, "M": params.M}])


def synthetic_family(K: int, params: StepParams, seq: SequenceSpec | None = None,
                     catalog: QsetCatalog | None = None) -> Family:
    """A stand-in for Step (K, M, M) with T = 1: f_h ≡ 1 and independent X_h ≐ Y_{M,γ,α}.

    X_h reads the h-th base-2^k digit of x, so R = 2^{kK}.  Only the distributional
    properties hold; the average bound fails wherever X_h > 1.  It lets a K+1 step run
    at desk scale.
    """
    Z = realize_distribution(y_distribution(params.M, params.gamma, params.alpha))
    k = Z.period
    R = k ** K
    x = np.arange(R, dtype=np.int64)
    X = [Dense(Z.num[(x // k ** h) % k], Z.den) for h in range(K)]
    fam = Family(params.replace(K=K, L=params.M), 1, R, [Dense.constant(1)] * K, X,
                 Dense.constant(0), Dense.constant(1), seq or SequenceSpec(), catalog,
                 log=[{"step": "synthetic", "K": K, "M": params.M, "R": R}])
    return fam


def extend_family(fam: Family) -> Family:
    """Step (K−1, M, M) -> Step (K, M, 0) by appending f_K ≡ X_K ≡ 1."""
    if fam.params.L != fam.params.M:
        raise ValueError("only a completed Step (K−1, M, M) family can be extended")
    out = Family(fam.params.replace(K=fam.K + 1, L=0), fam.T, fam.R,
                 list(fam.f) + [Dense.constant(1)], list(fam.X) + [Dense.constant(1)],
                 fam.E, fam.Q, fam.seq, fam.catalog, fam.eps, list(fam.log), fam.restricted)
    out.log.append({"step": "extend", "K": out.K})
    return out


# ---------------------------------------------------------------------------------------------
# Φ, Ψ, Δ


class PartitionInfeasible(ValueError):
    def __init__(self, q: int, failed: list, diagnostics: dict):
        super().__init__(f"q={q}: infeasible ({', '.join(failed)})")
        self.q = q
        self.failed = failed
        self.diagnostics = diagnostics


@dataclass
class PartitionSets:
    q: int
    lam: ResidueSet
    m: int
    phi: np.ndarray          # masks on Z_q
    phi_gamma: np.ndarray
    support: np.ndarray      # (−Λ_q)^γ
    psi: np.ndarray
    delta: np.ndarray
    filler: tuple
    s_over_r: Fraction
    t_over_r: Fraction
    r: int
    s: int
    t: int
    size_rule: str = "min_r"

    # recorded but not enforced: Δ_q ⊇ Z_q ∖ (−Λ_q)^γ already meets Φ_q for typical Λ_q
    INFORMATIONAL = ("delta_avoids_phi",)

    def P(self, mask) -> Fraction:
        return Fraction(int(np.count_nonzero(mask)), self.q)

    def falsely_counts(self) -> np.ndarray:
        """|{v ∈ Λ_q : x + v ∈ Δ_q}| for every x ∈ Ψ_q."""
        xs = np.flatnonzero(self.psi)
        el = self.lam.elements
        return self.delta[(xs[:, None] + el[None, :]) % self.q].sum(axis=1)

    def invariants(self, params: StepParams) -> dict:
        n = len(self.lam)
        g, a = params.gamma, params.alpha
        psi_in_phi = bool(np.all(self.phi_gamma[self.psi]))
        disjoint = not np.any(self.psi & self.delta)
        covers = bool(np.all(self.delta[~self.support]))
        avoids_phi = not np.any(self.delta & self.phi)
        fc = self.falsely_counts()
        return {
            "psi_subset_phi_gamma": psi_in_phi,
            "psi_delta_disjoint": disjoint,
            "complement_in_delta": covers,
            "delta_avoids_phi": avoids_phi,
            "P(psi)>=alpha*gamma": self.P(self.psi) >= a * g,
            "P(delta)<1-P(lam^gamma)+delta/8":
                self.P(self.delta) < 1 - self.P(self.support) + params.delta / 8,
            "gcd(|psi|,D)=1": math.gcd(int(self.psi.sum()), params.D) == 1,
            "gcd(|delta|,D)=1": math.gcd(int(self.delta.sum()), params.D) == 1,
            "soul": ((1 - g) / self.P(self.delta) == Fraction(self.s, self.r)
                     and a * g / self.P(self.psi) == Fraction(self.t, self.r)
                     and math.gcd(self.r, params.D) == 1),
            "phi_size>=3alpha|lam|": int(self.phi.sum()) >= 3 * a * n,
            "falsely": bool(fc.size == 0 or fc.min() >= 2 * a * n),
        }

    def required_hold(self, params: StepParams) -> bool:
        return all(v for k, v in self.invariants(params).items() if k not in self.INFORMATIONAL)

    def as_dict(self) -> dict:
        return {"q": self.q, "m": self.m, "lambda_size": len(self.lam),
                "phi": np.flatnonzero(self.phi).tolist(), "psi": np.flatnonzero(self.psi).tolist(),
                "delta_size": int(self.delta.sum()), "filler": list(self.filler),
                "s_over_r": str(self.s_over_r), "t_over_r": str(self.t_over_r),
                "r": self.r, "s": self.s, "t": self.t, "size_rule": self.size_rule}


def _offset_union(base: np.ndarray, q: int, offsets) -> np.ndarray:
    out = np.zeros(q, dtype=bool)
    for k in offsets:
        out[(base + k) % q] = True
    return out


def phi_set(lam: ResidueSet, gamma, alpha) -> np.ndarray:
    """Φ_q as a mask: u ∈ −Λ_q with at least 2α|Λ_q| partners v ∈ Λ_q for which u + v
    misses −Λ_q + [−m, m]."""
    q, n = lam.modulus, len(lam)
    m = thicken_width(lam, gamma)
    neg = negate(lam).elements
    wide = _offset_union(neg, q, range(-m, m + 1))
    el = lam.elements
    counts = np.empty(neg.size, dtype=np.int64)
    chunk = max(1, 4_000_000 // max(1, n))
    for s in range(0, neg.size, chunk):
        z = (neg[s:s + chunk, None] + el[None, :]) % q
        counts[s:s + chunk] = np.count_nonzero(~wide[z], axis=1)
    alpha = _frac(alpha)
    keep = counts * alpha.denominator >= 2 * alpha.numerator * n
    out = np.zeros(q, dtype=bool)
    out[neg[keep]] = True
    return out


def select_partition_sets(lam: ResidueSet, params: StepParams, size_rule: str = "min_r") -> PartitionSets:
    """Choose Ψ_q ⊂ Φ_q^γ and Δ_q ⊇ Z_q ∖ (−Λ_q)^γ with the (soul) integers r, s, t.

    size_rule="minimal" keeps Ψ_q as large as D allows and the filler as small as possible;
    size_rule="min_r" searches all admissible (|Ψ_q|, |filler|) pairs for the smallest r
    (ties: smaller filler, then larger Ψ_q).  Both pick elements smallest-residue first.
    """
    if size_rule not in ("min_r", "minimal"):
        raise ValueError(f"unknown size rule {size_rule!r}")
    q, n = lam.modulus, len(lam)
    g, a, D = params.gamma, params.alpha, params.D
    m = thicken_width(lam, g)
    diag = {"q": q, "lambda_size": n, "m": m}
    if m < 1:
        raise PartitionInfeasible(q, ["thickening is empty (γ·s_q <= 1)"], diag)
    neg = negate(lam).elements
    support = _offset_union(neg, q, range(1, m + 1))
    phi = phi_set(lam, g, a)
    phi_gamma = _offset_union(np.flatnonzero(phi), q, range(1, m + 1))
    c = q - int(support.sum())
    eligible = np.flatnonzero(support & ~phi_gamma & ~phi)
    budget = params.delta * q / 8
    f_max = min(math.ceil(budget) - 1, eligible.size)
    psi_min = math.ceil(a * g * q)
    pool = np.flatnonzero(phi_gamma)
    diag.update({"phi_size": int(phi.sum()), "phi_gamma_size": int(pool.size), "complement": c,
                 "filler_budget": str(budget), "psi_min": psi_min})
    failed = []
    if pool.size < psi_min:
        failed.append("P(Ψ_q) >= αγ impossible inside Φ_q^γ")
    P_opts = [P for P in range(psi_min, pool.size + 1) if P > 0 and math.gcd(P, D) == 1]
    f_opts = [f for f in range(0, f_max + 1) if math.gcd(c + f, D) == 1]
    if not P_opts and not failed:
        failed.append("no |Ψ_q| coprime to D")
    if not f_opts:
        failed.append("no |Δ_q| coprime to D within the δ/8 filler budget")
    if failed:
        raise PartitionInfeasible(q, failed, diag)

    def soul(P, f):
        sr = (1 - g) * Fraction(q, c + f)
        tr = a * g * Fraction(q, P)
        return sr, tr, math.lcm(sr.denominator, tr.denominator)

    if size_rule == "minimal":
        P, f = max(P_opts), min(f_opts)
    else:
        den_s = {f: ((1 - g) * Fraction(q, c + f)).denominator for f in f_opts}
        den_t = {P: (a * g * Fraction(q, P)).denominator for P in P_opts}
        best = None
        for f in f_opts:
            ds = den_s[f]
            for P in P_opts:
                key = (math.lcm(ds, den_t[P]), f, -P)
                if best is None or key < best:
                    best = key
        _, f, P = best
        P = -P
    sr, tr, r = soul(P, f)
    psi = np.zeros(q, dtype=bool)
    psi[pool[:P]] = True
    delta = ~support
    filler = tuple(int(v) for v in eligible[:f])
    delta[list(filler)] = True
    return PartitionSets(q, lam, m, phi, phi_gamma, support, psi, delta, filler, sr, tr, r,
                         int(sr * r), int(tr * r), size_rule)


def size_conditions(lam: ResidueSet, params: StepParams, psi_AT: int, eps) -> dict:
    """The smallness conditions on q from the choice of (p, q): value, bound and verdict."""
    q, n = lam.modulus, len(lam)
    s_q = Fraction(q, n)
    thick = Fraction(int(shift_union(lam, thicken_width(lam, params.gamma)).elements.size), q)
    earth = condition_earth_count(lam, params.gamma)
    eps = _frac(eps)
    return {
        "s_q>8psi(AT)/delta": {"value": str(s_q), "bound": str(8 * psi_AT / params.delta),
                               "passed": s_q > 8 * psi_AT / params.delta},
        "P(lam^gamma)>=gamma-eps": {"value": str(thick), "bound": str(params.gamma - eps),
                                    "passed": thick >= params.gamma - eps},
        "earth>=5alpha|lam|^2": {"value": earth, "bound": str(5 * params.alpha * n * n),
                                 "passed": earth >= 5 * params.alpha * n * n},
    }


# ---------------------------------------------------------------------------------------------
# Lemma fate


def _psi_points(psi_mask: np.ndarray, period: int) -> np.ndarray:
    q = psi_mask.size
    if period % q:
        raise ValueError(f"period {period} is not a multiple of q={q}")
    x = np.arange(period, dtype=np.int64)
    return x[psi_mask[x % q]]


def fate_margin(f: PeriodicFunction, psi_mask: np.ndarray, Q: int, seq: SequenceSpec, alpha) -> Fraction:
    """min over x ∈ Ψ_q of the Λ_Q-average of f at x, minus α."""
    if Q % f.period:
        raise ValueError(f"period {f.period} of f does not divide Q={Q}")
    alpha = _frac(alpha)
    fd = f.dense()
    lam = admissible_residues(seq, Q)
    xs = _psi_points(psi_mask, fd.period)
    if xs.size == 0:
        return Fraction(0) if alpha == 0 else -alpha
    sums = lambda_sums(fd.num, lam, xs)
    return Fraction(int(sums.min()), len(lam) * fd.den) - alpha


def fate_check(f: PeriodicFunction, psi_mask: np.ndarray, Q: int, seq: SequenceSpec, alpha) -> bool:
    return fate_margin(f, psi_mask, Q, seq, alpha) >= 0


# ---------------------------------------------------------------------------------------------
# restriction to (−Λ_q)^γ


def xi_mask(q: int, m: int) -> np.ndarray:
    out = np.zeros(q, dtype=bool)
    out[np.arange(1, m + 1) % q] = True
    return out


def restrict_family(fam: Family, q: int, B: int, enforce_A: bool = True) -> Family:
    """The barred family on (−Λ_q)^γ.

    f̄_h = |Λ_q|·f_h·1_Ξ with Ξ = {1..m} + qZ, X̄_h = X_h·1_{(−Λ_q)^γ}, Ē = E ∩ (−Λ_q)^γ,
    Q̄_x = qB·Q_x, T̄ = qBT, Ā = A/(qB), D̄ = D/gcd(D, qB).

    qB <= A is what lets the barred family feed an inductive step (Ā >= 1); with
    enforce_A=False a standalone restriction with rational Ā is allowed.
    """
    P = fam.params
    pairs = [("q", q, "B", B), ("q", q, "T", fam.T), ("B", B, "T", fam.T), ("q", q, "R", fam.R)]
    for n1, v1, n2, v2 in pairs:
        if math.gcd(v1, v2) != 1:
            raise ValueError(f"{n1}={v1} and {n2}={v2} are not coprime")
    if enforce_A and q * B > P.A:
        raise ValueError(f"qB={q * B} exceeds A={P.A}")
    lam = admissible_residues(fam.seq, q)
    n = len(lam)
    m = thicken_width(lam, P.gamma)
    support = _offset_union(negate(lam).elements, q, range(1, m + 1))
    xi = xi_mask(q, m)
    fbar = [Scaled(Masked(fh, xi), Fraction(n)) for fh in fam.f]
    Xbar = [Masked(xh, support) for xh in fam.X]
    Ebar = Masked(fam.E, support)
    if Ebar.period <= DEFAULT_CAP:
        Ebar = Ebar.dense()
    Qbar = Dense(fam.Q.num * (q * B), 1)
    params = P.replace(A=P.A / (q * B), D=P.D // math.gcd(P.D, q * B))
    meta = {"q": q, "B": B, "m": m, "lambda_size": n, "source_T": fam.T, "support": support,
            "xi": xi, "source_A": str(P.A), "A_enforced": enforce_A}
    out = Family(params, q * B * fam.T, fam.R, fbar, Xbar, Ebar, Qbar, fam.seq, fam.catalog,
                 fam.eps, list(fam.log), meta)
    out.log.append({"step": "restrict", "q": q, "B": B})
    return out


# ---------------------------------------------------------------------------------------------
# the inductive step


class StepFailed(RuntimeError):
    def __init__(self, msg: str, diagnostics: dict):
        super().__init__(msg)
        self.diagnostics = diagnostics


def exit_distance(delta: np.ndarray) -> np.ndarray:
    """For u ∈ Z_q: the least y >= 1 with u + y ∉ Δ (q + 1 if Δ is everything)."""
    q = delta.size
    out = np.full(q, q + 1, dtype=np.int64)
    outside = np.flatnonzero(~delta)
    if outside.size == 0:
        return out
    u = np.arange(q, dtype=np.int64)
    idx = np.searchsorted(outside, u + 1)
    nxt = np.where(idx < outside.size, outside[np.minimum(idx, outside.size - 1)],
                   outside[0] + q)
    return nxt - u


def locality_window(psi: PsiTable, A: Fraction, Q: int) -> int:
    """How far ahead of x the properties at x look: max(ψ(A·Q), Q)."""
    AQ = A * Q
    if AQ.denominator != 1:
        raise ValueError(f"A·Q = {AQ} is not an integer")
    return max(psi(int(AQ)), Q)


def inductive_step(fam: Family, ingredient: Family, p: int, q: int, plan: RearrangementPlan,
                   parts: PartitionSets, params: StepParams, psi: PsiTable,
                   cap: int = DEFAULT_CAP) -> Family:
    """Step (K, M, L) -> Step (K, M, L+1)."""
    K, T, R = fam.K, fam.T, fam.R
    g, a = params.gamma, params.alpha
    S, R1 = ingredient.T, ingredient.R
    problems = []
    if ingredient.K != K - 1:
        problems.append(f"ingredient has K={ingredient.K}, expected {K - 1}")
    if plan.T != T or plan.p != p:
        problems.append("rearrangement plan does not match (T, p)")
    if parts.q != q:
        problems.append("partition sets belong to another q")
    named = {"p": p, "q": q, "T_L": T, "R_L": R, "D": params.D, "S": S, "R'": R1}
    need = [("p", "q"), ("p", "T_L"), ("p", "R_L"), ("p", "D"), ("q", "T_L"), ("q", "R_L"),
            ("q", "D"), ("S", "p"), ("S", "q"), ("S", "T_L"), ("S", "D"), ("R'", "p"),
            ("R'", "q"), ("R'", "T_L"), ("R'", "D")]
    for k1, k2 in need:
        if math.gcd(named[k1], named[k2]) != 1:
            problems.append(f"{k1}={named[k1]} and {k2}={named[k2]} are not coprime")
    if problems:
        raise StepFailed("precondition violated", {"problems": problems})

    B = T * p
    pT = plan.period
    T_new = S * T * p * q
    if T_new > cap:
        raise CapExceeded(f"T_(L+1) = {T_new} exceeds cap {cap}")
    bar = restrict_family(ingredient, q, B)

    # rearranged previous family
    f_t = [apply_rearrangement(fh, plan) for fh in fam.f]
    X_t = [apply_rearrangement(xh, plan) for xh in fam.X]
    Q_t = rearranged_points(fam.Q.lifted(T).num if fam.Q.period != T else fam.Q.num, plan)
    E_L = fam.E.lifted(T).num.astype(bool) if fam.E.period != T else fam.E.num.astype(bool)
    guard = locality_window(psi, params.A, T) - 1
    E1 = exceptional_E1(E_L, plan, guard)

    # E²: points of Δ that leave Δ within their window
    exitd = exit_distance(parts.delta)
    win = np.zeros(pT, dtype=np.int64)
    for Qv in np.unique(Q_t):
        win[Q_t == Qv] = locality_window(psi, params.A, int(Qv))
    x = np.arange(T_new, dtype=np.int64)
    xq = x % q
    in_delta = parts.delta[xq]
    E2 = in_delta & (exitd[xq] <= win[x % pT])
    Ebar = bar.E.num_at(x).astype(bool)
    E_new = E1[x % pT] | E2 | Ebar

    Q_new = np.where(in_delta, Q_t[x % pT], bar.Q.num_at(x))
    del x, xq

    c = 1 / (1 - g)
    f_new = [Splice(f_t[h], bar.f[h], parts.delta).dense(cap) for h in range(K - 1)]
    fK = Scaled(Masked(f_t[K - 1], parts.delta), c).dense(cap)  # period pqT_L
    f_new.append(fK if fK.period == T_new else fK.lifted(T_new))
    X_new = [Splice(X_t[h], bar.X[h], parts.delta) for h in range(K - 1)]
    N0 = R1 * R * T_new
    XK = BlockSplit(Scaled(Masked(X_t[K - 1], parts.delta), c),
                    Scaled(Dense.indicator(parts.psi), a), N0, parts.r, parts.s, parts.t,
                    disjoint_mod=q)
    X_new.append(XK)

    eps_q = condition_wine_epsilon(parts.lam, g)
    new = Family(params.replace(K=K, L=fam.params.L + 1), T_new, R * R1 * parts.r, f_new, X_new,
                 _bool_dense(E_new), Dense(Q_new, 1), fam.seq, fam.catalog,
                 max(fam.eps, ingredient.eps, eps_q), list(fam.log))
    mean_old, mean_new = fam.f[-1].mean(), fK.mean()
    Qoff = sorted(int(v) for v in np.unique(bar.Q.num))
    fate = {str(Qv): str(fate_margin(fK, parts.psi, Qv, fam.seq, a)) for Qv in Qoff
            if Qv % (q * p * T) == 0 and Qv <= cap}
    new.log.append({
        "step": "inductive", "K": K, "L": fam.params.L + 1, "p": p, "q": q,
        "omega": list(plan.shifts), "partition": parts.as_dict(),
        "T": T_new, "R": new.R, "S": S, "R'": R1, "guard": guard,
        "P(E1)": str(Fraction(int(E1.sum()), pT)), "P(E2)": str(Fraction(int(E2.sum()), T_new)),
        "P(Ebar')": str(Fraction(int(Ebar.sum()), T_new)),
        "P(E)": str(Fraction(int(E_new.sum()), T_new)),
        "growl": {"before": str(mean_old), "after": str(mean_new),
                  "ratio": str(mean_new / mean_old), "bound": str(1 + 4 * new.eps)},
        "fate_margin": fate, "eps_q": str(eps_q),
        "invariants": {k: bool(v) for k, v in parts.invariants(params).items()},
    })
    return new


# ---------------------------------------------------------------------------------------------
# driving the induction


class PoolExhausted(RuntimeError):
    def __init__(self, msg: str, trace: list):
        super().__init__(msg)
        self.trace = trace


@dataclass
class BuildConfig:
    seq: SequenceSpec = field(default_factory=SequenceSpec)
    p_pool: tuple = ()
    q_pool: tuple = ()
    seed: int = 0
    strict: bool = False
    T_cap: int = 10_000_000
    cap: int = DEFAULT_CAP
    omega_budget: int = 200
    size_rule: str = "min_r"
    H: int = 100_000
    synthetic: bool = False    # K >= 2: use synthetic_family for the inner ingredients

    def catalog(self) -> QsetCatalog:
        return QsetCatalog.for_sequence(self.seq, tuple(self.p_pool), tuple(self.q_pool))


def default_pools(seq: SequenceSpec) -> tuple[tuple, tuple]:
    """Small pairwise coprime pools: primes for p, short products for q.

    For the primes s_q = q/φ(q) must exceed 1/γ; with odd q this needs γ close to 1/2 and
    q divisible by 3·5·7·11, so there is room for a single q only.
    """
    if seq.kind == "prime":
        return (13, 17, 19), (3 * 5 * 7 * 11,)
    return (17, 19, 23), (5 * 13, 7 * 11)


def _choose_p(fam: Family, cfg: BuildConfig, params: StepParams, used: set, psi: PsiTable, trace: list):
    T, R = fam.T, fam.R
    guard = locality_window(psi, params.A, T) - 1
    for p in sorted(cfg.p_pool):
        if p in used or math.gcd(p, T * R * params.D) != 1:
            continue
        lam = admissible_residues(fam.seq, p * T)
        rec = {"p": p, "T": T, "lambda_size": len(lam)}
        if cfg.strict:
            bound = float(fam.E_measure()) + (guard + 2 * T) / (T * math.sqrt(p))
            rec["E1_bound"] = bound
            if bound > params.delta / 2:
                trace.append({**rec, "rejected": "E1 bound above δ/2"})
                continue
        targets = None if len(lam) >= 2 * T else [fam.f[-1].dense().lifted(T)]
        try:
            plan = find_good_omega(T, p, lam, seed=cfg.seed, budget=cfg.omega_budget, targets=targets)
        except OmegaSearchFailed as exc:
            trace.append({**rec, "rejected": str(exc)})
            continue
        trace.append({**rec, "accepted": True, "certificate": "targets" if targets else "singletons"})
        return p, plan
    raise PoolExhausted(f"no usable p for T={T}", trace)


def _choose_q(fam: Family, p: int, cfg: BuildConfig, params: StepParams, used: set,
              psi: PsiTable, trace: list):
    T, R = fam.T, fam.R
    psi_AT = locality_window(psi, params.A, T)
    for q in sorted(cfg.q_pool):
        if q in used or math.gcd(q, T * R * p * params.D) != 1:
            continue
        if T * p * q > cfg.T_cap:
            trace.append({"q": q, "rejected": f"T·p·q = {T * p * q} above T cap {cfg.T_cap}"})
            continue
        lam = admissible_residues(fam.seq, q)
        try:
            parts = select_partition_sets(lam, params, cfg.size_rule)
        except PartitionInfeasible as exc:
            trace.append({"q": q, "rejected": str(exc), "diagnostics": exc.diagnostics})
            continue
        conds = size_conditions(lam, params, psi_AT, condition_wine_epsilon(lam, params.gamma))
        if cfg.strict and not all(c["passed"] for c in conds.values()):
            trace.append({"q": q, "rejected": "size conditions", "conditions": conds})
            continue
        trace.append({"q": q, "accepted": True, "conditions": conds, "r": parts.r})
        return q, parts
    raise PoolExhausted(f"no usable q for T={T}, p={p}", trace)


def build_family(K: int, M: int, params: StepParams, cfg: BuildConfig | None = None,
                 used: set | None = None, psi: PsiTable | None = None) -> Family:
    """Step (K, M, M) by the double induction; level L uses δ·4^{L−M}."""
    cfg = cfg or BuildConfig()
    if not cfg.p_pool or not cfg.q_pool:
        pp, qp = default_pools(cfg.seq)
        cfg = replace(cfg, p_pool=cfg.p_pool or pp, q_pool=cfg.q_pool or qp)
    catalog = cfg.catalog()
    used = set() if used is None else used
    psi = psi or PsiTable(cfg.seq, catalog, params.beta, SRule(params.S), cfg.H)
    params = params.replace(K=K, M=M, L=M)
    if K == 0:
        return empty_family(params, cfg.seq, catalog)
    base = params.replace(delta=params.delta / Fraction(4) ** M)
    if K == 1:
        fam = trivial_step_family(base.replace(K=1, L=0), cfg.seq, catalog)
    else:
        prev = build_family(K - 1, M, base, cfg, used, psi)
        fam = extend_family(prev)
        fam.params = base.replace(K=K, L=0)
    for L in range(M):
        step_params = base.replace(K=K, L=L + 1, delta=base.delta * Fraction(4) ** (L + 1))
        trace: list = []
        p, plan = _choose_p(fam, cfg, step_params, used, psi, trace)
        used.add(p)
        q, parts = _choose_q(fam, p, cfg, step_params, used, psi, trace)
        used.add(q)
        Tpq = fam.T * p * q
        ing_params = step_params.replace(A=step_params.A * Tpq, delta=step_params.delta / 4,
                                         D=step_params.D * Tpq)
        if K == 1:
            ingredient = empty_family(ing_params, cfg.seq, catalog)
        elif cfg.synthetic:
            ingredient = synthetic_family(K - 1, ing_params, cfg.seq, catalog)
        else:
            ingredient = build_family(K - 1, M, ing_params, cfg, used, psi)
        if ingredient.T * Tpq > cfg.T_cap:
            raise CapExceeded(f"T would grow to {ingredient.T * Tpq} > {cfg.T_cap}; trace: "
                              f"{[e for e in fam.log if e.get('step') == 'inductive']}")
        fam = inductive_step(fam, ingredient, p, q, plan, parts, step_params, psi, cfg.cap)
        fam.log[-1]["choice_trace"] = trace
    fam.log.append({"step": "psi", "table": psi.table()})
    return fam
