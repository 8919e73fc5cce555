"""Exact checks of the four family properties, independence checks and the maximal demo.

Everything here is read-only over a Family.  Functions of x ∈ Z_{RT} that only depend on
x mod T (the f_h, E, Q_x) are evaluated once per residue mod T; the X_h enter through
their envelope max_{x ≡ z mod T} X_h(x), so a check over Z_T covers every lift.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .averages import lambda_sums, periodic_window_ok, representatives, weighted_sums
from .equidist import PsiTable, SRule
from .family import Family, locality_window, y_distribution
from .periodic import (DEFAULT_CAP, CapExceeded, Dense, PeriodicFunction, add_dense,
                       conditional_histogram, factorizes, joint_histogram, normalize)
from .residues import QsetCatalog, ResidueSet, SequenceSpec, admissible_residues, terms_mod


def _frac(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(str(x))
    return x if isinstance(x, Fraction) else Fraction(x)


# ---------------------------------------------------------------------------------------------
# elementary averages


def residue_average(f: PeriodicFunction, lam: ResidueSet, x: int) -> Fraction:
    """(1/|Λ_Q|)·Σ f(x + a) over the representatives 1 <= a <= Q."""
    if len(lam) == 0:
        raise ValueError("empty residue set")
    vals = f.num_at(int(x) + representatives(lam))
    return Fraction(int(vals.sum()), len(lam) * f.den)


def subsequence_average(f: PeriodicFunction, seq: SequenceSpec, N: int, x: int) -> Fraction:
    """A_N f(x) = (1/N)·Σ_{k<=N} f(x + n_k), f extended periodically."""
    if N < 1:
        raise ValueError("N must be at least 1")
    P = f.period
    r = terms_mod(seq, P, N) if P > 1 else np.zeros(N, dtype=np.int64)
    vals = f.num_at((int(x) + r) % P)
    return Fraction(int(vals.sum()), N * f.den)


def weak_norm(g) -> Fraction:
    """max over values λ of λ·P(|g| >= λ).

    g is a PeriodicFunction, or a histogram {value: count} (e.g. over a sample).
    """
    hist = g.histogram() if isinstance(g, PeriodicFunction) else Counter(g)
    total = sum(hist.values())
    if total == 0:
        raise ValueError("empty histogram")
    folded = Counter()
    for v, c in hist.items():
        folded[abs(_frac(v))] += c
    best, above = Fraction(0), 0
    for v in sorted(folded, reverse=True):
        above += folded[v]
        best = max(best, v * Fraction(above, total))
    return best


def pairwise_independence_check(Xa: PeriodicFunction, Xb: PeriodicFunction,
                                cap: int = DEFAULT_CAP) -> bool:
    """Exact factorization of the joint value histogram over a common period."""
    return factorizes(joint_histogram(Xa, Xb, cap))


# ---------------------------------------------------------------------------------------------
# reports


@dataclass
class PropertyResult:
    name: str
    passed: bool
    margin: Fraction | None = None
    witness: dict | None = None
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed,
                "margin": None if self.margin is None else str(self.margin),
                "witness": self.witness, "details": self.details}


@dataclass
class VerificationReport:
    properties: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.properties)

    def get(self, name: str) -> PropertyResult:
        for p in self.properties:
            if p.name == name:
                return p
        raise KeyError(name)

    def failures(self) -> list[str]:
        return [p.name for p in self.properties if not p.passed]

    def as_dict(self) -> dict:
        return {"passed": self.passed, "failures": self.failures(), "meta": self.meta,
                "properties": [p.as_dict() for p in self.properties]}


def default_psi(fam: Family, H: int = 100_000) -> PsiTable:
    # without a catalog Qset is {1}, which is all a family with Q_x ≡ 1 needs
    catalog = fam.catalog if fam.catalog is not None else QsetCatalog()
    return PsiTable(fam.seq, catalog, fam.params.beta, SRule(fam.params.S), H)


def _on_T(f: PeriodicFunction, T: int) -> Dense:
    d = f.dense()
    return d if d.period == T else d.lifted(T)


# ---------------------------------------------------------------------------------------------
# the family properties


def _check_bounds(fam: Family) -> PropertyResult:
    P = fam.params
    n = (fam.K - 1) * P.M + P.L
    bound = (1 + 4 * fam.eps) ** n
    means, worst, witness = {}, None, None
    for h, fh in enumerate(fam.f, 1):
        m = fh.mean()
        means[h] = str(m)
        slack = min(m - 1, bound - m)
        if worst is None or slack < worst:
            worst, witness = slack, {"h": h, "E f_h": str(m)}
    growl = []
    ok_growl = True
    for e in fam.log:
        if e.get("step") == "inductive":
            g = e["growl"]
            ratio, gb = Fraction(g["ratio"]), Fraction(g["bound"])
            ok = 1 <= ratio <= gb
            ok_growl &= ok
            growl.append({"K": e["K"], "L": e["L"], "ratio": g["ratio"], "bound": g["bound"],
                          "passed": ok})
    passed = (worst is None or worst >= 0) and ok_growl
    return PropertyResult("(1) mean bounds", passed, worst, None if passed else witness,
                          {"bound": str(bound), "eps": str(fam.eps), "exponent": n,
                           "means": means, "growl": growl})


def _check_distribution(fam: Family, cap: int) -> PropertyResult:
    P = fam.params
    dists, ok, witness = {}, True, None
    for h, xh in enumerate(fam.X, 1):
        n = P.L if h == fam.K else P.M
        target = y_distribution(n, P.gamma, P.alpha)
        got = normalize(xh.histogram(cap))
        match = target.matches(got)
        dists[h] = {"n": n, "matches": match, "distribution": {str(k): str(v) for k, v in got.items()}}
        if not match and ok:
            ok, witness = False, {"h": h, "expected": target.as_dict(),
                                  "got": {str(k): str(v) for k, v in got.items()}}
    pairs = {}
    for a in range(fam.K):
        for b in range(a + 1, fam.K):
            fact = pairwise_independence_check(fam.X[a], fam.X[b], cap)
            pairs[f"{a + 1},{b + 1}"] = fact
            if not fact and ok:
                ok, witness = False, {"pair": [a + 1, b + 1]}
    return PropertyResult("(2) distribution and independence", ok, None, witness,
                          {"distributions": dists, "pairs": pairs})


def _check_exceptional(fam: Family) -> PropertyResult:
    pe = fam.E_measure()
    d = fam.params.delta
    parts = [{k: e[k] for k in ("K", "L", "P(E1)", "P(E2)", "P(Ebar')", "P(E)")}
             for e in fam.log if e.get("step") == "inductive"]
    return PropertyResult("(3) exceptional set", pe <= d, d - pe,
                          None if pe <= d else {"P(E)": str(pe), "delta": str(d)},
                          {"P(E)": str(pe), "delta": str(d), "steps": parts})


def _check_local(fam: Family, psi: PsiTable, cap: int) -> PropertyResult:
    T = fam.T
    if T > cap:
        raise CapExceeded(f"T={T} exceeds cap {cap}")
    A = fam.params.A
    E = _on_T(fam.E, T).num.astype(bool)
    Q = _on_T(fam.Q, T).num
    fs = [_on_T(fh, T) for fh in fam.f]
    envs = [xh.envelope(T, cap) for xh in fam.X]
    worst, witness = None, None
    joker_bad = thief_bad = 0
    per_Q = {}
    for Qv in np.unique(Q[~E]):
        Qv = int(Qv)
        xs = np.flatnonzero((Q == Qv) & ~E)
        lam = admissible_residues(fam.seq, Qv) if Qv > 1 else ResidueSet(1, np.array([0]))
        n = len(lam)
        top = locality_window(psi, A, Qv)
        rec = {"points": int(xs.size), "lambda_size": n, "window": top}
        for h, (fh, env, xh) in enumerate(zip(fs, envs, fam.X), 1):
            sums = lambda_sums(fh.num, lam, xs)
            # sums/(n·f.den) >= env/X.den
            lhs = sums * xh.den
            rhs = env[xs] * (n * fh.den)
            bad = lhs < rhs
            joker_bad += int(bad.sum())
            i = int(np.argmin(lhs - rhs))
            m = Fraction(int(lhs[i] - rhs[i]), n * fh.den * xh.den)
            if worst is None or m < worst:
                worst = m
                if m < 0:
                    witness = {"property": "joker", "x": int(xs[i]), "h": h, "Q_x": Qv,
                               "average": str(Fraction(int(sums[i]), n * fh.den)),
                               "X_max": str(Fraction(int(env[xs[i]]), xh.den))}
            ok = periodic_window_ok(fh.num, Qv, xs + Qv, xs + top)
            nb = int((~ok).sum())
            thief_bad += nb
            if nb and (witness is None or witness.get("property") != "joker"):
                witness = {"property": "thief", "x": int(xs[~ok][0]), "h": h, "Q_x": Qv,
                           "window": [Qv, top]}
        per_Q[str(Qv)] = rec
    passed = joker_bad == 0 and thief_bad == 0
    return PropertyResult("(4) averages and periodicity off E", passed, worst,
                          None if passed else witness,
                          {"joker_violations": joker_bad, "thief_violations": thief_bad,
                           "by_Q": per_Q, "points_checked": int((~E).sum())})


def verify_family(fam: Family, psi: PsiTable | None = None, cap: int = DEFAULT_CAP) -> VerificationReport:
    """Properties (1)–(4) evaluated exactly; structural problems are reported as a failure."""
    report = VerificationReport(meta={"family": fam.summary(), "cap": cap})
    problems = fam.structure_problems()
    report.properties.append(PropertyResult("structure", not problems, None,
                                            {"problems": problems} if problems else None))
    report.properties.append(_check_bounds(fam))
    report.properties.append(_check_distribution(fam, cap))
    report.properties.append(_check_exceptional(fam))
    if problems:
        report.properties.append(PropertyResult("(4) averages and periodicity off E", False, None,
                                                {"skipped": "structure"}))
        return report
    if fam.K:
        psi = psi or default_psi(fam)
        report.properties.append(_check_local(fam, psi, cap))
        report.meta["psi"] = psi.table()
    return report


# ---------------------------------------------------------------------------------------------
# restricted families


def _stride_sample(n: int, size: int, seed: int) -> np.ndarray:
    """Deterministic stride sample of Z_n: a seeded offset and a stride coprime to n."""
    if size >= n:
        return np.arange(n, dtype=np.int64)
    rng = np.random.default_rng(seed)
    stride = max(1, n // size)
    while math.gcd(stride, n) != 1:
        stride += 1
    start = int(rng.integers(0, n))
    return (start + stride * np.arange(size, dtype=np.int64)) % n


def sigma_sets(support: np.ndarray, seed: int = 0) -> list[np.ndarray]:
    """Three distinct nonempty q-periodic subsets of the support: all of it, its first half
    and a seeded random part."""
    idx = np.flatnonzero(support)
    q = support.size
    half = np.zeros(q, dtype=bool)
    half[idx[: max(1, idx.size // 2)]] = True
    rng = np.random.default_rng(seed)
    rand = np.zeros(q, dtype=bool)
    pick = rng.choice(idx, size=max(1, idx.size // 3), replace=False)
    rand[pick] = True
    if rand.sum() == half.sum() and np.array_equal(rand, half):
        rand[idx[-1]] = ~rand[idx[-1]]
    return [support.copy(), half, rand]


def _restricted_sums(f: Dense, xi: np.ndarray, seq: SequenceSpec, q: int, Q: int,
                     xs: np.ndarray, direct_limit: int) -> tuple[np.ndarray, int] | None:
    """Σ_{a ∈ Λ_{qQ}, 1<=a<=qQ} f(x+a)·1_Ξ(x+a) for x in xs (in units of 1/f.den), and
    |Λ_{qQ}|; None if too large to evaluate."""
    lam_Q = _lam(seq, Q)
    lam_q = _lam(seq, q)
    T = f.period
    if Q % T == 0:
        # Λ_{qQ} ≅ Λ_q × Λ_Q and each factor reads its own coordinate only
        hits = xi[(xs[:, None] + lam_q.elements[None, :]) % q].sum(axis=1)
        return hits * lambda_sums(f.num, lam_Q, xs % T), len(lam_q) * len(lam_Q)
    big = _lam(seq, q * Q)
    if len(big) > direct_limit:
        return None
    a = representatives(big)
    out = np.empty(xs.size, dtype=np.int64)
    chunk = max(1, direct_limit // a.size)
    for st in range(0, xs.size, chunk):
        z = xs[st:st + chunk, None] + a[None, :]
        out[st:st + chunk] = (f.num[z % T] * xi[z % q]).sum(axis=1)
    return out, len(big)


_LAM_CACHE: dict = {}


def _lam(seq: SequenceSpec, Q: int) -> ResidueSet:
    key = (seq, Q)
    if key not in _LAM_CACHE:
        _LAM_CACHE[key] = admissible_residues(seq, Q) if Q > 1 else ResidueSet(1, np.array([0]))
    return _LAM_CACHE[key]


def verify_restricted(bar: Family, source: Family, psi: PsiTable | None = None,
                      sample_size: int = 2000, seed: int = 0, sigmas: list | None = None,
                      cap: int = DEFAULT_CAP, direct_limit: int = 2_000_000) -> VerificationReport:
    """(1̄)–(4̄) for bar = restrict_family(source, q, B).

    (1̄)–(3̄) are exact.  (4̄) lives on Z_{R·qBT}; it is checked on a deterministic stride
    sample of points outside Ē, each evaluated exactly.
    """
    meta = bar.restricted or {}
    if "support" not in meta:
        raise ValueError("family is not a restriction")
    q, B, support, xi, n_q = meta["q"], meta["B"], meta["support"], meta["xi"], meta["lambda_size"]
    g = source.params.gamma
    report = VerificationReport(meta={"q": q, "B": B, "T_bar": bar.T, "sample_size": sample_size,
                                      "seed": seed})
    # (1̄)
    vals, ok1, worst1 = {}, True, None
    for h, (fb, fh) in enumerate(zip(bar.f, source.f), 1):
        mb, m = fb.mean(cap), fh.mean(cap)
        vals[h] = {"E fbar": str(mb), "gamma E f": str(g * m)}
        ok1 &= mb <= g * m
        worst1 = g * m - mb if worst1 is None else min(worst1, g * m - mb)
    report.properties.append(PropertyResult("(1bar) mean", ok1, worst1, None, vals))
    # (2̄)
    sigmas = sigmas if sigmas is not None else sigma_sets(support, seed)
    ok2, details, witness = True, [], None
    for i, sig in enumerate(sigmas):
        sig = np.asarray(sig, dtype=bool)
        if sig.size != q or not sig.any() or np.any(sig & ~support):
            raise ValueError("each Σ must be a nonempty subset of (−Λ_q)^γ on Z_q")
        row = {"size": int(sig.sum())}
        for h, (xb, xh) in enumerate(zip(bar.X, source.X), 1):
            same = normalize(conditional_histogram(xb, sig, cap)) == normalize(xh.histogram(cap))
            row[f"X{h}"] = same
            if not same and ok2:
                ok2, witness = False, {"sigma": i, "h": h}
        for a in range(bar.K):
            for b in range(a + 1, bar.K):
                fact = factorizes(joint_histogram(bar.X[a], bar.X[b], cap, where=sig))
                row[f"pair {a + 1},{b + 1}"] = fact
                if not fact and ok2:
                    ok2, witness = False, {"sigma": i, "pair": [a + 1, b + 1]}
        details.append(row)
    report.properties.append(PropertyResult("(2bar) conditional distributions", ok2, None, witness,
                                            {"sigmas": details}))
    # (3̄)
    pe = bar.E.mean(cap)
    bound = source.params.delta * Fraction(int(support.sum()), q)
    report.properties.append(PropertyResult("(3bar) exceptional set", pe <= bound, bound - pe,
                                            None, {"P(Ebar)": str(pe), "bound": str(bound)}))
    # (4̄) on a sample
    psi = psi or default_psi(source)
    T = source.T
    fs = [_on_T(fh, T) for fh in source.f]
    xs = _stride_sample(bar.period_X, sample_size, seed)
    xs = xs[bar.E.num_at(xs) == 0]
    joker_bad = thief_bad = skipped = 0
    worst, witness = None, None
    Abar = bar.params.A
    Qbs = bar.Q.num_at(xs)
    for Qb in np.unique(Qbs).tolist():
        grp = xs[Qbs == Qb]
        Q = Qb // (q * B)
        top = locality_window(psi, Abar, Qb)
        for h, (fh, xb) in enumerate(zip(fs, bar.X), 1):
            xv = xb.num_at(grp)
            res = _restricted_sums(fh, xi, bar.seq, q, Q, grp, direct_limit) if B == 1 else None
            if res is None:
                skipped += int(grp.size)
            else:
                sums, n_big = res
                # n_q·sums/(n_big·f.den) >= xv/X.den
                diff = (n_q * sums * xb.den) - xv * (n_big * fh.den)
                k = int(np.argmin(diff))
                m = Fraction(int(diff[k]), n_big * fh.den * xb.den)
                worst = m if worst is None else min(worst, m)
                nb = int((diff < 0).sum())
                joker_bad += nb
                if nb and witness is None:
                    witness = {"property": "joker", "x": int(grp[k]), "h": h, "Qbar": Qb,
                               "average": str(Fraction(int(n_q * sums[k]), n_big * fh.den)),
                               "X": str(Fraction(int(xv[k]), xb.den))}
            # f̄(z − Q̄) = f̄(z) follows from f(z − Q̄) = f(z) since q | Q̄; only the failures
            # of that stronger statement need the exact test through Ξ
            ok = periodic_window_ok(fh.num, Qb % T, grp + Qb, grp + top)
            for x in grp[~ok].tolist():
                z = np.arange(x + Qb, x + top + 1, dtype=np.int64)
                lhs = fh.num[(z - Qb) % T] * xi[(z - Qb) % q]
                rhs = fh.num[z % T] * xi[z % q]
                if np.any(lhs != rhs):
                    thief_bad += 1
                    witness = witness or {"property": "thief", "x": x, "h": h, "Qbar": Qb}
    passed = joker_bad == 0 and thief_bad == 0 and skipped == 0
    report.properties.append(PropertyResult(
        "(4bar) averages and periodicity off Ebar (sampled)", passed, worst, witness,
        {"sampled_points": int(xs.size), "joker_violations": joker_bad,
         "thief_violations": thief_bad, "skipped": skipped}))
    return report


# ---------------------------------------------------------------------------------------------
# the maximal-inequality demonstrator


@dataclass
class MaximalReport:
    sample: list
    sup_values: list
    sup_capped: list
    weak_norm: Fraction
    mean_f: Fraction
    ratio: Fraction
    worth_checked: int
    worth_violations: int
    worth_margin: Fraction | None
    worth_witness: dict | None
    N_cap: int
    chebyshev_bound: float
    tail_threshold: Fraction
    empirical_tail: Fraction
    mean_X: Fraction
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.worth_violations == 0

    def as_dict(self) -> dict:
        return {"passed": self.passed, "sample_size": len(self.sample),
                "weak_norm": str(self.weak_norm), "E f": str(self.mean_f),
                "ratio": str(self.ratio), "ratio_float": float(self.ratio),
                "worth_checked": self.worth_checked, "worth_violations": self.worth_violations,
                "worth_margin": None if self.worth_margin is None else str(self.worth_margin),
                "worth_witness": self.worth_witness, "N_cap": self.N_cap,
                "chebyshev_bound": self.chebyshev_bound,
                "tail_threshold": str(self.tail_threshold),
                "empirical_tail": str(self.empirical_tail), "E X": str(self.mean_X),
                "notes": self.notes}

    def csv(self) -> str:
        rows = ["x,sup_A_N_f,sup_capped"]
        rows += [f"{x},{v},{c}" for x, v, c in zip(self.sample, self.sup_values, self.sup_capped)]
        return "\n".join(rows) + "\n"


def _sum_tail(fam: Family, threshold: Fraction, cap: int, sample: np.ndarray) -> tuple[Fraction, str]:
    """P(Σ_h X_h <= threshold·K), exactly when K <= 2, else over the sample."""
    K = fam.K
    if K == 1:
        h = fam.X[0].histogram(cap)
        tot = sum(h.values())
        return Fraction(sum(c for v, c in h.items() if v <= threshold), tot), "exact"
    if K == 2:
        j = joint_histogram(fam.X[0], fam.X[1], cap)
        tot = sum(j.values())
        return Fraction(sum(c for (a, b), c in j.items() if a + b <= 2 * threshold), tot), "exact"
    s = sum(Fraction(1, xh.den) * xh.num_at(sample) for xh in fam.X)
    return Fraction(int(sum(1 for v in s if v <= K * threshold)), sample.size), "sampled"


def demo_maximal(fam: Family, seq: SequenceSpec | None = None, S: SRule | None = None,
                 beta=None, sample_size: int = 2000, N_cap: int = 2000, psi: PsiTable | None = None,
                 seed: int = 0, cap: int = DEFAULT_CAP) -> MaximalReport:
    """f = Σ f_h and X = Σ X_h; certifies A_N f(x) > (β/|Λ_Q|)Σ_a f(x+a) >= β·X(x) at
    N = ψ(Q_x) for every x ∉ E and estimates ‖sup_N A_N f‖_{1,∞} on a sample.

    The certificate runs over all of Z_T (f, E and Q_x are T-periodic; X enters through its
    envelope), which covers every point of Z_{RT}.
    """
    seq = seq or fam.seq
    beta = _frac(beta if beta is not None else fam.params.beta)
    S = S or SRule(fam.params.S)
    if fam.K == 0:
        raise ValueError("the empty family has no functions")
    psi = psi or PsiTable(seq, fam.catalog if fam.catalog is not None else QsetCatalog(), beta, S)
    T = fam.T
    if T > cap:
        raise CapExceeded(f"T={T} exceeds cap {cap}")
    f = add_dense(*[_on_T(fh, T) for fh in fam.f])
    Xs = _common_den(fam.X)
    X_env = sum(xh.envelope(T, cap) for xh in Xs)
    X_den = Xs[0].den
    E = _on_T(fam.E, T).num.astype(bool)
    Q = _on_T(fam.Q, T).num
    notes = []

    # (worth) over all of Z_T minus E
    worth_bad, worth_checked, worth_margin, witness = 0, 0, None, None
    AN_num = np.zeros(T, dtype=np.int64)   # N·den·A_N f(x) at N = ψ(Q_x)
    Nx = np.zeros(T, dtype=np.int64)
    for Qv in np.unique(Q):
        Qv = int(Qv)
        xs_all = np.flatnonzero(Q == Qv)
        lam = admissible_residues(seq, Qv) if Qv > 1 else ResidueSet(1, np.array([0]))
        n = len(lam)
        N = psi(Qv)
        Nx[xs_all] = N
        cnt = np.bincount(terms_mod(seq, T, N) if T > 1 else np.zeros(N, dtype=np.int64),
                          minlength=T).astype(np.int64)
        AN = weighted_sums(f.num, cnt, xs_all)
        AN_num[xs_all] = AN
        xs = xs_all[~E[xs_all]]
        if xs.size == 0:
            continue
        keep = ~E[xs_all]
        lamsum = lambda_sums(f.num, lam, xs)            # den·Σ_a f(x+a)
        # A_N f > β/n·Σ f(x+a):  AN·n·bd > bn·N·lamsum
        bn, bd = beta.numerator, beta.denominator
        first = AN[keep].astype(object) * (n * bd) - np.array(lamsum, dtype=object) * (bn * N)
        # β/n·Σ f(x+a) >= β·X(x):  lamsum·X_den >= n·den·X
        second = lamsum * X_den - X_env[xs] * (n * f.den)
        worth_checked += int(xs.size)
        bad = (first <= 0) | (second < 0)
        worth_bad += int(bad.sum())
        m1 = min(Fraction(int(v), n * bd * N * f.den) for v in first)
        m2 = Fraction(int(second.min()), n * f.den * X_den)
        m = min(m1, beta * m2)
        if worth_margin is None or m < worth_margin:
            worth_margin = m
        if bad.any() and witness is None:
            i = int(np.flatnonzero(bad)[0])
            witness = {"x": int(xs[i]), "Q_x": Qv, "N": N,
                       "A_N f": str(Fraction(int(AN[keep][i]), N * f.den)),
                       "residue_part": str(beta * Fraction(int(lamsum[i]), n * f.den)),
                       "beta_X": str(beta * Fraction(int(X_env[xs[i]]), X_den))}

    # sup over N ∈ S, N <= N_cap on a sample of Z_{RT}
    sample = _stride_sample(fam.period_X, sample_size, seed)
    Ns = S.members_upto(N_cap)
    r = terms_mod(seq, T, N_cap) if T > 1 else np.zeros(N_cap, dtype=np.int64)
    sup_vals, sup_capped = [], []
    for x in sample.tolist():
        cs = np.cumsum(f.num[(x + r) % T])[Ns - 1]
        ratios = cs / Ns
        near = np.flatnonzero(ratios >= ratios.max() * (1 - 1e-12))
        capped = max(Fraction(int(cs[j]), int(Ns[j]) * f.den) for j in near)
        sup_capped.append(capped)
        z = x % T
        sup_vals.append(max(capped, Fraction(int(AN_num[z]), int(Nx[z]) * f.den)))
    wn = weak_norm(Counter(sup_vals))
    Ef = f.mean()
    EX = sum((xh.mean(cap) for xh in fam.X), Fraction(0))
    C = float(fam.params.C)
    a = float(fam.params.alpha)
    cheb = 8 * math.exp(2 * C) / (a * a * C * C * fam.K)
    thr = fam.params.C * fam.params.alpha ** 2 / 2
    tail, how = _sum_tail(fam, thr, cap, sample)
    if how == "sampled":
        notes.append("tail probability estimated on the sample")
    if fam.period_X > sample.size:
        notes.append(f"sup and weak norm over a stride sample of {sample.size} points of Z_RT")
    return MaximalReport([int(x) for x in sample], sup_vals, sup_capped, wn, Ef, wn / Ef,
                         worth_checked, worth_bad, worth_margin, witness, N_cap, cheb, thr, tail,
                         EX, notes)


def _common_den(fs: list) -> list:
    """Envelope-ready views of the X_h on one denominator (sums of envelopes need it)."""
    den = math.lcm(*(f.den for f in fs))
    return [_Rescaled(f, den) for f in fs]


class _Rescaled(PeriodicFunction):
    def __init__(self, f: PeriodicFunction, den: int):
        self.f, self.den, self.period = f, den, f.period

    def num_at(self, x):
        return self.f.num_at(x) * (self.den // self.f.den)

    def envelope(self, M, cap=DEFAULT_CAP):
        return self.f.envelope(M, cap) * (self.den // self.f.den)
