"""Command line front end.

Every subcommand reads a plain ``key = value`` config file (``--config`` or the file named
by BADSEQ_CONFIG) and then applies flag overrides.  Reports are canonical JSON carrying the
config hash; tables are CSV.  Exit codes: 0 all asserted properties hold, 1 a property
failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from importlib import metadata
from pathlib import Path

from . import equidist, family, rearrange, residues, spacing, verify
from .periodic import CapExceeded
from .serialize import canonical_json, config_hash, load_family, save_family

ENV_CONFIG = "BADSEQ_CONFIG"


class ConfigError(ValueError):
    pass


def _int(v: str) -> int:
    return int(v.strip())


def _frac(v: str) -> Fraction:
    return Fraction(v.strip())


def _ints(v: str) -> tuple:
    return tuple(int(x) for x in v.replace(" ", "").split(",") if x)


def _fracs(v: str) -> tuple:
    return tuple(Fraction(x) for x in v.replace(" ", "").split(",") if x)


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _str(v: str) -> str:
    return v.strip()


# key -> (parser, default, help)
KEYS = {
    "sequence": (_str, "power", "power or prime"),
    "d": (_int, 2, "exponent of the power sequence"),
    "t": (_ints, (65,), "moduli for residues"),
    "q_chain": (_ints, (65, 1105, 32045), "moduli for spacing"),
    "thetas": (_fracs, spacing.DEFAULT_THETAS, "θ grid for spacing"),
    "Q": (_ints, (15,), "moduli for equidist"),
    "H": (_int, 100_000, "scan horizon"),
    "T": (_int, 3, "period for rearrange"),
    "p": (_int, 101, "prime for rearrange"),
    "K": (_int, 1, "number of functions"),
    "M": (_int, 2, "number of levels"),
    "gamma": (_frac, Fraction(1, 4), "dyadic γ"),
    "alpha": (_frac, Fraction(1, 32), "dyadic α"),
    "beta": (_frac, Fraction(2, 5), "equidistribution constant β"),
    "delta": (_frac, Fraction(1, 4), "exceptional-set budget δ"),
    "A": (_frac, Fraction(1), "locality scale A"),
    "D": (_int, 1, "odd integer D"),
    "C": (_frac, Fraction(2), "demo constant C"),
    "S": (_str, "all", "S rule: all or pow2"),
    "p_pool": (_ints, (), "primes for the p choices"),
    "q_pool": (_ints, (), "moduli for the q choices"),
    "seed": (_int, 0, "random seed"),
    "omega_budget": (_int, 200, "shift vectors to try per p"),
    "size_rule": (_str, "min_r", "min_r or minimal"),
    "synthetic": (_bool, False, "synthetic inner ingredients for K >= 2"),
    "T_cap": (_int, 10_000_000, "cap on T"),
    "cap": (_int, 100_000_000, "enumeration cap"),
    "family": (_str, "", "family file"),
    "restrict_q": (_int, 0, "fresh q for a restriction check (0: none)"),
    "restrict_B": (_int, 1, "B for the restriction check"),
    "sample_size": (_int, 2000, "sample size"),
    "N_cap": (_int, 2000, "largest N in the sampled sup"),
    "out": (_str, "", "output directory (default: stdout only)"),
}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            out[key] = KEYS[key][0](val)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    return out


@dataclass
class RunConfig:
    values: dict

    def __getattr__(self, key):
        try:
            return self.values[key]
        except KeyError:
            raise AttributeError(key) from None

    @property
    def seq(self) -> residues.SequenceSpec:
        return residues.SequenceSpec(self.sequence, self.d)

    def params(self) -> family.StepParams:
        return family.StepParams(K=self.K, M=self.M, L=self.M, gamma=self.gamma, alpha=self.alpha,
                                 beta=self.beta, delta=self.delta, A=self.A, D=self.D, C=self.C,
                                 S=self.S)

    def build_config(self) -> family.BuildConfig:
        return family.BuildConfig(seq=self.seq, p_pool=self.p_pool, q_pool=self.q_pool,
                                  seed=self.seed, T_cap=self.T_cap, cap=self.cap,
                                  omega_budget=self.omega_budget, size_rule=self.size_rule,
                                  H=self.H, synthetic=self.synthetic)

    def as_dict(self) -> dict:
        return dict(self.values)


def validate(cfg: RunConfig) -> None:
    """Module preconditions that can be checked before running anything."""
    try:
        seq = cfg.seq
    except ValueError as exc:
        raise ConfigError(f"sequence: {exc}") from None
    del seq
    if cfg.size_rule not in ("min_r", "minimal"):
        raise ConfigError(f"size_rule: unknown rule {cfg.size_rule!r}")
    if cfg.S not in ("all", "pow2"):
        raise ConfigError(f"S: unknown rule {cfg.S!r}")
    for key in ("t", "q_chain", "Q"):
        bad = [v for v in cfg.values[key] if v < 2]
        if bad:
            raise ConfigError(f"{key}: moduli must be at least 2, got {bad}")
    for key in ("H", "sample_size", "N_cap", "cap", "T_cap", "omega_budget"):
        if cfg.values[key] < 1:
            raise ConfigError(f"{key}: must be positive")
    try:
        cfg.params()
    except ValueError as exc:
        raise ConfigError(f"parameters: {exc}") from None
    if cfg.p_pool or cfg.q_pool:
        try:
            residues.QsetCatalog.for_sequence(cfg.seq, cfg.p_pool, cfg.q_pool)
        except ValueError as exc:
            raise ConfigError(f"pools: {exc}") from None


def load_config(args) -> RunConfig:
    values = {k: v[1] for k, v in KEYS.items()}
    path = args.config or os.environ.get(ENV_CONFIG)
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {path!r} not found")
        values.update(parse_config_text(p.read_text(encoding="utf-8"), str(p)))
    for key, (conv, _, _) in KEYS.items():
        raw = getattr(args, key, None)
        if raw is not None:
            try:
                values[key] = conv(raw)
            except (ValueError, ZeroDivisionError) as exc:
                raise ConfigError(f"--{key}: {exc}") from None
    if getattr(args, "primes", False):
        values["sequence"] = "prime"
    cfg = RunConfig(values)
    validate(cfg)
    return cfg


def _version() -> str:
    try:
        return metadata.version("badseq")
    except metadata.PackageNotFoundError:
        return "unknown"


def _emit(cfg: RunConfig, command: str, passed: bool, result: dict, tables: dict | None = None) -> int:
    report = {"command": command, "passed": passed, "config": cfg.as_dict(),
              "config_hash": config_hash(cfg.as_dict()),
              "provenance": {"package": "badseq", "version": _version()}, "result": result}
    text = canonical_json(report, indent=2) + "\n"
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{command}.json").write_text(text, encoding="utf-8")
        for name, body in (tables or {}).items():
            (out / name).write_text(body, encoding="utf-8")
        sys.stdout.write(canonical_json({"command": command, "passed": passed,
                                         "report": str(out / f"{command}.json")}, indent=2) + "\n")
    else:
        sys.stdout.write(text)
    return 0 if passed else 1


# ---------------------------------------------------------------------------------------------
# subcommands


def cmd_residues(cfg: RunConfig) -> int:
    rows, ok = [], True
    for t in cfg.t:
        lam = residues.admissible_residues(cfg.seq, t)
        # rebuild from the prime-power factors and compare
        parts = [f ** _multiplicity(t, f) for f in residues.prime_factors(t)]
        acc = residues.admissible_residues(cfg.seq, parts[0])
        for m in parts[1:]:
            acc = residues.combine_crt(acc, residues.admissible_residues(cfg.seq, m))
        crt_ok = acc == lam
        ok &= crt_ok
        rows.append({"t": t, "size": len(lam), "density": str(lam.density),
                     "elements": lam.elements.tolist() if len(lam) <= 10_000 else None,
                     "crt_factors": parts, "crt_agrees": crt_ok})
    csv = "t,size,density\n" + "".join(f"{r['t']},{r['size']},{r['density']}\n" for r in rows)
    return _emit(cfg, "residues", ok, {"sequence": cfg.seq.label(), "tables": rows},
                 {"residues.csv": csv})


def _multiplicity(n: int, f: int) -> int:
    k = 0
    while n % f == 0:
        n //= f
        k += 1
    return k


def cmd_spacing(cfg: RunConfig) -> int:
    rows, csv, ok = [], ["q,theta,F,F_float,exp_neg_theta"], True
    devs = []
    for q in cfg.q_chain:
        lam = residues.admissible_residues(cfg.seq, q)
        prof = spacing.SpacingProfile(lam)
        lhs, rhs = spacing.thickened_measure_identity(lam, cfg.gamma)
        ok &= lhs == rhs
        dev = spacing.sup_deviation(prof, cfg.thetas)
        devs.append(dev)
        for line in spacing.cdf_csv(prof, cfg.thetas).splitlines()[1:]:
            csv.append(f"{q},{line}")
        rows.append({"q": q, "size": len(lam), "thickening": [lhs, rhs],
                     "sup_deviation": dev,
                     "wine_epsilon": str(spacing.condition_wine_epsilon(lam, cfg.gamma))})
    trend = all(b <= a for a, b in zip(devs, devs[1:]))
    return _emit(cfg, "spacing", ok, {"chain": rows, "deviation_nonincreasing": trend},
                 {"spacing.csv": "\n".join(csv) + "\n"})


def cmd_equidist(cfg: RunConfig) -> int:
    rows, ok = [], True
    for Q in cfg.Q:
        s1 = equidist.scan(cfg.seq, Q, cfg.beta, cfg.H)
        s2 = equidist.scan(cfg.seq, Q, cfg.beta, 2 * cfg.H)
        stable = s1.stabilized and s1.empirical_N == s2.empirical_N
        ok &= stable
        rows.append({**s1.as_dict(), "empirical_N_doubled": s2.empirical_N, "stable": stable})
    csv = "Q,empirical_N,empirical_N_doubled,stable\n" + "".join(
        f"{r['Q']},{r['empirical_N']},{r['empirical_N_doubled']},{r['stable']}\n" for r in rows)
    return _emit(cfg, "equidist", ok, {"scans": rows}, {"equidist.csv": csv})


def cmd_rearrange(cfg: RunConfig) -> int:
    lam = residues.admissible_residues(cfg.seq, cfg.p * cfg.T)
    try:
        plan = rearrange.find_good_omega(cfg.T, cfg.p, lam, seed=cfg.seed, budget=cfg.omega_budget)
    except rearrange.OmegaSearchFailed as exc:
        return _emit(cfg, "rearrange", False, {"error": str(exc), "stats": exc.stats})
    margin, where = rearrange.omega_margin(plan, lam)
    return _emit(cfg, "rearrange", True, {"plan": {"T": plan.T, "p": plan.p, "shifts": list(plan.shifts)},
                                          "margin": str(margin), "worst": list(where),
                                          "lambda_size": len(lam)})


def cmd_build(cfg: RunConfig) -> int:
    try:
        fam = family.build_family(cfg.K, cfg.M, cfg.params(), cfg.build_config())
    except (family.PoolExhausted, family.StepFailed, CapExceeded, rearrange.OmegaSearchFailed) as exc:
        info = {"error": f"{type(exc).__name__}: {exc}"}
        for attr in ("trace", "diagnostics", "stats"):
            if hasattr(exc, attr):
                info[attr] = getattr(exc, attr)
        return _emit(cfg, "build-family", False, info)
    problems = fam.structure_problems()
    steps = [e for e in fam.log if e.get("step") == "inductive"]
    bad_steps = [{"K": e["K"], "L": e["L"], "failed": k} for e in steps
                 for k, v in e["invariants"].items()
                 if not v and k not in family.PartitionSets.INFORMATIONAL]
    ok = not problems and not bad_steps
    result = {"summary": fam.summary(), "structure_problems": problems, "failed_invariants": bad_steps,
              "log": fam.log}
    if cfg.out:
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        path = Path(cfg.out) / "family.json"
        save_family(fam, path)
        result["family_file"] = str(path)
    return _emit(cfg, "build-family", ok, result)


def _need_family(cfg: RunConfig):
    if not cfg.family:
        raise ConfigError("a family file is required (--family or 'family = ...')")
    if not Path(cfg.family).is_file():
        raise ConfigError(f"family file {cfg.family!r} not found")
    try:
        return load_family(cfg.family)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read family file: {exc}") from None


def cmd_verify(cfg: RunConfig) -> int:
    fam = _need_family(cfg)
    rep = verify.verify_family(fam, cap=cfg.cap)
    result = {"family": rep.as_dict()}
    ok = rep.passed
    if cfg.restrict_q:
        try:
            bar = family.restrict_family(fam, cfg.restrict_q, cfg.restrict_B,
                                         enforce_A=cfg.restrict_q * cfg.restrict_B <= fam.params.A)
        except ValueError as exc:
            raise ConfigError(f"restrict_q: {exc}") from None
        rr = verify.verify_restricted(bar, fam, sample_size=cfg.sample_size, seed=cfg.seed, cap=cfg.cap)
        result["restricted"] = rr.as_dict()
        ok &= rr.passed
    for name in rep.failures():
        w = rep.get(name).witness
        sys.stderr.write(f"FAILED {name}: {canonical_json(w)}\n")
    return _emit(cfg, "verify-family", ok, result)


def cmd_demo(cfg: RunConfig) -> int:
    fam = _need_family(cfg)
    rep = verify.demo_maximal(fam, S=equidist.SRule(cfg.S), beta=cfg.beta,
                              sample_size=cfg.sample_size, N_cap=cfg.N_cap, seed=cfg.seed, cap=cfg.cap)
    return _emit(cfg, "demo-maximal", rep.passed, rep.as_dict(), {"demo-maximal.csv": rep.csv()})


COMMANDS = {
    "residues": (cmd_residues, "Λ_t tables with CRT cross-checks", ("t",)),
    "spacing": (cmd_spacing, "gap statistics along a q chain", ("q_chain", "thetas", "gamma")),
    "equidist": (cmd_equidist, "empirical N(Q) scans", ("Q", "beta", "H")),
    "rearrange": (cmd_rearrange, "certified block-shift search", ("T", "p", "seed", "omega_budget")),
    "build-family": (cmd_build, "build a (K, M, M) family", None),
    "verify-family": (cmd_verify, "check a family file", ("family", "restrict_q", "restrict_B", "cap",
                                                          "sample_size", "seed")),
    "demo-maximal": (cmd_demo, "maximal-function demonstrator", ("family", "S", "beta", "sample_size",
                                                                 "N_cap", "seed", "cap")),
}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="badseq", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_text, keys) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help=f"key = value file (default: ${ENV_CONFIG})")
        sp.add_argument("--primes", action="store_true", help="use the primes instead of k^d")
        shown = KEYS if keys is None else {k: KEYS[k] for k in ("sequence", "d", "out") + tuple(keys)}
        for key, (_, default, text) in shown.items():
            sp.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None,
                            help=f"{text} (default {_show(default)})")
    return ap


def _show(v) -> str:
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v) or "none"
    return str(v)


def main(argv=None) -> int:
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = load_config(args)
        return COMMANDS[args.command][0](cfg)
    except ConfigError as exc:
        sys.stderr.write(f"badseq {args.command}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
