"""JSON containers for families and reports.

Arrays are stored as zlib-compressed base64 blobs tagged with dtype and shape, fractions
as strings.  Output is canonical (sorted keys, fixed separators), so identical inputs
give byte-identical files.
"""

from __future__ import annotations

import base64
import hashlib
import json
import zlib
from fractions import Fraction

import numpy as np

from .family import Family, StepParams
from .periodic import from_spec
from .residues import QsetCatalog, SequenceSpec

FORMAT = "badseq-family/1"


def encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a)
    if a.dtype == bool:
        a = a.astype(np.uint8)
        kind = "bool"
    else:
        a = a.astype("<i8")
        kind = "int64"
    return {"__array__": kind, "shape": list(a.shape),
            "data": base64.b64encode(zlib.compress(a.tobytes(), 6)).decode("ascii")}


def decode_array(d: dict) -> np.ndarray:
    raw = zlib.decompress(base64.b64decode(d["data"]))
    if d["__array__"] == "bool":
        return np.frombuffer(raw, dtype=np.uint8).reshape(d["shape"]).astype(bool)
    return np.frombuffer(raw, dtype="<i8").reshape(d["shape"]).astype(np.int64)


def to_jsonable(obj):
    """Recursively turn arrays, fractions and numpy scalars into JSON values."""
    if isinstance(obj, np.ndarray):
        return encode_array(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def from_jsonable(obj):
    if isinstance(obj, dict):
        if "__array__" in obj:
            return decode_array(obj)
        return {k: from_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [from_jsonable(v) for v in obj]
    return obj


def canonical_json(obj, indent: int | None = None) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=indent,
                      separators=(",", ": ") if indent else (",", ":"), ensure_ascii=False)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def family_to_dict(fam: Family) -> dict:
    return {
        "format": FORMAT,
        "params": fam.params.as_dict(),
        "T": fam.T, "R": fam.R,
        "f": [fh.to_spec() for fh in fam.f],
        "X": [xh.to_spec() for xh in fam.X],
        "E": fam.E.to_spec(),
        "Q": fam.Q.to_spec(),
        "sequence": {"kind": fam.seq.kind, "d": fam.seq.d},
        "catalog": None if fam.catalog is None else
        {"p_pool": list(fam.catalog.p_pool), "q_pool": list(fam.catalog.q_pool)},
        "eps": str(fam.eps),
        "log": fam.log,
        "restricted": fam.restricted,
    }


def family_from_dict(d: dict) -> Family:
    if d.get("format") != FORMAT:
        raise ValueError(f"not a family container (format {d.get('format')!r})")
    d = from_jsonable(d)
    seq = SequenceSpec(d["sequence"]["kind"], int(d["sequence"]["d"]))
    cat = d.get("catalog")
    catalog = None if cat is None else QsetCatalog.for_sequence(seq, cat["p_pool"], cat["q_pool"])
    return Family(StepParams.from_dict(d["params"]), int(d["T"]), int(d["R"]),
                  [from_spec(s) for s in d["f"]], [from_spec(s) for s in d["X"]],
                  from_spec(d["E"]), from_spec(d["Q"]).dense(), seq, catalog,
                  Fraction(d["eps"]), list(d["log"]), d.get("restricted"))


def save_family(fam: Family, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(family_to_dict(fam)))
        fh.write("\n")


def load_family(path) -> Family:
    with open(path, encoding="utf-8") as fh:
        return family_from_dict(json.load(fh))
