"""JSON (de)serialization for weights, bases and measures."""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .weights import (
    AffineMap,
    AffinePullback,
    BasisSpec,
    ExpDecay,
    Gaussian,
    Indicator,
    PointwiseMin,
    Profile1D,
    Radial,
    RepLog,
    RhoForm,
    Sampled,
    Scale,
    Sum,
    Table,
    Tensor,
    WeightExpr,
)

__all__ = ["SpecError", "parse_spec", "parse_profile", "serialize", "dumps",
           "parse_basis", "load_json"]


class SpecError(ValueError):
    """The document does not describe a valid weight, profile, basis or measure."""


def _require(d: dict, *keys):
    missing = [k for k in keys if k not in d]
    if missing:
        raise SpecError(f"missing field(s) {missing} in {sorted(d)}")


def _number(d, key, default=None):
    if key not in d:
        if default is None:
            raise SpecError(f"missing field {key!r}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SpecError(f"field {key!r} must be a number")
    return float(v)


def _numbers(d, key):
    if key not in d or not isinstance(d[key], list):
        raise SpecError(f"field {key!r} must be a list of numbers")
    try:
        return tuple(float(x) for x in d[key])
    except (TypeError, ValueError) as exc:
        raise SpecError(f"field {key!r} must be a list of numbers") from exc


def parse_profile(d: dict) -> Profile1D:
    if not isinstance(d, dict) or "family" not in d:
        raise SpecError("profile must be an object with a 'family' field")
    fam = d["family"]
    try:
        if fam == "expdecay":
            return ExpDecay(C=_number(d, "C", 1.0), eps=_number(d, "eps"))
        if fam == "gaussian":
            return Gaussian(C=_number(d, "C", 1.0), sigma=_number(d, "sigma", 1.0))
        if fam == "replog":
            a, p = _numbers(d, "a"), _numbers(d, "p")
            if "order" in d:
                k = int(d["order"])
                if k < 0 or any(x != 0.0 for x in p[k + 1:]):
                    raise SpecError("replog p-list has nonzero entries above the stated order")
            if len(a) != len(p):
                raise SpecError("replog a and p lists must have equal length")
            return RepLog(C=_number(d, "C", 1.0), a=a, p=p)
        if fam == "rhoform":
            return RhoForm(w_R=_number(d, "wR"), R=_number(d, "R"),
                           s=_numbers(d, "s"), rho=_numbers(d, "rho"))
        if fam == "indicator":
            return Indicator(radius=_number(d, "radius"))
        if fam == "sampled":
            return Sampled(_numbers(d, "grid"), _numbers(d, "values"),
                           extrapolation=d.get("extrapolation", "zero"),
                           even=bool(d.get("even", False)),
                           interp=d.get("interp", "linear"))
        if fam == "tangentialized":
            from .pathology import SequenceProfile

            return SequenceProfile(int(_number(d, "k")), int(_number(d, "index")),
                                   int(_number(d, "N1", 4.0)))
    except SpecError:
        raise
    except ValueError as exc:
        raise SpecError(f"invalid {fam} parameters: {exc}") from exc
    raise SpecError(f"unknown profile family {fam!r}")


def parse_spec(doc: str | dict) -> WeightExpr:
    """Build a :class:`WeightExpr` from JSON text or an already-decoded dict."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise SpecError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "kind" not in doc:
        raise SpecError("weight spec must be an object with a 'kind' field")
    kind = doc["kind"]
    try:
        if kind == "radial":
            _require(doc, "profile")
            return Radial(parse_profile(doc["profile"]), int(doc.get("dimension", 1)))
        if kind == "tensor":
            _require(doc, "factors")
            return Tensor(tuple(parse_profile(f) for f in doc["factors"]))
        if kind == "affine":
            _require(doc, "linear", "inner")
            inner = parse_spec(doc["inner"])
            L = np.asarray(doc["linear"], dtype=float)
            b = np.asarray(doc.get("translation", [0.0] * inner.dimension), dtype=float)
            return AffinePullback(AffineMap(L, b), inner)
        if kind == "scale":
            _require(doc, "c", "inner")
            return Scale(_number(doc, "c"), parse_spec(doc["inner"]))
        if kind in ("min", "sum"):
            _require(doc, "lhs", "rhs")
            node = PointwiseMin if kind == "min" else Sum
            return node(parse_spec(doc["lhs"]), parse_spec(doc["rhs"]))
        if kind == "table":
            return Table(Sampled(_numbers(doc, "grid"), _numbers(doc, "values"),
                                 extrapolation=doc.get("extrapolation", "zero")))
    except SpecError:
        raise
    except ValueError as exc:
        raise SpecError(f"invalid {kind} node: {exc}") from exc
    raise SpecError(f"unknown weight kind {kind!r}")


def serialize(w: WeightExpr) -> dict:
    return w.to_dict()


def dumps(obj: Any) -> str:
    """Deterministic JSON text (sorted keys, repr-exact floats)."""
    return json.dumps(_finite(obj), sort_keys=True, indent=2, allow_nan=False, default=_default)


def _finite(o):
    """Replace non-finite floats by the strings ``"inf"``, ``"-inf"``, ``"nan"``."""
    if isinstance(o, dict):
        return {k: _finite(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite(v) for v in o]
    if isinstance(o, np.ndarray):
        return _finite(o.tolist())
    if isinstance(o, (float, np.floating)) and not math.isfinite(o):
        return "nan" if o != o else ("inf" if o > 0 else "-inf")
    return o


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def parse_basis(doc: str | dict | list) -> BasisSpec:
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    vectors = doc.get("vectors") if isinstance(doc, dict) else doc
    if not isinstance(vectors, list):
        raise SpecError("basis must be a list of vectors or {'vectors': [...]}")
    try:
        return BasisSpec(np.asarray(vectors, dtype=float))
    except ValueError as exc:
        raise SpecError(f"invalid basis: {exc}") from exc


def load_json(path) -> Any:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}: not valid JSON: {exc}") from exc
