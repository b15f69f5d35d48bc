"""Importance-score files: {"scores": [{"id", "name", "importance", "reason"}, ...]}.

The layout matches what a language model is asked to return, so its raw
output can be ingested unchanged. Records are aligned to a dataset by
feature name.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import as_weights
from .errors import (
    ConfigError,
    DimensionMismatch,
    MissingFeature,
    ParseError,
    RangeViolation,
)


@dataclass(frozen=True)
class ScoreRecord:
    id: int | str
    name: str
    importance: float
    reason: str = ""

    def to_dict(self) -> dict:
        imp = self.importance
        if float(imp).is_integer():
            imp = int(imp)
        return {"id": self.id, "name": self.name, "importance": imp, "reason": self.reason}


@dataclass
class IngestResult:
    weights: np.ndarray
    unmatched_features: list[str] = field(default_factory=list)
    unmatched_records: list[str] = field(default_factory=list)


def _number(v, rid, integer: bool) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"record {rid}: importance must be a number, got {v!r}",
                         field="importance", record=rid)
    if not math.isfinite(v):
        raise ParseError(f"record {rid}: importance is not finite", field="importance", record=rid)
    if integer and not float(v).is_integer():
        raise ParseError(f"record {rid}: importance must be an integer, got {v!r}",
                         field="importance", record=rid)
    return float(v)


def parse_scores(doc, declared_range=(1, 5), integer: bool = True) -> list[ScoreRecord]:
    """Validate a decoded scores document and return its records."""
    if not isinstance(doc, dict) or not isinstance(doc.get("scores"), list):
        raise ParseError('expected an object with a "scores" list', field="scores")
    lo, hi = declared_range
    records, ids, names = [], set(), set()
    for pos, item in enumerate(doc["scores"]):
        if not isinstance(item, dict):
            raise ParseError(f"scores[{pos}] is not an object", field=f"scores[{pos}]")
        missing = [k for k in ("id", "name", "importance") if k not in item]
        if missing:
            raise ParseError(f"scores[{pos}] lacks {missing}", field=f"scores[{pos}].{missing[0]}")
        rid, name = item["id"], item["name"]
        if isinstance(rid, bool) or not isinstance(rid, (int, str)):
            raise ParseError(f"scores[{pos}].id must be a string or integer", field=f"scores[{pos}].id")
        if not isinstance(name, str):
            raise ParseError(f"scores[{pos}].name must be a string", field=f"scores[{pos}].name")
        if rid in ids:
            raise ParseError(f"duplicate id {rid!r}", field="id", record=rid)
        if name in names:
            raise ParseError(f"duplicate name {name!r}", field="name", record=rid)
        ids.add(rid)
        names.add(name)
        imp = _number(item["importance"], rid, integer)
        if not lo <= imp <= hi:
            raise RangeViolation(f"record {rid!r}: importance {imp:g} outside {lo}..{hi}",
                                 field="importance", record=rid)
        records.append(ScoreRecord(rid, name, imp, str(item.get("reason", ""))))
    return records


def read_scores(path, declared_range=(1, 5), integer: bool = True) -> list[ScoreRecord]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})", field="scores") from None
    return parse_scores(doc, declared_range, integer)


def ingest_scores(path, feature_names, declared_range=(1, 5), fill_missing: bool = False,
                  by_order: bool = False, integer: bool = True) -> IngestResult:
    """Align a scores file to ``feature_names`` and return the weight vector.

    Matching is by exact name unless ``by_order`` is set, in which case the
    i-th record scores the i-th feature. A feature without a score is an
    error unless ``fill_missing`` is set, which gives it the range minimum.
    """
    records = read_scores(path, declared_range, integer)
    names = list(feature_names)
    if by_order:
        if len(records) != len(names):
            raise DimensionMismatch(f"{len(records)} scores for {len(names)} features", field="scores")
        return IngestResult(np.array([r.importance for r in records]))
    by_name = {r.name: r for r in records}
    missing = [n for n in names if n not in by_name]
    extra = sorted(set(by_name) - set(names))
    if missing and not fill_missing:
        raise MissingFeature(f"no score for features {missing[:5]}{'...' if len(missing) > 5 else ''}",
                             field="scores", features=missing)
    if missing:
        warnings.warn(f"{len(missing)} features without a score set to {declared_range[0]}", stacklevel=2)
    if extra:
        warnings.warn(f"{len(extra)} scored names not in the dataset: {extra[:5]}", stacklevel=2)
    w = np.array([by_name[n].importance if n in by_name else float(declared_range[0]) for n in names])
    return IngestResult(as_weights(w), missing, extra)


def scores_document(w, feature_names=None, reasons=None) -> dict:
    w = as_weights(w)
    names = list(feature_names) if feature_names is not None else [f"x{j + 1}" for j in range(w.size)]
    if len(names) != w.size:
        raise DimensionMismatch(f"{len(names)} names for {w.size} weights", field="feature_names")
    reasons = list(reasons) if reasons is not None else [""] * w.size
    return {"scores": [ScoreRecord(j, names[j], float(w[j]), reasons[j]).to_dict() for j in range(w.size)]}


def write_scores(path, w, feature_names=None, reasons=None) -> None:
    text = json.dumps(scores_document(w, feature_names, reasons), indent=1)
    Path(path).write_text(text + "\n")


def aggregate_weight_draws(vectors, mode: str = "mean") -> np.ndarray:
    """Elementwise mean or median of several weight vectors for the same features."""
    vs = [as_weights(v) for v in vectors]
    if not vs:
        raise DimensionMismatch("need at least one weight vector", field="vectors")
    if len({v.size for v in vs}) != 1:
        raise DimensionMismatch(f"weight vectors differ in length: {sorted({v.size for v in vs})}",
                                field="vectors")
    stack = np.vstack(vs)
    if mode == "mean":
        return stack.mean(axis=0)
    if mode == "median":
        return np.median(stack, axis=0)
    raise ConfigError(f"mode must be mean or median, got {mode!r}", field="mode")
