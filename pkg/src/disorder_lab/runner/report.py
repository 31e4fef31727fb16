"""Experiment records and their CSV / JSON serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

CSV_HEADER = ("label", "estimate", "std_error", "target", "z_score", "pass")


def fmt(x):
    """17 significant digits; integral floats keep a trailing '.0'."""
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, ".17g")
    return s if any(c in s for c in ".en") else s + ".0"


@dataclass(frozen=True)
class Record:
    """One checked quantity.

    ``rule`` names the pass criterion: ``"z"`` (|z| <= 3), ``"abs"``
    (|estimate - target| <= tolerance), ``"rel"`` (relative deviation <=
    tolerance), ``"range"`` (lo <= estimate <= hi), ``"max"`` (estimate <=
    target), ``"lt"`` (estimate < target) or ``"info"`` (reported only).
    """

    label: str
    estimate: float
    std_error: float
    target: float
    z_score: float
    passed: bool
    rule: str = "z"
    tolerance: tuple = ()


def _z(estimate, std_error, target):
    if math.isnan(target):
        return math.nan
    if std_error > 0:
        return (estimate - target) / std_error
    return 0.0 if estimate == target else math.copysign(math.inf, estimate - target)


def z_record(label, estimate, std_error, target, limit=3.0):
    z = _z(estimate, std_error, target)
    return Record(label, float(estimate), float(std_error), float(target), float(z), bool(abs(z) <= limit),
                  "z", (float(limit),))


def abs_record(label, estimate, target, tol, std_error=math.nan):
    z = _z(estimate, std_error, target) if std_error == std_error else math.nan
    ok = abs(estimate - target) <= tol
    return Record(label, float(estimate), float(std_error), float(target), float(z), bool(ok), "abs", (float(tol),))


def rel_record(label, estimate, target, tol, std_error=math.nan):
    z = _z(estimate, std_error, target) if std_error == std_error else math.nan
    ok = abs(estimate - target) <= tol * abs(target)
    return Record(label, float(estimate), float(std_error), float(target), float(z), bool(ok), "rel", (float(tol),))


def range_record(label, estimate, lo, hi, std_error=math.nan):
    ok = lo <= estimate <= hi
    return Record(label, float(estimate), float(std_error), math.nan, math.nan, bool(ok), "range",
                  (float(lo), float(hi)))


def max_record(label, estimate, bound, std_error=math.nan):
    return Record(label, float(estimate), float(std_error), float(bound), math.nan, bool(estimate <= bound), "max",
                  (float(bound),))


def lt_record(label, estimate, bound, std_error=math.nan):
    return Record(label, float(estimate), float(std_error), float(bound), math.nan, bool(estimate < bound), "lt",
                  (float(bound),))


def info_record(label, estimate, std_error=math.nan, target=math.nan):
    return Record(label, float(estimate), float(std_error), float(target), _z(estimate, std_error, target)
                  if std_error == std_error else math.nan, True, "info")


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    records: list = field(default_factory=list)
    runtime_seconds: float = 0.0
    metadata: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    code_version: str = ""

    @property
    def passed(self):
        return all(r.passed for r in self.records)

    def to_dict(self, runtime=True):
        d = {
            "experiment": self.experiment,
            "code_version": self.code_version,
            "config": self.config,
            "records": [
                {
                    "label": r.label, "estimate": r.estimate, "std_error": r.std_error, "target": r.target,
                    "z_score": r.z_score, "pass": r.passed, "rule": r.rule, "tolerance": list(r.tolerance),
                }
                for r in self.records
            ],
            "metadata": self.metadata,
            "warnings": list(self.warnings),
        }
        if runtime:
            d["runtime_seconds"] = self.runtime_seconds
        return d

    @classmethod
    def from_dict(cls, d):
        records = [
            Record(r["label"], r["estimate"], r["std_error"], r["target"], r["z_score"], r["pass"], r["rule"],
                   tuple(r["tolerance"]))
            for r in d["records"]
        ]
        return cls(d["experiment"], d["config"], records, d.get("runtime_seconds", 0.0), d["metadata"],
                   list(d["warnings"]), d["code_version"])


def _dump(obj):
    # json.dumps would use repr() for floats; the report format asks for .17g
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return fmt(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_dump(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_dump(v) for v in obj) + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return _dump(obj.item())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def emit_report(report, format="json", runtime=True):
    """Serialize a report to bytes (CSV records table or one JSON document)."""
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in report.records:
            w.writerow([r.label, fmt(r.estimate), fmt(r.std_error), fmt(r.target), fmt(r.z_score),
                        "true" if r.passed else "false"])
        return buf.getvalue().encode()
    if format == "json":
        return (_dump(report.to_dict(runtime)) + "\n").encode()
    raise ValueError(f"unknown format {format!r}")


def parse_report(data):
    """Inverse of the JSON form of :func:`emit_report`."""
    return ExperimentReport.from_dict(json.loads(data))


def write_report(report, path, format="json"):
    data = emit_report(report, format)
    with open(path, "wb") as fh:
        fh.write(data)
    return data
