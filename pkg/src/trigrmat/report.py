"""Check results and their deterministic JSON form.

Every verification routine returns CheckResult values.  Rationals are
serialized as decimal strings so reports are bit-exact across platforms;
timing lives in a separate field that comparisons ignore.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

SCHEMA = "trigrmat-report/1"

__all__ = ["CheckResult", "SCHEMA", "rational_record", "report_to_json"]


def rational_record(x):
    x = Fraction(x)
    return {"num": str(x.numerator), "den": str(x.denominator)}


@dataclass
class CheckResult:
    check_id: str
    params: dict
    status: str  # "pass" | "fail" | "error"
    witness: dict | None = None
    seconds: float = 0.0
    detail: str = ""

    @property
    def passed(self):
        return self.status == "pass"

    def as_dict(self, with_timing=True):
        out = {
            "id": self.check_id,
            "params": _stable(self.params),
            "status": self.status,
            "witness": _stable(self.witness) if self.witness else None,
            "detail": self.detail,
        }
        if with_timing:
            out["seconds"] = round(self.seconds, 6)
        return out


def _stable(obj):
    if isinstance(obj, dict):
        return {k: _stable(obj[k]) for k in sorted(obj)}
    if isinstance(obj, (list, tuple)):
        return [_stable(v) for v in obj]
    if isinstance(obj, Fraction):
        return rational_record(obj)
    return obj


def coefficient_witness(s, l, left, right, row=None, col=None):
    w = {
        "s": s,
        "l": l,
        "left": rational_record(left),
        "right": rational_record(right),
    }
    if row is not None:
        w["row"] = list(row)
    if col is not None:
        w["col"] = list(col)
    return w


def report_to_json(results, with_timing=True):
    body = {
        "schema": SCHEMA,
        "checks": [r.as_dict(with_timing) for r in results],
    }
    return json.dumps(body, indent=2, sort_keys=True) + "\n"
