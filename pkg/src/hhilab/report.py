"""Run reports: line-delimited JSON for machines, aligned text for people.

The machine report is byte-stable for a fixed config on a fixed platform:
keys are sorted, floats use 17 significant digits and wall times are kept
out of it (they go to a separate ``timings.json``).
"""
from __future__ import annotations

import json
import math
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__


def _float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    s = format(x, ".17g")
    # keep a marker that this is a float
    if all(c not in s for c in ".eE"):
        s += ".0"
    return s


def dumps(obj) -> str:
    """Compact JSON with sorted keys and 17-digit floats."""
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=True)
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ",".join(f"{dumps(k)}:{dumps(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def environment() -> dict:
    return {
        "hhilab": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "platform": sys.platform,
        "machine": platform.machine(),
    }


@dataclass
class Report:
    config: dict
    results: list
    environment: dict = field(default_factory=environment)
    label: str = ""
    extra: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def lines(self) -> list:
        out = [{"kind": "header", "label": self.label, "config": self.config, "environment": self.environment}]
        out += [{"kind": "check", **r.to_dict()} for r in self.results]
        out += [{"kind": "extra", **e} for e in self.extra]
        out.append({
            "kind": "summary",
            "passed": self.passed,
            "failed": [r.name for r in self.results if not r.passed],
        })
        return out

    def to_jsonl(self) -> str:
        return "".join(dumps(line) + "\n" for line in self.lines())

    def to_human(self) -> str:
        rows = []
        title = f"hhilab report {self.label}".rstrip()
        rows.append(title)
        rows.append("=" * len(title))
        for r in self.results:
            rows.append(f"[{r.status.upper():>10}] {r.name}")
            for rec in r.records:
                mark = "ok " if rec.passed else "BAD"
                rows.append(f"    {mark} {rec.quantity}: {rec.value:.6g} {rec.comparator} {rec.tolerance:.6g}")
            if r.error:
                rows.append(f"    error: {r.error}")
        for e in self.extra:
            rows.append(f"[     EXTRA] {e.get('name', '')}: {dumps(e.get('data'))}")
        rows.append("")
        rows.append("ALL PASSED" if self.passed else "FAILED: " + ", ".join(r.name for r in self.results if not r.passed))
        return "\n".join(rows) + "\n"

    def timings(self) -> dict:
        return {r.name: r.wall_time for r in self.results}


def emit_report(report: Report, out_dir, fmt: str = "jsonl", stem: str = "report") -> list:
    """Write the report files and return their paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        if fmt in ("jsonl", "both"):
            p = out / f"{stem}.jsonl"
            p.write_text(report.to_jsonl(), encoding="utf-8")
            paths.append(p)
        if fmt in ("human", "both"):
            p = out / f"{stem}.txt"
            p.write_text(report.to_human(), encoding="utf-8")
            paths.append(p)
        p = out / f"{stem}.timings.json"
        p.write_text(dumps(report.timings()) + "\n", encoding="utf-8")
        paths.append(p)
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc.strerror or exc}") from exc
    return paths
