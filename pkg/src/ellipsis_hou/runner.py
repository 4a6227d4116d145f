"""Running problem files and comparing readings with expectations."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .dsl import ProblemFile, parse_problem
from .ellipsis import solve_report
from .errors import BudgetExhausted, EllipsisError
from .render import render
from .scope import enumerate_derivations
from .terms import alpha_key, normalize
from .unify import SearchBudget

PROBLEM_SUFFIX = ".ell"


@dataclass
class RunReport:
    problem: str
    title: str = ""
    linking: bool = False
    readings: list = field(default_factory=list)
    bindings: list = field(default_factory=list)
    counts: dict = field(default_factory=lambda: {"raw": 0, "primary": 0, "linking": 0})
    failures: list = field(default_factory=list)
    branches: list = field(default_factory=list)
    status: str = "unchecked"
    expected: Optional[list] = None
    missing: list = field(default_factory=list)
    unexpected: list = field(default_factory=list)
    missing_bindings: list = field(default_factory=list)
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "title": self.title,
            "linking": "on" if self.linking else "off",
            "status": self.status,
            "readings": self.readings,
            "bindings": self.bindings,
            "counts": self.counts,
            "failures": self.failures,
            "branches": self.branches,
            "expected": self.expected,
            "missing": self.missing,
            "unexpected": self.unexpected,
            "missing_bindings": self.missing_bindings,
            "error": self.error,
        }

    def to_text(self) -> str:
        lines = [f"== {self.problem} (linking {'on' if self.linking else 'off'}): {self.status}"]
        if self.title:
            lines.append(f"   {self.title}")
        if self.error:
            lines.append(f"   error: {self.error}")
        c = self.counts
        lines.append(f"   counts raw={c['raw']} primary={c['primary']} linking={c['linking']}")
        for text, b in zip(self.readings, self.bindings):
            via = ", ".join(f"{k} := {v}" for k, v in b.items())
            lines.append(f"   {text}")
            lines.append(f"      via {via}")
        for f in self.failures:
            where = f" [{f['branch']}]" if f["branch"] else ""
            lines.append(f"   failure {f['equation']}: {f['cause']}{where}")
        for m in self.missing:
            lines.append(f"   missing: {m}")
        for u in self.unexpected:
            lines.append(f"   unexpected: {u}")
        for name, b in self.missing_bindings:
            lines.append(f"   missing binding: {name} := {b}")
        return "\n".join(lines)


def run(pf: ProblemFile, linking: Optional[bool] = None, budget: Optional[SearchBudget] = None) -> RunReport:
    """Solve one problem file and compare the outcome with its expectations."""
    linking = pf.linking if linking is None else linking
    budget = budget or pf.budget
    report = RunReport(problem=pf.name, title=pf.title, linking=linking)
    try:
        if pf.is_derivation:
            result = enumerate_derivations(pf.to_plan(), budget, linking)
            report.branches = list(result.branches)
        else:
            result = solve_report(pf.to_problem(), budget, linking)
    except (BudgetExhausted, EllipsisError) as exc:
        report.status = "error"
        report.error = f"{type(exc).__name__}: {exc}"
        return report
    report.readings = [r.text for r in result.readings]
    report.bindings = [{k: render(v) for k, v in sorted(r.provenance.items())} for r in result.readings]
    report.counts = result.counts.as_dict()
    report.failures = sorted((f.as_dict() for f in result.failures),
                             key=lambda d: (d["equation"], d["cause"], d["branch"], d["detail"]))
    expected = pf.expectation(linking)
    if expected is not None:
        found = {alpha_key(r.term): r.text for r in result.readings}
        wanted = {alpha_key(t): render(t) for t in expected}
        report.expected = sorted(wanted.values())
        report.missing = sorted(v for k, v in wanted.items() if k not in found)
        report.unexpected = sorted(v for k, v in found.items() if k not in wanted)
    for name, term in pf.expected_bindings:
        key = alpha_key(normalize(term))
        if not any(name in r.provenance and alpha_key(r.provenance[name]) == key for r in result.readings):
            report.missing_bindings.append((name, render(term)))
    truncated = [f for f in report.failures if f["cause"] == "budget"]
    if pf.exploratory:
        report.status = "exploratory"
    elif expected is None and not pf.expected_bindings:
        report.status = "unchecked"
    elif report.missing or report.unexpected or report.missing_bindings:
        report.status = "fail"
    else:
        report.status = "pass"
    # A truncated search proves nothing: a mismatch or an empty result under
    # truncation is an engine error, not a wrong answer.
    if truncated and (report.status == "fail" or not report.readings):
        report.status = "error"
        report.error = f"BudgetExhausted: {truncated[0]['detail'] or 'search truncated'}"
    return report


def load_problem(path) -> ProblemFile:
    return parse_problem(Path(path).read_text(encoding="utf-8"))


def corpus_dir() -> Path:
    return Path(str(resources.files("ellipsis_hou") / "corpus"))


def corpus_files(directory=None) -> list:
    d = Path(directory) if directory is not None else corpus_dir()
    return sorted(d.glob(f"*{PROBLEM_SUFFIX}"))


def reports_json(reports) -> str:
    return json.dumps({"problems": [r.to_dict() for r in reports]}, indent=2, ensure_ascii=False) + "\n"
