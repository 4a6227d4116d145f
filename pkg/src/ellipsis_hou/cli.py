"""Command-line runner for problem files.

Exit status: 0 when every checked problem passes, 1 on a reading mismatch,
2 on an engine error, 3 when a file fails to parse or typecheck.  The most
severe outcome wins.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .errors import DslSyntaxError, TypeMismatch, UnknownConstant, UnresolvedSelector
from .runner import RunReport, corpus_files, load_problem, reports_json, run
from .unify import SearchBudget

EXIT_PASS, EXIT_MISMATCH, EXIT_ENGINE, EXIT_PARSE = 0, 1, 2, 3
PARSE_ERRORS = (DslSyntaxError, TypeMismatch, UnknownConstant, UnresolvedSelector)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ellipsis-hou", description="Resolve ellipsis problems by higher-order unification.")
    p.add_argument("files", nargs="*", help="problem files (default: the bundled corpus)")
    p.add_argument("--corpus", metavar="DIR", help="run every *.ell file in DIR")
    p.add_argument("--linking", choices=("on", "off"), help="override the antecedent-linking filter")
    p.add_argument("--budget-depth", type=int, metavar="N", help="maximum metavariable depth")
    p.add_argument("--max-solutions", type=int, metavar="N", help="maximum unifiers per search")
    p.add_argument("--report", choices=("json", "text"), default="text")
    return p


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    paths = list(args.files)
    if args.corpus or not paths:
        paths.extend(corpus_files(args.corpus))
    linking = None if args.linking is None else args.linking == "on"
    for n in (args.budget_depth, args.max_solutions):
        if n is not None and n <= 0:
            print("error: budget values must be positive", file=sys.stderr)
            return EXIT_PARSE

    code = EXIT_PASS
    reports = []
    for path in paths:
        try:
            pf = load_problem(path)
        except PARSE_ERRORS as exc:
            print(f"{path}: {type(exc).__name__}: {exc}", file=sys.stderr)
            code = max(code, EXIT_PARSE)
            continue
        except OSError as exc:
            print(f"{path}: {exc}", file=sys.stderr)
            code = max(code, EXIT_PARSE)
            continue
        budget = None
        if args.budget_depth is not None or args.max_solutions is not None:
            budget = SearchBudget(
                args.budget_depth or pf.budget.max_depth,
                args.max_solutions or pf.budget.max_solutions,
            )
        report = run(pf, linking=linking, budget=budget)
        reports.append(report)
        code = max(code, _exit_for(report))

    if args.report == "json":
        sys.stdout.write(reports_json(reports))
    else:
        for r in reports:
            print(r.to_text())
        summary = {}
        for r in reports:
            summary[r.status] = summary.get(r.status, 0) + 1
        print("summary: " + ", ".join(f"{k} {v}" for k, v in sorted(summary.items())))
    return code


def _exit_for(report: RunReport) -> int:
    if report.status == "error":
        return EXIT_ENGINE
    if report.status == "fail":
        return EXIT_MISMATCH
    return EXIT_PASS


if __name__ == "__main__":
    sys.exit(main())
