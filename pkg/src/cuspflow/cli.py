"""Command line entry point: ``cuspflow run`` and ``cuspflow summarize``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import SUITE_CHOICES, load_config
from .errors import ConfigError
from .parallel import resolve_workers
from .suites import run_suite

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cuspflow", description="Cusp excursion and mixing checks.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run check suites and write JSON reports")
    run.add_argument("--config", required=True, help="YAML experiment configuration")
    run.add_argument("--suite", choices=SUITE_CHOICES)
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", help="process count or 'auto'")
    run.add_argument("--out", help="output directory")
    summ = sub.add_parser("summarize", help="print a table of criteria from report files")
    summ.add_argument("--in", dest="indir", required=True, help="directory holding *_report.json")
    return p


def _overrides(args) -> dict:
    changes = {}
    if args.suite is not None:
        changes["suite"] = args.suite
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.workers is not None:
        changes["workers"] = args.workers if args.workers == "auto" else int(args.workers)
    if args.out is not None:
        changes["output_dir"] = args.out
    return changes


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        cfg = cfg.replace(**_overrides(args))
        workers = resolve_workers(cfg.workers)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.output_dir)
    failed = []
    for name in cfg.suites:
        try:
            report = run_suite(name, cfg, workers, out)
        except Exception as exc:  # noqa: BLE001
            print(f"runtime error in suite {name}: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        failed += [c["name"] for c in report["criteria"] if not c["passed"]]
        print(format_table(report["criteria"], title=f"[{name}]"))
    if failed:
        print("failing criteria: " + "; ".join(failed), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def format_table(criteria, title: Optional[str] = None) -> str:
    header = ("criterion", "anchor", "measured", "bound", "result")
    rows = [(c["name"], c["anchor"], f"{c['measured']:.6g}", c["bound"], "PASS" if c["passed"] else "FAIL")
            for c in criteria]
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    lines = [title] if title else []
    for row in (header, *rows):
        lines.append("  ".join(str(v).ljust(w) for v, w in zip(row, widths)).rstrip())
    return "\n".join(lines)


def load_reports(indir) -> list:
    d = Path(indir)
    if not d.is_dir():
        raise ConfigError(f"{d} is not a directory")
    files = sorted(d.glob("*_report.json"))
    if not files:
        raise ConfigError(f"no *_report.json files in {d}")
    reports = []
    for f in files:
        try:
            data = json.loads(f.read_text(encoding="utf-8"))
            data["criteria"]
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"corrupt report {f.name}: {exc}") from exc
        reports.append(data)
    return reports


def cmd_summarize(args) -> int:
    try:
        reports = load_reports(args.indir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    crit = [c for rep in reports for c in rep["criteria"]]
    print(format_table(crit))
    return EXIT_OK if all(c["passed"] for c in crit) else EXIT_FAIL


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    return cmd_summarize(args)


if __name__ == "__main__":
    sys.exit(main())
