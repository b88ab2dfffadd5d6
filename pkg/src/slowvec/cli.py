"""Command-line runner: ``slowvec run|suite|export-operator|version``.

Exit status is 0 when every asserted check passes, 2 when the only
shortfalls are horizon-limited (inconclusive) results, and 1 on errors,
failed checks or invalid input.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from ._jsonutil import to_jsonable
from .battery import run_suite
from .errors import ScenarioError, SlowvecError
from .operators import operator_to_json
from .runner import run_scenario
from .scenario import build_operator, load_scenario

EXIT_PASS, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1 (2 is reserved for inconclusive runs)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: usage error: {message}\n")


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--horizon", type=_positive_int, default=None, help="override the scan horizon")
    common.add_argument("--workers", type=_positive_int, default=1, help="parallel workers (default 1)")
    common.add_argument("--out-dir", type=Path, default=None, help="directory for report files (default: reports)")

    parser = _Parser(prog="slowvec", description="Slow vectors and asymptotically finite-dimensional operators.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", parents=[common], help="run the analyses of a scenario file")
    run.add_argument("scenario", type=Path)

    suite = sub.add_parser("suite", parents=[common], help="randomized consistency battery")
    suite.add_argument("--seed", type=int, default=0)
    suite.add_argument("--count", type=_positive_int, required=True)

    export = sub.add_parser("export-operator", parents=[common], help="write the operator of a scenario as JSON")
    export.add_argument("scenario", type=Path)
    export.add_argument("-o", "--output", type=Path, default=None, help="output file (default: stdout)")

    sub.add_parser("version", help="print the package version")
    return parser


def _dump(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _write_header(path: Path, command: list):
    header = {"generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"), "command": command, "version": __version__}
    path.write_text(_dump(header))


def _flatten(prefix, obj, rows):
    if isinstance(obj, dict):
        for key in sorted(obj):
            _flatten(f"{prefix}.{key}" if prefix else str(key), obj[key], rows)
    elif isinstance(obj, list) and obj and all(isinstance(v, (dict, list)) for v in obj):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, rows)
    else:
        rows.append((prefix, json.dumps(obj, sort_keys=True) if isinstance(obj, (list, dict)) else obj))


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)  # excel dialect: RFC 4180 quoting, CRLF rows
        writer.writerow(header)
        writer.writerows(rows)


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    out_dir = args.out_dir or Path(scenario.output.get("dir", "reports"))
    stem = scenario.output.get("stem", scenario.name)
    result = run_scenario(scenario, horizon=args.horizon, workers=args.workers)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = result.summary()
    (out_dir / f"{stem}-summary.json").write_text(_dump(summary))
    rows = []
    for record in summary["analyses"]:
        flat = []
        _flatten("", {k: v for k, v in record.items() if k not in ("analysis", "stage", "status")}, flat)
        rows.extend((record["analysis"], record["stage"], record["status"], key, value) for key, value in flat)
    _write_csv(out_dir / f"{stem}-details.csv", ["analysis", "stage", "status", "field", "value"], rows)
    _write_header(out_dir / f"{stem}-header.json", ["run", str(args.scenario)])
    for record in summary["analyses"]:
        line = f"{record['analysis']:<20} {record['status']}"
        if "error" in record:
            line += f"  [{record['stage']}] {record['error']['message']}"
        print(line)
    print(f"status: {result.status}")
    return result.exit_code


def cmd_suite(args) -> int:
    out_dir = args.out_dir or Path("reports")
    results = run_suite(args.seed, args.count, args.workers)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = [r for r in results if not r.passed]
    summary = {
        "schema_version": 1,
        "seed": args.seed,
        "count": args.count,
        "passed": not failures,
        "check_count": sum(len(r.checks) for r in results),
        "failed_instances": [r.index for r in failures],
        "instances": [
            {"index": r.index, "params": r.params, "passed": r.passed, "failed_checks": [c.name for c in r.checks if not c.passed]}
            for r in results
        ],
    }
    prefix = f"suite-seed{args.seed}-count{args.count}"
    (out_dir / f"{prefix}-summary.json").write_text(_dump(summary))
    rows = [(c.instance, c.name, repr(c.value), repr(c.threshold), c.passed) for r in results for c in r.checks]
    _write_csv(out_dir / f"{prefix}-details.csv", ["instance", "check", "value", "threshold", "passed"], rows)
    _write_header(out_dir / f"{prefix}-header.json", ["suite", "--seed", str(args.seed), "--count", str(args.count)])
    if failures:
        repro = out_dir / "repro"
        repro.mkdir(exist_ok=True)
        for r in failures:
            (repro / f"{r.scenario()['name']}.json").write_text(_dump(r.scenario()))
    print(f"{len(results) - len(failures)}/{len(results)} instances passed ({summary['check_count']} checks)")
    for r in failures:
        print(f"  instance {r.index}: " + "; ".join(c.name for c in r.checks if not c.passed))
    return EXIT_PASS if not failures else EXIT_ERROR


def cmd_export(args) -> int:
    scenario = load_scenario(args.scenario)
    text = _dump(operator_to_json(build_operator(scenario.operator_desc)))
    if args.output is None:
        sys.stdout.write(text)
    else:
        args.output.write_text(text)
    return EXIT_PASS


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "version":
            print(__version__)
            return EXIT_PASS
        handler = {"run": cmd_run, "suite": cmd_suite, "export-operator": cmd_export}[args.command]
        return handler(args)
    except ScenarioError as exc:
        where = "".join(
            [f" (field {exc.field})" if exc.field else "", f" at line {exc.line}" if exc.line else ""]
        )
        print(f"error: {exc}{where}", file=sys.stderr)
        return EXIT_ERROR
    except SlowvecError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
