"""Command-line interface.

Exit codes::

    0   satisfiable (a verified solution was found), or a file verified
    1   a file failed verification
    2   usage or configuration error
    20  unsatisfiable, exhaustive model (a rank bound)
    21  unsatisfiable under a sparsity or cyclic restriction (no rank bound)
    30  unknown: time, node or budget limit reached
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .emit import DocumentError, SolutionDocument, from_json, to_json, to_readable
from .engine import HEURISTICS, SearchLimits, Status
from .model import ConfigError, ModelConfig, build_model
from .portfolio import DEFAULT_BUDGET, DEFAULT_WORKERS, PortfolioPlan, PortfolioReport, run_portfolio
from .report import INDEX_NAME, format_cell, load_rows, render_table, write_report
from .tensor import Dims
from .verify import canonicalize

log = logging.getLogger("fmmcp")

EXIT_SAT = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_UNSAT = 20
EXIT_UNSAT_RESTRICTED = 21
EXIT_UNKNOWN = 30


@dataclass(frozen=True)
class LongRun:
    dims: tuple[int, int, int]
    rank: int
    args: str
    note: str


# Configurations known to need hours of many-core search; runnable, never expected to finish here.
LONG_RUNNING = (
    LongRun((3, 3, 3), 23, "--cyclic 5 6 --k1 9 --k2 10", "3x3 with 23 products, cyclic with sparsity caps"),
    LongRun((2, 2, 4), 14, "--k1 11 --k2 7", "2x2 times 2x4 at its known rank, sparsity caps"),
)


class UsageError(Exception):
    pass


def parse_seeds(text: str) -> tuple[int, ...]:
    """'10' means seeds 0..9; '3,5,7' (or '7,') is an explicit list."""
    text = text.strip()
    try:
        if "," in text:
            return tuple(int(x) for x in text.split(",") if x.strip())
        count = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be a count or a comma-separated list, got {text!r}")
    if count < 1:
        raise argparse.ArgumentTypeError("seed count must be at least 1")
    return tuple(range(count))


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fmmcp", description="Search for and check exact fast matrix "
                                     "multiplication schemes with coefficients in {-1, 0, 1}.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more diagnostics on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (("solve", "search for a scheme with R products"),
                       ("prove", "like solve, but only on exhaustive models so Unsat is a rank bound")):
        p = sub.add_parser(name, help=text, description=text)
        for dim in ("n", "m", "p"):
            p.add_argument(dim, type=_positive_int)
        p.add_argument("rank", type=_non_negative_int)
        p.add_argument("--sym", action="store_true", help="add symmetry-breaking constraints")
        p.add_argument("--valid", action="store_true", help="add valid inequalities")
        p.add_argument("--k1", type=_non_negative_int, help="max nonzeros per product over U and V (with --k2)")
        p.add_argument("--k2", type=_non_negative_int, help="max nonzeros per row of W (with --k1)")
        p.add_argument("--cyclic", nargs=2, type=_non_negative_int, metavar=("S", "T"),
                       help="cyclic-invariant schemes with R = S + 3T (square only)")
        p.add_argument("--seeds", type=parse_seeds, default=tuple(range(10)),
                       help="seed count (default 10, i.e. 0..9) or comma-separated list")
        p.add_argument("--workers", type=_positive_int, default=DEFAULT_WORKERS, help="concurrent searches")
        p.add_argument("--time-limit", type=_positive_float, default=DEFAULT_BUDGET,
                       help="wall-clock seconds, per seed and overall (default 7200)")
        p.add_argument("--node-limit", type=_positive_int, help="decision limit per seed")
        p.add_argument("--restarts", action="store_true", help="Luby restarts (solve only)")
        p.add_argument("--heuristic", choices=HEURISTICS, default="rows", help="branching order")
        p.add_argument("--no-race", action="store_true",
                       help="let every seed finish instead of stopping at the first answer")
        p.add_argument("--out", type=Path, help="directory for solution files and index.json")

    p = sub.add_parser("verify", help="check a solution file")
    p.add_argument("file", type=Path)
    p = sub.add_parser("canonical", help="print the canonical form of a solution file")
    p.add_argument("file", type=Path)
    p.add_argument("--out", type=Path, help="write the canonical document here instead of stdout")
    p = sub.add_parser("show", help="print a solution file as an algorithm")
    p.add_argument("file", type=Path)
    p = sub.add_parser("stats", help="aggregate the runs below DIR into stats.txt/.tsv/.json/.png")
    p.add_argument("dir", type=Path)
    return parser


def config_from_args(args: argparse.Namespace) -> ModelConfig:
    if (args.k1 is None) != (args.k2 is None):
        raise UsageError("--k1 and --k2 go together")
    sparsity = None if args.k1 is None else (args.k1, args.k2)
    cyclic = None if args.cyclic is None else tuple(args.cyclic)
    if args.command == "prove":
        bad = [flag for flag, on in (("--k1/--k2", sparsity is not None), ("--cyclic", cyclic is not None),
                                     ("--restarts", args.restarts)) if on]
        if bad:
            raise UsageError(f"prove needs an exhaustive search; {', '.join(bad)} not allowed")
    return ModelConfig(use_symmetry=args.sym, use_valid=args.valid, sparsity=sparsity, cyclic=cyclic)


def exit_code(report: PortfolioReport) -> int:
    status = report.outcome.status
    if status == Status.SAT:
        return EXIT_SAT
    if status == Status.UNSAT:
        return EXIT_UNSAT if report.exhaustive else EXIT_UNSAT_RESTRICTED
    return EXIT_UNKNOWN


def _summary(report: PortfolioReport) -> str:
    out = report.outcome
    text = out.describe()
    if report.winner is not None:
        s = out.stats
        text += f" (seed {report.winner}, {s.elapsed:.3f} s, {s.branches:.2e} branches)"
    else:
        text += f" after {report.elapsed:.1f} s"
    return text


def _write_outputs(directory: Path, dims: Dims, rank: int, config: ModelConfig, args, report, docs) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for seed, doc in docs.items():
        name = f"solution_seed{seed}.json"
        (directory / name).write_bytes(to_json(doc))
        names.append(name)
    index = {
        "schema_version": 1,
        "dims": {"n": dims.n, "m": dims.m, "p": dims.p},
        "rank": rank,
        "method": config.label,
        "config": _config_dict(config),
        "heuristic": args.heuristic,
        "status": report.outcome.status.value,
        "exhaustive": report.exhaustive,
        "result": report.outcome.describe(),
        "winner": report.winner,
        "elapsed": report.elapsed,
        "solutions": names,
        "runs": [r.to_dict() for r in report.runs],
        "aggregates": {
            "time": format_cell(report.time_stats),
            "branches": format_cell(report.branch_stats, "{:.2e}"),
        },
    }
    (directory / INDEX_NAME).write_text(json.dumps(index, indent=2) + "\n")


def _config_dict(config: ModelConfig) -> dict:
    return {
        "symmetry": config.use_symmetry,
        "valid": config.use_valid,
        "sparsity": None if config.sparsity is None else list(config.sparsity),
        "cyclic": None if config.cyclic is None else list(config.cyclic),
        "field": list(config.field.values),
    }


def cmd_solve(args: argparse.Namespace) -> int:
    dims = Dims(args.n, args.m, args.p)
    config = config_from_args(args)
    model = build_model(dims, args.rank, config)
    if args.command == "prove" and not model.exhaustive:
        raise UsageError("prove needs an exhaustive model")
    for lr in LONG_RUNNING:
        if (dims.n, dims.m, dims.p) == lr.dims and args.rank == lr.rank:
            print(f"warning: {lr.note} is a long-running configuration (hours on many cores); "
                  f"suggested flags: {lr.args}", file=sys.stderr)
    for note in model.notes:
        print(f"note: {note}", file=sys.stderr)
    print(f"model: {model.describe()}")

    limits = SearchLimits(time_limit=args.time_limit, node_limit=args.node_limit, restarts=args.restarts)
    plan = PortfolioPlan(seeds=args.seeds, workers=args.workers, limits=limits, budget=args.time_limit,
                         race=not args.no_race, heuristic=args.heuristic)
    report = run_portfolio(model, plan)
    if args.command == "prove" and report.outcome.status == Status.UNSAT and not report.exhaustive:
        raise AssertionError("a restricted model reached prove")

    for r in report.runs:
        log.info("seed %d: %s %.3fs %d branches%s", r.seed, r.status.value, r.stats.elapsed, r.stats.branches,
                 " (cancelled)" if r.cancelled else "")
    print(f"result: {_summary(report)}")

    docs = {}
    for seed, sol in report.solutions.items():
        run = next(r for r in report.runs if r.seed == seed)
        provenance = {
            "engine": f"fmmcp {__version__}",
            "command": args.command,
            "method": config.label,
            "config": _config_dict(config),
            "heuristic": args.heuristic,
            "seed": seed,
            "stats": run.stats.to_dict(),
            "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        }
        doc = SolutionDocument.build(sol, provenance, config.field.values)
        if not doc.ok:
            print(f"error: seed {seed} produced a scheme that fails verification", file=sys.stderr)
            return EXIT_VERIFY_FAILED
        docs[seed] = doc
    if report.winner is not None and report.winner in docs:
        sys.stdout.write(to_readable(docs[report.winner]))
    if args.out is not None:
        _write_outputs(args.out, dims, args.rank, config, args, report, docs)
        print(f"wrote {args.out / INDEX_NAME}")
    return exit_code(report)


def _load(path: Path) -> SolutionDocument:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}")
    try:
        return from_json(raw)
    except DocumentError as exc:
        raise UsageError(f"{path}: {exc}")


def _report_violations(doc: SolutionDocument) -> None:
    print(f"verification failed: {len(doc.violations)} wrong tensor entries", file=sys.stderr)
    for v in doc.violations[:10]:
        print(f"  T[{v.i},{v.j},{v.k}] expected {v.expected}, got {v.got}", file=sys.stderr)


def cmd_verify(args: argparse.Namespace) -> int:
    doc = _load(args.file)
    if not doc.ok:
        _report_violations(doc)
        return EXIT_VERIFY_FAILED
    d = doc.dims
    print(f"ok: ({d.n},{d.m},{d.p}) with {doc.rank} products")
    return EXIT_SAT


def cmd_canonical(args: argparse.Namespace) -> int:
    doc = _load(args.file)
    canon = SolutionDocument.build(canonicalize(doc.factors), doc.provenance, doc.field)
    data = to_json(canon)
    if args.out is not None:
        args.out.write_bytes(data)
    else:
        sys.stdout.write(data.decode())
    if not doc.ok:
        _report_violations(doc)
        return EXIT_VERIFY_FAILED
    return EXIT_SAT


def cmd_show(args: argparse.Namespace) -> int:
    doc = _load(args.file)
    sys.stdout.write(to_readable(doc))
    if not doc.ok:
        _report_violations(doc)
        return EXIT_VERIFY_FAILED
    return EXIT_SAT


def cmd_stats(args: argparse.Namespace) -> int:
    if not args.dir.is_dir():
        raise UsageError(f"{args.dir} is not a directory")
    rows = load_rows(args.dir)
    if not rows:
        raise UsageError(f"no {INDEX_NAME} found below {args.dir}")
    paths = write_report(args.dir, rows)
    sys.stdout.write(render_table(rows))
    print("wrote " + ", ".join(str(p) for p in paths.values()))
    return EXIT_SAT


COMMANDS = {
    "solve": cmd_solve,
    "prove": cmd_solve,
    "verify": cmd_verify,
    "canonical": cmd_canonical,
    "show": cmd_show,
    "stats": cmd_stats,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors this way
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
