"""Command-line front end and benchmark campaigns.

Subcommands::

    dwsched gen        --tasks 10 --count 5 --seed 1 --out instances/
    dwsched solve      inst.json --scheme exact --out sched.json
    dwsched check      inst.json sched.json
    dwsched export-lp  inst.json [--t-max 40] --out model.lp
    dwsched bench      --tasks 10 --count 300 --machines 1,2,3,4 --scheme glist,exact --out runs.csv
    dwsched report     runs.csv

Exit codes: 0 success or feasible, 1 infeasible, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import csv
import io
import re
import statistics
import sys
import time
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import __version__
from .dwdag import Instance
from .errors import DwschedError, ParseError, ValidationFailed
from .formulation import build_p2, constraint_counts, export_lp
from .heuristics import HeuristicKind, best_heuristic, run_heuristic
from .instgen import GenParams, dumps_instance, dumps_schedule, generate, loads_instance, loads_schedule
from .schedule import check_feasible, horizon, single_machine_baseline
from .solver import SolveOptions, solve_exact

CSV_HEADER = (
    "instance_id", "seed", "scheme", "machines", "channels", "makespan",
    "normalized_makespan", "nodes_explored", "status", "wall_time_ms",
)
SCHEMES = ("random", "list", "glist", "partition", "exact", "exact-plain")
SOLVER_SCHEMES = ("exact", "exact-plain")
# a named comparison scheme without a known definition; emitted as a row marker only
UNSUPPORTED_SCHEMES = ("glist-master",)


@dataclass(frozen=True)
class BenchConfig:
    tasks: tuple[int, ...] = (10,)
    count: int = 3000
    seed: int = 0
    machines: tuple[int, ...] = (1, 2, 3, 4)
    channels: int = 1
    schemes: tuple[str, ...] = SCHEMES[:5]
    options: SolveOptions = field(default_factory=SolveOptions)
    instance_dir: Path | None = None

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if not self.schemes:
            raise ValueError("at least one scheme is required")
        unknown = [s for s in self.schemes if s not in SCHEMES + UNSUPPORTED_SCHEMES]
        if unknown:
            raise ValueError(f"unknown scheme(s): {', '.join(unknown)}")
        if not self.machines or min(self.machines) < 1 or self.channels < 1:
            raise ValueError("machines and channels must be >= 1")


@dataclass(frozen=True)
class BenchRow:
    instance_id: str
    seed: int
    scheme: str
    machines: int
    channels: int
    makespan: int | None
    normalized_makespan: float | None
    nodes_explored: int | None
    status: str
    wall_time_ms: int

    def cells(self) -> list[str]:
        def opt(x):
            return "" if x is None else str(x)

        norm = "" if self.normalized_makespan is None else f"{self.normalized_makespan:.6f}"
        return [
            self.instance_id, str(self.seed), self.scheme, str(self.machines), str(self.channels),
            opt(self.makespan), norm, opt(self.nodes_explored), self.status, str(self.wall_time_ms),
        ]


def instance_id(tasks: int, k: int) -> str:
    """Campaign instance name; the task count prefix feeds report buckets."""
    return f"n{tasks:02d}-{k:05d}"


def campaign_instances(config: BenchConfig) -> list[tuple[str, int, Instance]]:
    """(id, seed, instance) triples, before the machine sweep is applied."""
    if config.instance_dir is not None:
        out = []
        for path in sorted(Path(config.instance_dir).glob("*.json"))[: config.count]:
            out.append((path.stem, 0, loads_instance(path.read_text())))
        return out
    out = []
    for tasks in config.tasks:
        params = GenParams(task_count=tasks, channels=config.channels)
        for k in range(config.count):
            seed = config.seed + k
            out.append((instance_id(tasks, k), seed, generate(params, seed)))
    return out


def run_scheme(scheme: str, instance: Instance, seed: int, options: SolveOptions):
    """(schedule, nodes_explored, status) for one scheme on one instance."""
    if scheme in SOLVER_SCHEMES:
        if scheme == "exact-plain":
            options = SolveOptions.plain(
                node_limit=options.node_limit, time_limit=options.time_limit, deterministic=options.deterministic
            )
        sched, report = solve_exact(instance, options, warm=best_heuristic(instance, seed))
        return sched, report.nodes_explored, report.status.value
    return run_heuristic(HeuristicKind(scheme), instance, seed), None, "feasible"


def bench_rows(config: BenchConfig) -> list[BenchRow]:
    rows = []
    for iid, seed, base in campaign_instances(config):
        for m in config.machines:
            inst = replace(base, machines=m, channels=config.channels, t_max=None)
            baseline = single_machine_baseline(inst)
            for scheme in config.schemes:
                if scheme in UNSUPPORTED_SCHEMES:
                    rows.append(BenchRow(iid, seed, scheme, m, config.channels, None, None, None, "unsupported", 0))
                    continue
                t0 = time.monotonic()
                try:
                    sched, nodes, status = run_scheme(scheme, inst, seed, config.options)
                    report = check_feasible(inst, sched)
                    if not report.feasible:
                        status = "infeasible"
                    mk = sched.makespan
                    norm = mk / baseline
                except DwschedError as exc:  # recorded per row, never aborts the campaign
                    mk = norm = nodes = None
                    status = f"error:{type(exc).__name__}"
                ms = 0 if config.options.deterministic else round((time.monotonic() - t0) * 1000)
                rows.append(BenchRow(iid, seed, scheme, m, config.channels, mk, norm, nodes, status, ms))
    rows.sort(key=lambda r: (r.instance_id, r.scheme, r.machines))
    return rows


def rows_to_csv(rows: Iterable[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow(row.cells())
    return buf.getvalue()


def csv_to_rows(text: str) -> list[BenchRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_HEADER:
        raise ParseError("CSV header does not match the benchmark format", code="BAD_VALUE", line=1)

    def opt(cell, conv):
        return None if cell == "" else conv(cell)

    rows = []
    for n, cells in enumerate(reader, start=2):
        if len(cells) != len(CSV_HEADER):
            raise ParseError(f"expected {len(CSV_HEADER)} cells, got {len(cells)}", code="BAD_VALUE", line=n)
        try:
            rows.append(BenchRow(
                cells[0], int(cells[1]), cells[2], int(cells[3]), int(cells[4]), opt(cells[5], int),
                opt(cells[6], float), opt(cells[7], int), cells[8], int(cells[9]),
            ))
        except ValueError as exc:
            raise ParseError(str(exc), code="BAD_VALUE", line=n) from None
    return rows


def _bucket(iid: str) -> str:
    m = re.match(r"n(\d+)-", iid)
    return str(int(m.group(1))) if m else "?"


def aggregate(rows: Sequence[BenchRow]) -> tuple[list[tuple[str, int, float, int]], list[tuple[str, str, float, int]]]:
    """Mean normalized makespan per (scheme, machines) and mean nodes per
    (solver scheme, task-count bucket).  Rows without values are skipped."""
    norm: dict[tuple[str, int], list[float]] = defaultdict(list)
    nodes: dict[tuple[str, str], list[int]] = defaultdict(list)
    for r in rows:
        if r.normalized_makespan is not None:
            norm[r.scheme, r.machines].append(r.normalized_makespan)
        if r.scheme in SOLVER_SCHEMES and r.nodes_explored is not None:
            nodes[r.scheme, _bucket(r.instance_id)].append(r.nodes_explored)
    by_m = [(s, m, statistics.fmean(v), len(v)) for (s, m), v in sorted(norm.items())]
    by_n = [(s, b, statistics.fmean(v), len(v)) for (s, b), v in sorted(nodes.items(), key=lambda kv: (kv[0][0], _num(kv[0][1])))]
    return by_m, by_n


def _num(bucket: str) -> int:
    return int(bucket) if bucket.isdigit() else -1


def report_text(rows: Sequence[BenchRow]) -> str:
    by_m, by_n = aggregate(rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scheme", "machines", "mean_normalized_makespan", "rows"])
    for s, m, mean, n in by_m:
        w.writerow([s, m, f"{mean:.6f}", n])
    buf.write("\n")
    w.writerow(["scheme", "tasks", "mean_nodes_explored", "rows"])
    for s, b, mean, n in by_n:
        w.writerow([s, b, f"{mean:.3f}", n])
    return buf.getvalue()


# ---------------------------------------------------------------- argparse


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _scheme_list(text: str) -> tuple[str, ...]:
    values = tuple(x.strip() for x in text.split(",") if x.strip())
    bad = [v for v in values if v not in SCHEMES + UNSUPPORTED_SCHEMES]
    if bad or not values:
        raise argparse.ArgumentTypeError(f"unknown scheme {', '.join(bad) or text!r}; choose from {', '.join(SCHEMES)}")
    return values


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--node-limit", type=_positive)
    p.add_argument("--time-limit", type=float, help="seconds per exact solve (ignored with --deterministic)")
    p.add_argument("--deterministic", action="store_true",
                   help="node-count limits only, zero wall times in CSV output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dwsched", description="Joint task and flow scheduling on DAG jobs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate random instances")
    p.add_argument("--tasks", type=_positive, default=10)
    p.add_argument("--count", type=_positive, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--machines", type=_int_list, default=(2,))
    p.add_argument("--channels", type=_positive, default=1)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("solve", help="schedule one instance")
    p.add_argument("instance", type=Path)
    p.add_argument("--scheme", choices=SCHEMES, default="exact")
    p.add_argument("--seed", type=int, default=0)
    _add_solver_flags(p)
    p.add_argument("--out", type=Path, help="schedule file (default: standard output)")

    p = sub.add_parser("check", help="check a schedule against an instance")
    p.add_argument("instance", type=Path)
    p.add_argument("schedule", type=Path)

    p = sub.add_parser("export-lp", help="write the time-indexed model in LP format")
    p.add_argument("instance", type=Path)
    p.add_argument("--t-max", type=_positive)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("bench", help="run a benchmark campaign to CSV")
    p.add_argument("--tasks", type=_int_list, default=(10,))
    p.add_argument("--count", type=_positive, default=3000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--machines", type=_int_list, default=(1, 2, 3, 4))
    p.add_argument("--channels", type=_positive, default=1)
    p.add_argument("--scheme", type=_scheme_list, default=SCHEMES[:5])
    p.add_argument("--instances", type=Path, help="read instances from this directory instead of generating")
    _add_solver_flags(p)
    p.add_argument("--out", type=Path, help="CSV file (default: standard output)")

    p = sub.add_parser("report", help="aggregate a benchmark CSV")
    p.add_argument("csv", type=Path)
    p.add_argument("--out", type=Path)
    return parser


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _options(args) -> SolveOptions:
    return SolveOptions(node_limit=args.node_limit, time_limit=args.time_limit, deterministic=args.deterministic)


def _read_instance(path: Path) -> Instance:
    return loads_instance(path.read_text())


def cmd_gen(args) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    params = GenParams(task_count=args.tasks, machines=args.machines[0], channels=args.channels)
    params.check()
    for k in range(args.count):
        seed = args.seed + k
        (args.out / f"inst-{seed:06d}.json").write_text(dumps_instance(generate(params, seed)))
    print(f"wrote {args.count} instance(s) to {args.out}")
    return 0


def cmd_solve(args) -> int:
    inst = _read_instance(args.instance)
    sched, nodes, status = run_scheme(args.scheme, inst, args.seed, _options(args))
    _emit(dumps_schedule(inst, sched), args.out)
    report = sys.stdout if args.out is not None else sys.stderr
    print(f"scheme={args.scheme} makespan={sched.makespan} status={status}"
          + ("" if nodes is None else f" nodes_explored={nodes}"), file=report)
    return 0


def cmd_check(args) -> int:
    inst = _read_instance(args.instance)
    sched = loads_schedule(args.schedule.read_text())
    report = check_feasible(inst, sched)
    for cid, msg in report.violations:
        print(f"{cid}: {msg}")
    if report.feasible:
        print(f"feasible, makespan {sched.makespan}")
        return 0
    return 1


def cmd_export_lp(args) -> int:
    inst = _read_instance(args.instance)
    t_max = args.t_max if args.t_max is not None else horizon(inst)
    model = build_p2(inst, t_max)
    with open(args.out, "wb") as sink:
        export_lp(model, sink)
    counts = constraint_counts(model)
    print(f"{'family':<12} {'rows':>8}")
    for fam, n in counts.items():
        print(f"{fam:<12} {n:>8}")
    print(f"{'total':<12} {sum(counts.values()):>8}")
    print(f"variables {len(model.names)}, t_max {t_max}")
    return 0


def cmd_bench(args) -> int:
    config = BenchConfig(
        tasks=args.tasks, count=args.count, seed=args.seed, machines=args.machines,
        channels=args.channels, schemes=args.scheme, options=_options(args), instance_dir=args.instances,
    )
    _emit(rows_to_csv(bench_rows(config)), args.out)
    return 0


def cmd_report(args) -> int:
    rows = csv_to_rows(args.csv.read_text())
    _emit(report_text(rows), args.out)
    return 0


COMMANDS = {
    "gen": cmd_gen, "solve": cmd_solve, "check": cmd_check,
    "export-lp": cmd_export_lp, "bench": cmd_bench, "report": cmd_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ValidationFailed as exc:
        print(f"error: invalid instance: {exc}", file=sys.stderr)
        return 2
    except ParseError as exc:
        where = f" (line {exc.line})" if exc.line else ""
        print(f"error: {exc.code}{where}: {exc}", file=sys.stderr)
        return 2
    except (DwschedError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
