"""Command-line entry point: ``rieszgas <subcommand> --config FILE --out DIR``.

Exit status is 0 when every counted record passes, 1 on a failed record or a
numerical error (the failing record id is printed) and 2 on a malformed
configuration (the message carries the offending line).
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from ..errors import ConfigError, RieszGasError
from .config import load_config
from .experiments import EXPERIMENTS, Run
from .records import ExperimentRecord, ensure_dir, write_records


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rieszgas", description="Numerical experiments for Riesz and Coulomb gases.")
    p.add_argument("subcommand", choices=sorted(EXPERIMENTS))
    p.add_argument("--config", required=True, metavar="PATH", help="TOML experiment configuration")
    p.add_argument("--out", metavar="DIR", help="output directory (default: runs/<subcommand>)")
    p.add_argument("--seed", type=int, metavar="U64", help="override experiment.seed")
    p.add_argument("--threads", type=int, default=1, metavar="K", help="worker threads for replicas")
    p.add_argument("--quiet", action="store_true", help="print nothing on success")
    return p


def _status(rec: ExperimentRecord) -> str:
    if rec.kind == "data":
        return "data"
    mark = "PASS" if rec.passed else "FAIL"
    return mark if rec.kind == "check" else f"{mark.lower()} (qualitative)"


def _fmt(v) -> str:
    return "-" if v is None else f"{v:.4g}"


def summary_lines(name: str, records: list, runtime: float, digest: str, seed: int) -> list:
    lines = [f"experiment {name}  digest {digest}  seed {seed}", f"{'id':<52} {'lhs':>11} {'rhs':>11} "
             f"{'constant':>11}  status"]
    for r in records:
        lines.append(f"{r.id:<52} {_fmt(r.lhs):>11} {_fmt(r.rhs):>11} {_fmt(r.constant):>11}  {_status(r)}")
    counted = [r for r in records if r.counts]
    failed = [r for r in counted if not r.passed]
    lines.append(f"{len(counted) - len(failed)}/{len(counted)} checks passed; runtime {runtime:.1f} s")
    return lines


def cli_main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {args.config}: {exc}", file=sys.stderr)
        return 2
    out = ensure_dir(args.out or Path("runs") / args.subcommand)
    seed = cfg.seed if args.seed is None else args.seed
    run = Run(args.subcommand, cfg, out, seed, args.threads)
    start = time.perf_counter()
    code = 0
    try:
        EXPERIMENTS[args.subcommand](run)
    except ConfigError as exc:
        print(f"config error: {args.config}: {exc}", file=sys.stderr)
        return 2
    except (RieszGasError, ArithmeticError, ValueError, RuntimeError, MemoryError) as exc:
        run.add(ExperimentRecord(run.context, run.name, passed=False, details={"error": f"{type(exc).__name__}: {exc}"}))
        print(f"numerical failure in record {run.context}: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = 1
    runtime = time.perf_counter() - start
    write_records(out / "records.jsonl", run.records)
    lines = summary_lines(run.name, run.records, runtime, cfg.digest, seed)
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    failed = [r for r in run.records if r.counts and not r.passed]
    if failed:
        code = 1
    if not args.quiet or code:
        print("\n".join(lines))
        for r in failed:
            print(f"failed: {r.id}", file=sys.stderr)
    return code


def main() -> None:
    sys.exit(cli_main())
