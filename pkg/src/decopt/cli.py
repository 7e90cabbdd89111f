"""Command-line front end: analyze, optimize, verify, score.

Logs are line-oriented JSON records on stderr; result artifacts go to
files and a short human summary to stdout.  Exit codes: 0 on success,
1 on any hard error, 2 on usage errors.  Verification verdicts are
data, not failures: a NonEquivalent result still exits 0.

Subcommand handlers import their dependencies lazily, so `verify`
never loads the provider stack and cannot open a network connection.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import threading
from dataclasses import replace
from pathlib import Path

from .errors import DecoptError

DEFAULT_OUT = "decopt-out"


class Logger:
    """Line-oriented JSON logging with token redaction.

    Levels: 0 always, 1 with -v, 2 with -vv (prompt text).  Redacted
    substrings never reach the stream, whatever the verbosity.
    """

    def __init__(self, verbosity: int = 0, redact: tuple[str, ...] = (),
                 stream=None):
        self.verbosity = verbosity
        self.redact = tuple(t for t in redact if t)
        self.stream = stream if stream is not None else sys.stderr
        self._lock = threading.Lock()

    def __call__(self, level: int, event: str, **fields):
        if level > self.verbosity:
            return
        line = json.dumps({"event": event, **fields},
                          sort_keys=True, default=str)
        for token in self.redact:
            line = line.replace(token, "[redacted]")
        with self._lock:
            print(line, file=self.stream)


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0,
                        help="increase log verbosity (-vv logs prompt text)")
    p = argparse.ArgumentParser(
        prog="decopt",
        description="Dependency-guided optimization of decompiled "
                    "smart-contract pseudocode with verified edits.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common],
                       help="emit dependency-graph and control-flow "
                            "debug exports")
    a.add_argument("inputs", nargs="+", metavar="UNIT.dsol")
    a.add_argument("-o", "--out", default=DEFAULT_OUT)

    o = sub.add_parser("optimize", parents=[common], help="run the repair loop per input unit")
    o.add_argument("inputs", nargs="+", metavar="UNIT.dsol")
    o.add_argument("-o", "--out", default=DEFAULT_OUT)
    o.add_argument("--config", help="JSON file mirroring RunConfig")
    o.add_argument("--provider", choices=("mock", "http"))
    o.add_argument("--scenario", help="scripted replies for the mock "
                                      "provider (JSON file)")
    o.add_argument("--iterations", type=int, metavar="N",
                   help="repair-loop iteration limit (default 3)")
    o.add_argument("--solver", metavar="PATH",
                   help="SMT solver binary or command")
    o.add_argument("--unroll", type=int, metavar="K",
                   help="loop unroll bound for equivalence checking")
    o.add_argument("--max-paths", type=int, metavar="N")
    o.add_argument("--timeout", type=float, metavar="SECONDS",
                   help="per-query solver timeout")
    o.add_argument("--token-budget", type=int, metavar="N")
    o.add_argument("--jobs", type=int, metavar="N",
                   help="units in flight (default: cpu count)")
    o.add_argument("--trust-uf-witness", action="store_true", default=None)
    o.add_argument("--strict-parse", action="store_true", default=None,
                   help="disable the lenient code-diff reply path")

    w = sub.add_parser("verify", parents=[common], help="typecheck and equivalence-check an "
                                      "(original, optimized) pair; no LLM")
    w.add_argument("original", metavar="ORIGINAL.dsol")
    w.add_argument("optimized", metavar="OPTIMIZED.dsol")
    w.add_argument("--function", action="append", metavar="NAME",
                   help="restrict to named functions (repeatable)")
    w.add_argument("--solver", metavar="PATH")
    w.add_argument("--unroll", type=int, default=2, metavar="K")
    w.add_argument("--max-paths", type=int, default=64, metavar="N")
    w.add_argument("--timeout", type=float, default=10.0, metavar="SECONDS")
    w.add_argument("--trust-uf-witness", action="store_true")

    s = sub.add_parser("score", parents=[common], help="score an optimize report against "
                                     "ground truth")
    s.add_argument("report", metavar="REPORT.json")
    s.add_argument("truth", metavar="TRUTH.json")
    s.add_argument("--recompile", metavar="COMMAND",
                   help="compiler command template; {file} is the "
                        "rendered unit")
    s.add_argument("--json", action="store_true",
                   help="print the metrics as JSON instead of a table")
    s.add_argument("-o", "--out", metavar="FILE",
                   help="also write the metrics JSON to a file")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    log = Logger(verbosity=args.verbose)
    handler = {
        "analyze": _cmd_analyze,
        "optimize": _cmd_optimize,
        "verify": _cmd_verify,
        "score": _cmd_score,
    }[args.command]
    try:
        return handler(args, log)
    except DecoptError as err:
        log(0, "error", kind=type(err).__name__, detail=str(err))
        return 1
    except OSError as err:
        log(0, "error", kind="os", detail=str(err))
        return 1


# ---------------------------------------------------------------------------
# analyze


def _cmd_analyze(args, log: Logger) -> int:
    from .cfg import build_cfg, export_edges
    from .depgraph import assemble_dg
    from .ir import lower_ir
    from .parser import parse_unit

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failures = 0
    for raw in args.inputs:
        path = Path(raw)
        try:
            unit = parse_unit(path.read_text())
        except (OSError, DecoptError) as err:
            log(0, "error", unit=path.stem, kind=type(err).__name__,
                detail=str(err))
            failures += 1
            continue
        module = lower_ir(unit)
        dg = assemble_dg(unit, module)
        dg_path = out / f"{path.stem}.dg.json"
        dg_path.write_text(dg.to_json() + "\n")
        cfg_payload = {
            fn.name: export_edges(build_cfg(fn)) for fn in module.functions
        }
        cfg_path = out / f"{path.stem}.cfg.json"
        cfg_path.write_text(json.dumps(cfg_payload, indent=2, sort_keys=True)
                            + "\n")
        log(0, "analyzed", unit=path.stem, nodes=len(dg.nodes),
            edges=len(dg.edges))
        print(f"{path.stem}: {len(dg.nodes)} nodes, {len(dg.edges)} edges "
              f"-> {dg_path}, {cfg_path}")
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# optimize


def _cmd_optimize(args, log: Logger) -> int:
    from . import pipeline as pl

    config = _build_config(args, pl)
    token = os.environ.get(config.token_env, "")
    log = Logger(verbosity=log.verbosity, redact=(token,), stream=log.stream)
    trace = None
    if log.verbosity >= 2:
        trace = lambda event: log(2, "prompt", **event)

    reports = pl.run_batch(list(args.inputs), config,
                           out_dir=args.out, trace=trace)
    failures = 0
    for rep in reports:
        if rep.error:
            failures += 1
            log(0, "unit_error", unit=rep.unit, detail=rep.error)
            print(f"{rep.unit}: error: {rep.error}")
            continue
        totals = rep.totals()
        log(1, "unit_done", unit=rep.unit, totals=totals,
            revisions=len(rep.revisions))
        accepted = totals["statuses"][pl.ACCEPTED]
        print(f"{rep.unit}: {accepted}/{totals['targets']} targets accepted, "
              f"{len(rep.revisions) - 1} revisions -> {rep.optimized_path}")
    return 1 if failures else 0


def _build_config(args, pl):
    if args.config:
        config = pl.RunConfig.from_json(args.config)
    else:
        config = pl.RunConfig()
    overrides = {}
    if args.provider is not None:
        overrides["provider"] = args.provider
    if args.scenario is not None:
        overrides["scenario"] = args.scenario
    if args.iterations is not None:
        overrides["iteration_limit"] = args.iterations
    if args.solver is not None:
        overrides["solver"] = args.solver
    if args.unroll is not None:
        overrides["loop_unroll"] = args.unroll
    if args.max_paths is not None:
        overrides["max_paths"] = args.max_paths
    if args.timeout is not None:
        overrides["solver_timeout_s"] = args.timeout
    if args.token_budget is not None:
        overrides["token_budget"] = args.token_budget
    if args.jobs is not None:
        overrides["parallel_units"] = args.jobs
    if args.trust_uf_witness is not None:
        overrides["trust_uf_witness"] = args.trust_uf_witness
    if args.strict_parse is not None:
        overrides["lenient_parse"] = not args.strict_parse
    return replace(config, **overrides) if overrides else config


# ---------------------------------------------------------------------------
# verify


def _cmd_verify(args, log: Logger) -> int:
    from .equivalence import check_equivalence
    from .ir import lower_ir
    from .parser import parse_unit
    from .smt import find_solver
    from .symexec import Bounds
    from .typecheck import check_unit

    original = parse_unit(Path(args.original).read_text())
    optimized = parse_unit(Path(args.optimized).read_text())
    old_module, new_module = lower_ir(original), lower_ir(optimized)

    report = check_unit(new_module)
    solver = find_solver(args.solver) if args.solver else None
    bounds = Bounds(loop_unroll=args.unroll, max_paths=args.max_paths)

    old_names = [f.name for f in old_module.functions]
    new_names = {f.name for f in new_module.functions}
    shared = [n for n in old_names if n in new_names]
    if args.function:
        missing = [n for n in args.function if n not in shared]
        if missing:
            log(0, "error", kind="unknown_function",
                detail=f"not in both units: {', '.join(missing)}")
            return 1
        shared = [n for n in shared if n in set(args.function)]

    verdicts = {}
    for name in shared:
        verdict = check_equivalence(
            old_module.function(name), old_module,
            new_module.function(name), new_module,
            bounds=bounds, solver=solver, timeout_s=args.timeout,
            trust_uf_witness=args.trust_uf_witness)
        verdicts[name] = verdict.to_json()
        log(1, "verdict", function=name, outcome=verdict.outcome)

    payload = {
        "original": str(args.original),
        "optimized": str(args.optimized),
        "typecheck": json.loads(report.to_json()),
        "functions": verdicts,
        "only_original": [n for n in old_names if n not in new_names],
        "only_optimized": sorted(new_names - set(old_names)),
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# score


def _cmd_score(args, log: Logger) -> int:
    from . import evalkit as ek

    truth = ek.load_ground_truth(args.truth)
    try:
        report = json.loads(Path(args.report).read_text())
    except json.JSONDecodeError as err:
        log(0, "error", kind="report", detail=f"invalid json: {err.msg}")
        return 1
    table = ek.score(report, truth)
    if args.recompile:
        optimized = Path(report["optimized"]).read_text()
        table.recompile = ek.recompile_check(optimized, args.recompile)
        log(1, "recompile", status=table.recompile.status)
    print(table.to_json() if args.json else table.text_table())
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(table.to_json() + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
