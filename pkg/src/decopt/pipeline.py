"""The optimize, verify, feed-back loop over one decompiled unit.

For every enumerated target the loop assembles a prompt from the
dependency graph, submits it to the configured provider, parses the
reply into edits, applies them to a snapshot copy, and verifies the
result: static type rules first, then program-behavior equivalence per
touched function.  A verified edit set advances the unit to a new
immutable revision; a rejected one is reported back to the provider as
verifier feedback and the loop retries until the iteration limit.

Statuses an outcome can end in:

* Accepted: edits verified (or the reply proposed no edits);
* RejectedViolations: the limit was reached and the last attempt broke
  type rules or could not be applied;
* RejectedNonEquivalent: the limit was reached and the last attempt
  changed program behavior;
* Inconclusive: equivalence could not be decided (bounds or solver);
  retrying cannot fix that, so the loop stops early;
* MalformedReply: the reply carried no usable edit list; recorded, not
  retried, and never a crash;
* ProviderFailure: transport or auth failure after provider retries.

Targets run in a fixed order: every type target, then every attribute
target, then every boundary target, so span-changing splits come last
and cannot invalidate references held by earlier targets.  Attribute
edits only touch annotation comments, which are not executable, so
they skip the equivalence stage.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .depgraph import assemble_dg
from .edits import EditSet, SetAttribute, apply_edits, parse_edits
from .equivalence import EquivalenceVerdict, check_equivalence
from .errors import (
    ArityMismatch, AuthError, BudgetExceeded, DecoptError, EditConflict,
    EmptySlice, ParseError, ProviderUnavailable, SchemaError, SolverUnavailable,
    SymExecError, UnknownFunction,
)
from .ir import lower_ir
from .llm import HttpProvider, MockProvider, ProviderConfig
from .parser import parse_unit
from .prompts import (
    ContractAttribute, DEFAULT_TOKEN_BUDGET, FunctionBoundary,
    OptimizationTarget, VariableType, build_bundle,
)
from .smt import SolverCommand, find_solver
from .symexec import Bounds
from .typecheck import ViolationReport, check_unit
from . import syntax as syn

ACCEPTED = "Accepted"
REJECTED_VIOLATIONS = "RejectedViolations"
REJECTED_NONEQUIVALENT = "RejectedNonEquivalent"
INCONCLUSIVE = "Inconclusive"
MALFORMED_REPLY = "MalformedReply"
PROVIDER_FAILURE = "ProviderFailure"

STATUSES = (ACCEPTED, REJECTED_VIOLATIONS, REJECTED_NONEQUIVALENT,
            INCONCLUSIVE, MALFORMED_REPLY, PROVIDER_FAILURE)


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    provider: str = "mock"
    scenario: dict | str | None = None
    endpoint: str = ""
    model: str = ""
    token_env: str = "DECOPT_API_TOKEN"
    http_timeout: float = 60.0
    retries: int = 3
    context_limit: int = 128_000
    iteration_limit: int = 3
    token_budget: int = DEFAULT_TOKEN_BUDGET
    loop_unroll: int = 2
    max_paths: int = 64
    solver: str | None = None
    solver_timeout_s: float = 10.0
    trust_uf_witness: bool = False
    lenient_parse: bool = True
    parallel_units: int = 0

    _FIELDS = (
        "provider", "scenario", "endpoint", "model", "token_env",
        "http_timeout", "retries", "context_limit", "iteration_limit",
        "token_budget", "loop_unroll", "max_paths", "solver",
        "solver_timeout_s", "trust_uf_witness", "lenient_parse",
        "parallel_units",
    )

    def __post_init__(self):
        if self.iteration_limit < 1:
            raise SchemaError("iteration_limit", "must be at least 1")
        if self.provider not in ("mock", "http"):
            raise SchemaError("provider", f"unknown provider {self.provider!r}")
        if isinstance(self.scenario, str):
            self.scenario = _load_json(self.scenario, "scenario")

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        data = _load_json(path, "config")
        if not isinstance(data, dict):
            raise SchemaError("$", "config must be a json object")
        unknown = set(data) - set(cls._FIELDS)
        if unknown:
            raise SchemaError(sorted(unknown)[0], "unknown config field")
        return cls(**data)

    def bounds(self) -> Bounds:
        return Bounds(loop_unroll=self.loop_unroll, max_paths=self.max_paths)

    def make_provider(self):
        if self.provider == "mock":
            scenario = self.scenario if isinstance(self.scenario, dict) else {}
            return MockProvider(scenario)
        return HttpProvider(ProviderConfig(
            endpoint=self.endpoint, model=self.model,
            token_env=self.token_env, timeout=self.http_timeout,
            retries=self.retries, context_limit=self.context_limit))

    def solver_command(self) -> SolverCommand | None:
        """Resolve an explicitly configured solver now; defer discovery
        otherwise so folded-away formulas never need one installed."""
        return find_solver(self.solver) if self.solver else None


def _load_json(path, what: str):
    try:
        return json.loads(Path(path).read_text())
    except OSError as err:
        raise SchemaError(str(path), f"cannot read {what}: {err}")
    except json.JSONDecodeError as err:
        raise SchemaError(str(path), f"invalid json in {what}: {err.msg}")


# ---------------------------------------------------------------------------
# outcome records


@dataclass
class IterationRecord:
    prompt_hash: str
    prompt_tokens: int
    latency_s: float
    edits: list | None = None
    violations: list | None = None
    verdicts: dict | None = None
    note: str = ""

    def to_dict(self) -> dict:
        out: dict = {
            "prompt_hash": self.prompt_hash,
            "prompt_tokens": self.prompt_tokens,
            "latency_s": round(self.latency_s, 6),
        }
        if self.edits is not None:
            out["edits"] = self.edits
        if self.violations is not None:
            out["violations"] = self.violations
        if self.verdicts is not None:
            out["verdicts"] = self.verdicts
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class OptimizationOutcome:
    target: OptimizationTarget
    status: str
    iterations: list[IterationRecord] = field(default_factory=list)
    revision: str | None = None
    note: str = ""

    def to_dict(self) -> dict:
        out = {
            "target": self.target.to_dict(),
            "target_id": self.target.target_id,
            "status": self.status,
            "iterations": [r.to_dict() for r in self.iterations],
        }
        if self.revision:
            out["revision"] = self.revision
        if self.note:
            out["note"] = self.note
        return out


def revision_id(unit: syn.SourceUnit) -> str:
    return hashlib.sha256(syn.canonical(unit).encode()).hexdigest()


# ---------------------------------------------------------------------------
# target enumeration


def enumerate_targets(unit: syn.SourceUnit) -> list[OptimizationTarget]:
    """Types for every declared variable, attributes for every storage
    variable, a boundary target per function; types, attributes,
    boundaries in that order."""
    targets: list[OptimizationTarget] = []
    for d in unit.storage:
        targets.append(OptimizationTarget(kind=VariableType, name=d.name))
    for fn in unit.functions:
        for p in fn.params:
            targets.append(OptimizationTarget(
                kind=VariableType, name=p.name, fn=fn.name))
        for _, stmt in syn.preorder_statements(fn):
            if isinstance(stmt, syn.VarDecl):
                targets.append(OptimizationTarget(
                    kind=VariableType, name=stmt.name, fn=fn.name))
    for d in unit.storage:
        targets.append(OptimizationTarget(kind=ContractAttribute, name=d.name))
    for fn in unit.functions:
        targets.append(OptimizationTarget(kind=FunctionBoundary, name=fn.name))
    return targets


# ---------------------------------------------------------------------------
# the repair loop


@dataclass
class _TargetView:
    """What the edit parser needs to scope and diff a reply."""
    kind: str
    name: str
    fn: str | None
    unit: syn.SourceUnit | None


def _changed_functions(old: syn.SourceUnit, new: syn.SourceUnit) -> list[str]:
    texts_old = {f.name: "\n".join(syn._function_lines(f))
                 for f in old.functions}
    texts_new = {f.name: "\n".join(syn._function_lines(f))
                 for f in new.functions}
    return sorted(name for name in texts_old
                  if name in texts_new and texts_old[name] != texts_new[name])


def _violation_scope(edits: EditSet, unit: syn.SourceUnit):
    """Function names whose violations can reject this edit set.

    Edits on storage declarations ripple everywhere (storage types are
    read by every function), so they widen the scope to the whole unit.
    """
    storage = unit.storage_names()
    names: set[str] = set()
    for e in edits:
        touched = getattr(e, "name", None) or getattr(e, "old", None)
        if touched in storage:
            return None  # whole unit
        if getattr(e, "host", None):
            names.add(e.host)
        elif edits.fn:
            names.add(edits.fn)
        else:
            return None
    return names


def optimize_target(unit: syn.SourceUnit, target: OptimizationTarget,
                    config: RunConfig, provider,
                    solver: SolverCommand | None = None,
                    trace=None) -> tuple[OptimizationOutcome, syn.SourceUnit]:
    """Run the repair loop for one target; returns the outcome and the
    unit revision to continue from (unchanged unless Accepted).

    `trace`, when given, receives one event dict per submitted prompt.
    """
    module = lower_ir(unit)
    dg = assemble_dg(unit, module)
    records: list[IterationRecord] = []
    feedback = ""
    last_reject = REJECTED_VIOLATIONS

    def done(status: str, revision: str | None = None,
             note: str = "") -> OptimizationOutcome:
        assert len(records) <= config.iteration_limit
        return OptimizationOutcome(target=target, status=status,
                                   iterations=records, revision=revision,
                                   note=note)

    for _ in range(config.iteration_limit):
        try:
            bundle = build_bundle(dg, target, config.token_budget, feedback)
        except (EmptySlice, UnknownFunction) as err:
            # nothing to present to the provider: leave the target as-is
            return done(ACCEPTED, revision_id(unit),
                        note=f"no dependency context: {err}"), unit
        if trace is not None:
            trace({"event": "prompt", "target": target.target_id,
                   "iteration": len(records) + 1,
                   "hash": bundle.prompt_hash,
                   "tokens": bundle.estimated_tokens,
                   "text": bundle.text()})
        started = time.monotonic()
        try:
            raw = provider.submit(bundle.text(), target.target_id)
        except (ProviderUnavailable, AuthError, BudgetExceeded) as err:
            records.append(IterationRecord(
                prompt_hash=bundle.prompt_hash,
                prompt_tokens=bundle.estimated_tokens,
                latency_s=time.monotonic() - started,
                note=f"provider: {err}"))
            return done(PROVIDER_FAILURE), unit
        record = IterationRecord(
            prompt_hash=bundle.prompt_hash,
            prompt_tokens=bundle.estimated_tokens,
            latency_s=raw.latency or (time.monotonic() - started))
        records.append(record)

        view = _TargetView(kind=target.kind, name=target.name, fn=target.fn,
                           unit=unit if config.lenient_parse else None)
        edits = parse_edits(raw.text, target=view)
        record.edits = json.loads(edits.to_json())
        if edits.malformed:
            record.note = edits.note
            return done(MALFORMED_REPLY), unit
        if not list(edits):
            record.note = "no edits proposed"
            return done(ACCEPTED, revision_id(unit)), unit

        try:
            candidate = apply_edits(unit, edits)
        except EditConflict as err:
            record.note = f"apply failed: {err}"
            feedback = (f"The proposed edits could not be applied: {err}. "
                        f"Reply with a corrected edit list.")
            last_reject = REJECTED_VIOLATIONS
            continue

        report = check_unit(lower_ir(candidate))
        scope = _violation_scope(edits, unit)
        relevant = [v for v in report.sorted()
                    if scope is None or v.fn in scope]
        record.violations = [v.to_dict() for v in relevant]
        if relevant:
            feedback = ViolationReport(list(relevant)).feedback_text()
            last_reject = REJECTED_VIOLATIONS
            continue

        if all(isinstance(e, SetAttribute) for e in edits):
            return done(ACCEPTED, revision_id(candidate)), candidate

        old_module, new_module = module, lower_ir(candidate)
        verdicts: dict[str, EquivalenceVerdict] = {}
        for name in _changed_functions(unit, candidate):
            ofn, nfn = old_module.function(name), new_module.function(name)
            if ofn is None or nfn is None:
                continue
            try:
                verdicts[name] = check_equivalence(
                    ofn, old_module, nfn, new_module, edits=edits,
                    bounds=config.bounds(), solver=solver,
                    timeout_s=config.solver_timeout_s,
                    trust_uf_witness=config.trust_uf_witness)
            except (SolverUnavailable, SymExecError, ArityMismatch) as err:
                record.verdicts = {k: v.to_json() for k, v in verdicts.items()}
                record.note = (f"equivalence unavailable for {name}: "
                               f"{type(err).__name__}: {err}")
                return done(INCONCLUSIVE), unit
            if verdicts[name].outcome != "Equivalent":
                break
        record.verdicts = {k: v.to_json() for k, v in verdicts.items()}
        bad = [(k, v) for k, v in verdicts.items()
               if v.outcome == "NonEquivalent"]
        open_ended = [(k, v) for k, v in verdicts.items()
                      if v.outcome == "Inconclusive"]
        if bad:
            name, verdict = bad[0]
            w = verdict.witness
            feedback = (f"The edited function {name} changes program "
                        f"behavior.")
            if w is not None:
                feedback = (
                    f"The edited function {name} changes program behavior: "
                    f"observable {w.differs[0]} becomes {w.differs[2]} "
                    f"instead of {w.differs[1]} under inputs "
                    f"{json.dumps(w.inputs, sort_keys=True)}.")
            feedback += " Reply with edits that preserve behavior."
            last_reject = REJECTED_NONEQUIVALENT
            continue
        if open_ended:
            record.note = (f"equivalence undecided for {open_ended[0][0]}: "
                           f"{open_ended[0][1].reason}")
            return done(INCONCLUSIVE), unit

        return done(ACCEPTED, revision_id(candidate)), candidate

    return done(last_reject), unit


# ---------------------------------------------------------------------------
# unit and batch runs


@dataclass
class RunReport:
    unit: str
    input_path: str
    revisions: list[str] = field(default_factory=list)
    outcomes: list[OptimizationOutcome] = field(default_factory=list)
    skipped_functions: list[dict] = field(default_factory=list)
    optimized_path: str | None = None
    report_path: str | None = None
    error: str | None = None
    wall_time_s: float = 0.0

    def totals(self) -> dict:
        statuses = {s: 0 for s in STATUSES}
        tokens = 0
        latency = 0.0
        iterations = 0
        for o in self.outcomes:
            statuses[o.status] += 1
            for r in o.iterations:
                tokens += r.prompt_tokens
                latency += r.latency_s
                iterations += 1
        n = len(self.outcomes)
        return {
            "targets": n,
            "iterations": iterations,
            "statuses": statuses,
            "prompt_tokens": tokens,
            "avg_tokens": round(tokens / n, 2) if n else None,
            "avg_time_s": round(self.wall_time_s / n, 4) if n else None,
            "wall_time_s": round(self.wall_time_s, 4),
            "provider_latency_s": round(latency, 6),
        }

    def to_json(self) -> str:
        body = {
            "unit": self.unit,
            "input": self.input_path,
            "revisions": self.revisions,
            "outcomes": [o.to_dict() for o in self.outcomes],
            "totals": self.totals(),
        }
        if self.skipped_functions:
            body["skipped_functions"] = self.skipped_functions
        if self.optimized_path:
            body["optimized"] = self.optimized_path
        if self.error:
            body["error"] = self.error
        return json.dumps(body, indent=2, sort_keys=True)


def run_unit(path: str | Path, config: RunConfig,
             out_dir: str | Path | None = None, trace=None) -> RunReport:
    path = Path(path)
    report = RunReport(unit=path.stem, input_path=str(path))
    started = time.monotonic()
    try:
        text = path.read_text()
    except OSError as err:
        report.error = f"cannot read {path}: {err}"
        return report
    try:
        unit = parse_unit(text, strict=not config.lenient_parse)
    except (ParseError, DecoptError) as err:
        report.error = f"parse: {err}"
        return report
    report.skipped_functions = [
        {"name": s.function, "line": s.position[0], "reason": s.reason}
        for s in unit.skips]

    initial = revision_id(unit)
    report.revisions.append(initial)
    try:
        provider = config.make_provider()
        solver = config.solver_command()
        for target in enumerate_targets(unit):
            outcome, unit = optimize_target(unit, target, config, provider,
                                            solver, trace=trace)
            report.outcomes.append(outcome)
            if (outcome.status == ACCEPTED and outcome.revision
                    and outcome.revision != report.revisions[-1]):
                report.revisions.append(outcome.revision)
    except DecoptError as err:
        report.error = f"{type(err).__name__}: {err}"
    report.wall_time_s = time.monotonic() - started

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        optimized = out / f"{path.stem}.optimized.dsol"
        # byte-identical passthrough when nothing was accepted
        if report.revisions[-1] == initial:
            optimized.write_text(text)
        else:
            optimized.write_text(syn.canonical(unit))
        report.optimized_path = str(optimized)
        report_file = out / f"{path.stem}.report.json"
        report_file.write_text(report.to_json() + "\n")
        report.report_path = str(report_file)
    return report


def run_batch(paths, config: RunConfig,
              out_dir: str | Path | None = None,
              trace=None) -> list[RunReport]:
    workers = config.parallel_units or os.cpu_count() or 1
    if workers == 1 or len(paths) == 1:
        return [run_unit(p, config, out_dir, trace=trace) for p in paths]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_unit, p, config, out_dir, trace=trace)
                   for p in paths]
        return [f.result() for f in futures]
