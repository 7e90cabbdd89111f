"""SMT-LIB v2 emission and external solver processes.

A formula built by the symbolic executor is printed as a standard
SMT-LIB v2 script: one `declare-fun` per free symbol and per
uninterpreted operation, one shared zero-argument `define-fun` per
compound subterm (so repeated subterms are emitted once), a single
`assert`, and `check-sat`.  Any conforming solver binary works; the
command is configurable and discovered in this order:

1. an explicit command string,
2. the DECOPT_SOLVER environment variable,
3. z3, cvc5, or cvc4 on PATH,
4. a node.js fallback script (tools/solver/z3smt.js in a source
   checkout) that evaluates the script with the z3 WebAssembly build.

Model values are fetched with a second run that appends `get-value`
over every symbol and every named uninterpreted application, which
sidesteps solver-specific `get-model` function syntax.
"""

from __future__ import annotations

import os
import shlex
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SolverUnavailable
from .symexec import (
    App, Lit, Sym, Term, WORD_MASK, collect_apps, collect_syms, eval_interp,
    is_uninterpreted,
)

_SMT_OPS = {
    "bvadd": "bvadd", "bvsub": "bvsub", "bvmul": "bvmul",
    "bvudiv": "bvudiv", "bvurem": "bvurem", "bvshl": "bvshl",
    "bvlshr": "bvlshr", "bvand": "bvand", "bvor": "bvor", "bvxor": "bvxor",
    "bvult": "bvult", "bvule": "bvule",
    "eq": "=", "and": "and", "or": "or", "xor": "xor", "not": "not",
    "ite": "ite",
}

_WORD_SORT = "(_ BitVec 256)"


def _symbol(name: str) -> str:
    plain = name and (name[0].isalpha() or name[0] == "_") and all(
        c.isalnum() or c == "_" for c in name)
    return name if plain else f"|{name}|"


def _sort(sort: str) -> str:
    return "Bool" if sort == "bool" else _WORD_SORT


def _lit(t: Lit) -> str:
    if t.sort == "bool":
        return "true" if t.value else "false"
    return f"#x{int(t.value) & WORD_MASK:064x}"


@dataclass
class EmittedFormula:
    script: str
    sym_names: list[str]
    app_names: dict[Term, str]
    apps: list[Term]

    def value_names(self) -> list[str]:
        names = list(self.sym_names)
        names.extend(self.app_names[t] for t in self.apps
                     if is_uninterpreted(t.op))
        return names


def emit(phi: Term) -> EmittedFormula:
    """Render a bool-sorted term as a full SMT-LIB v2 script."""
    syms: dict[str, Sym] = {}
    collect_syms(phi, syms)
    apps: dict[Term, None] = {}
    collect_apps(phi, apps)

    names: dict[Term, str] = {}
    ufs: dict[str, int] = {}
    lines = ["(set-option :produce-models true)", "(set-logic QF_UFBV)"]
    for name in sorted(syms):
        lines.append(f"(declare-fun {_symbol(name)} () "
                     f"{_sort(syms[name].sort)})")
    for t in apps:
        if is_uninterpreted(t.op) and t.op not in ufs:
            ufs[t.op] = len(t.args)
    for op in sorted(ufs):
        doms = " ".join([_WORD_SORT] * ufs[op])
        lines.append(f"(declare-fun {_symbol(op)} ({doms}) {_WORD_SORT})")

    def ref(t: Term) -> str:
        if isinstance(t, Lit):
            return _lit(t)
        if isinstance(t, Sym):
            return _symbol(t.name)
        return names[t]

    ordered = list(apps)
    for i, t in enumerate(ordered):
        name = f"e{i}"
        op = _symbol(t.op) if is_uninterpreted(t.op) else _SMT_OPS[t.op]
        body = "(" + " ".join([op] + [ref(a) for a in t.args]) + ")"
        lines.append(f"(define-fun {name} () {_sort(t.sort)} {body})")
        names[t] = name

    lines.append(f"(assert {ref(phi)})")
    lines.append("(check-sat)")
    return EmittedFormula(
        script="\n".join(lines) + "\n",
        sym_names=sorted(syms),
        app_names=names,
        apps=ordered,
    )


# ---------------------------------------------------------------------------
# solver commands


@dataclass(frozen=True)
class SolverCommand:
    name: str
    argv: tuple[str, ...]

    def run_args(self, path: str) -> list[str]:
        return [*self.argv, path]


def _command_for_binary(path: str) -> SolverCommand:
    base = Path(path).name.lower()
    if base.startswith("z3"):
        return SolverCommand("z3", (path, "-smt2"))
    if base.startswith("cvc"):
        return SolverCommand(base, (path, "--lang", "smt2"))
    return SolverCommand(base or "solver", (path,))


def bundled_wrapper() -> Path | None:
    """Locate the node z3 wrapper when running from a source checkout."""
    override = os.environ.get("DECOPT_SOLVER_WRAPPER")
    if override:
        p = Path(override)
        return p if p.exists() else None
    root = Path(__file__).resolve().parents[2]
    candidate = root / "tools" / "solver" / "z3smt.js"
    if candidate.exists():
        return candidate
    return None


def find_solver(explicit: str | None = None) -> SolverCommand:
    """Resolve a solver command, raising SolverUnavailable when none fits."""
    spec = explicit or os.environ.get("DECOPT_SOLVER")
    if spec:
        parts = shlex.split(spec)
        head = shutil.which(parts[0]) or parts[0]
        if not Path(head).exists():
            raise SolverUnavailable(f"solver command not found: {spec!r}")
        if len(parts) == 1:
            return _command_for_binary(head)
        return SolverCommand(Path(parts[0]).name, (head, *parts[1:]))
    for binary in ("z3", "cvc5", "cvc4"):
        found = shutil.which(binary)
        if found:
            return _command_for_binary(found)
    wrapper = bundled_wrapper()
    if wrapper is not None:
        node = shutil.which("node")
        if node and (wrapper.parent / "node_modules").exists():
            return SolverCommand("z3-wasm", (node, str(wrapper)))
    raise SolverUnavailable(
        "no SMT solver found: install z3/cvc5, set DECOPT_SOLVER, or run "
        "npm install under tools/solver")


@dataclass
class SolverReply:
    status: str                      # sat | unsat | unknown | timeout | error
    values: dict[str, object] = field(default_factory=dict)
    output: str = ""


def run_script(script: str, command: SolverCommand, timeout_s: float
               ) -> SolverReply:
    with tempfile.NamedTemporaryFile(
            "w", suffix=".smt2", prefix="decopt-", delete=False) as handle:
        handle.write(script)
        path = handle.name
    try:
        proc = subprocess.run(
            command.run_args(path), capture_output=True, text=True,
            timeout=timeout_s)
        out = proc.stdout + "\n" + proc.stderr
    except subprocess.TimeoutExpired:
        return SolverReply(status="timeout")
    except OSError as exc:
        raise SolverUnavailable(f"cannot launch {command.name}: {exc}")
    finally:
        try:
            os.unlink(path)
        except OSError:
            pass
    status = "error"
    for line in out.splitlines():
        token = line.strip()
        if token in ("sat", "unsat", "unknown"):
            status = token
            break
    return SolverReply(status=status, values=_parse_values(out), output=out)


def solve(phi_script: EmittedFormula, command: SolverCommand,
          timeout_s: float) -> SolverReply:
    """check-sat, then a second run for values when satisfiable."""
    first = run_script(phi_script.script, command, timeout_s)
    if first.status != "sat":
        return first
    names = phi_script.value_names()
    if not names:
        return first
    listing = " ".join(_symbol(n) for n in names)
    script = phi_script.script + f"(get-value ({listing}))\n"
    second = run_script(script, command, timeout_s)
    if second.status == "sat" and second.values:
        return second
    return first


# ---------------------------------------------------------------------------
# model parsing


def _tokenize(text: str):
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            yield c
            i += 1
        elif c == "|":
            j = text.index("|", i + 1)
            yield text[i + 1:j]
            i = j + 1
        elif c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            yield text[i:j + 1]
            i = j + 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()|;":
                j += 1
            yield text[i:j]
            i = j


def parse_sexprs(text: str) -> list:
    """All top-level s-expressions in a text, atoms as plain strings."""
    stack: list[list] = [[]]
    for tok in _tokenize(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                continue
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    return stack[0]


def parse_value(expr) -> object | None:
    if isinstance(expr, str):
        if expr.startswith("#x"):
            return int(expr[2:], 16)
        if expr.startswith("#b"):
            return int(expr[2:], 2)
        if expr == "true":
            return True
        if expr == "false":
            return False
        if expr.isdigit():
            return int(expr)
        return None
    if (isinstance(expr, list) and len(expr) == 3 and expr[0] == "_"
            and isinstance(expr[1], str) and expr[1].startswith("bv")):
        return int(expr[1][2:])
    return None


def _parse_values(output: str) -> dict[str, object]:
    values: dict[str, object] = {}
    for expr in parse_sexprs(output):
        if not isinstance(expr, list):
            continue
        pairs = [e for e in expr
                 if isinstance(e, list) and len(e) == 2
                 and isinstance(e[0], str)]
        if pairs and len(pairs) == len(expr):
            for name, raw in pairs:
                v = parse_value(raw)
                if v is not None:
                    values[name] = v
    return values


# ---------------------------------------------------------------------------
# witness assembly


def assignment_from_model(emitted: EmittedFormula,
                          values: dict[str, object]
                          ) -> tuple[dict[str, int], dict[tuple, int]]:
    """Symbol assignment and uninterpreted-application table for replay.

    Interpreted subterms are re-evaluated bottom-up so every recorded
    table entry is keyed by the concrete argument values the replay
    interpreter will actually present.
    """
    syms = {name: int(values.get(name, 0)) for name in emitted.sym_names}
    table: dict[tuple, int] = {}
    memo: dict[Term, object] = {}

    def ev(t: Term):
        if isinstance(t, Lit):
            return t.value
        if isinstance(t, Sym):
            raw = values.get(t.name, 0)
            return bool(raw) if t.sort == "bool" else int(raw)
        if t in memo:
            return memo[t]
        args = [ev(a) for a in t.args]
        if is_uninterpreted(t.op):
            name = emitted.app_names[t]
            v = int(values.get(name, 0)) & WORD_MASK
            key = (t.op, tuple(int(a) & WORD_MASK for a in args))
            table[key] = v
            out: object = v
        else:
            out = eval_interp(t.op, args)
        memo[t] = out
        return out

    for t in emitted.apps:
        ev(t)
    return syms, table
