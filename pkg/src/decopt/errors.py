"""Exception types shared across the pipeline.

Every stage raises from this vocabulary so the CLI can map failures to
exit codes without fishing through module internals.
"""

from __future__ import annotations


class DecoptError(Exception):
    """Base class for everything this package raises on purpose."""


# ---------------------------------------------------------------- frontend


class ParseError(DecoptError):
    def __init__(self, position: tuple[int, int], expected, found: str = ""):
        self.position = position
        self.expected = tuple(expected) if not isinstance(expected, str) else (expected,)
        self.found = found
        want = ", ".join(self.expected)
        at = f"line {position[0]}, col {position[1]}"
        msg = f"expected {want} at {at}"
        if found:
            msg += f", found {found!r}"
        super().__init__(msg)


class LoweringError(DecoptError):
    """A syntax-tree form the lowering pass has no translation for."""


class ConsistencyError(DecoptError):
    """Internal invariant broke (dangling label, bad span, duplicate temp)."""


# ---------------------------------------------------------------- graphs


class UnknownNode(DecoptError):
    pass


class UnknownFunction(DecoptError):
    pass


class EmptySlice(DecoptError):
    pass


# ---------------------------------------------------------------- prompts


class UnsupportedKind(DecoptError):
    pass


class MissingTemplate(DecoptError):
    def __init__(self, label: str, shape: str):
        self.label = label
        self.shape = shape
        super().__init__(f"no template row for edge label {label} with shape {shape!r}")


class BudgetExceeded(DecoptError):
    pass


# ---------------------------------------------------------------- llm bridge


class ProviderUnavailable(DecoptError):
    pass


class AuthError(DecoptError):
    pass


class EditConflict(DecoptError):
    pass


class SchemaError(DecoptError):
    """A JSON document (config, scenario, edit list) failed validation.

    Carries the offending path so CLI errors point somewhere useful.
    """

    def __init__(self, path: str, detail: str):
        self.path = path
        self.detail = detail
        super().__init__(f"{path}: {detail}")


# ---------------------------------------------------------------- typing


class NotIndexable(DecoptError):
    pass


class NotCallable(DecoptError):
    pass


# ---------------------------------------------------------------- equivalence


class SymExecError(DecoptError):
    """The symbolic executor met a value or opcode it cannot model."""


class ArityMismatch(DecoptError):
    pass


class SolverUnavailable(DecoptError):
    pass


# ---------------------------------------------------------------- evalkit


class SchemaMismatch(DecoptError):
    """Ground-truth file talks about entities the unit does not have."""


class CommandNotConfigured(DecoptError):
    pass
