"""Shared fixtures: corpus paths and a session-wide solver handle.

Solver resolution mirrors the library's own discovery order.  When
nothing is found and node.js is present, one `npm install` under
tools/solver is attempted so a fresh checkout can still run the
solver-backed tests.
"""

import subprocess
from pathlib import Path

import pytest

from decopt import smt
from decopt.errors import SolverUnavailable
from decopt.ir import lower_ir
from decopt.parser import parse_unit

FIXTURES = Path(__file__).resolve().parent / "fixtures"
REPO_ROOT = Path(__file__).resolve().parents[1]


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


def parse_fixture(name: str):
    return parse_unit(fixture_text(name))


def lower_fixture(name: str):
    return lower_ir(parse_fixture(name))


def _bootstrap_wrapper() -> bool:
    wrapper_dir = REPO_ROOT / "tools" / "solver"
    if not (wrapper_dir / "package.json").exists():
        return False
    if (wrapper_dir / "node_modules").exists():
        return True
    try:
        proc = subprocess.run(
            ["npm", "install", "--no-audit", "--no-fund"],
            cwd=wrapper_dir, capture_output=True, text=True, timeout=300)
    except (OSError, subprocess.TimeoutExpired):
        return False
    return proc.returncode == 0


@pytest.fixture(scope="session")
def solver():
    """A usable SolverCommand, or a skip when the host has none."""
    try:
        return smt.find_solver()
    except SolverUnavailable:
        pass
    if _bootstrap_wrapper():
        try:
            return smt.find_solver()
        except SolverUnavailable:
            pass
    pytest.skip("no SMT solver available: install z3/cvc5, set "
                "DECOPT_SOLVER, or run npm install under tools/solver")


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES
