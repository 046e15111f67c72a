"""Acceptance criteria A1-A11 at their stated tolerances.

The whole suite runs once per session; each criterion then gets its own
test that prints the one-line verdict to the terminal and asserts it.
Run this file directly (``python tests/test_acceptance.py``) for the bare
verdict lines.
"""

import sys

import pytest

from homindex import trace_formula
from homindex.harness.acceptance import CRITERIA, PUBLIC_OPERATIONS, run_suite


@pytest.fixture(scope="module")
def suite():
    return run_suite(printer=None)


@pytest.mark.slow
@pytest.mark.parametrize("cid", list(CRITERIA))
def test_criterion(cid, suite, capsys):
    res = next(r for r in suite.results if r.cid == cid)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, "\n".join([res.line(), *res.details()])


@pytest.mark.slow
def test_every_public_operation_exercised(suite, capsys):
    total = sum(len(names) for names in PUBLIC_OPERATIONS.values())
    with capsys.disabled():
        print(f"\nCOVERAGE {'PASS' if not suite.missing else 'FAIL'} ({total - len(suite.missing)}/{total})")
    assert suite.missing == []


def test_mutated_constant_fails_a1(monkeypatch):
    original = trace_formula.c_constant

    def mutated(m, method="gamma"):
        return 0.6 if m == 1 else original(m, method)

    monkeypatch.setattr(trace_formula, "c_constant", mutated)
    result = run_suite(["A1"], printer=None)
    assert not result.passed
    assert "FAIL" in result.results[0].line()


def test_empty_selection_rejected():
    with pytest.raises(ValueError):
        run_suite([], printer=None)


def test_unknown_selection_rejected():
    with pytest.raises(ValueError):
        run_suite(["A0"], printer=None)


if __name__ == "__main__":
    sys.exit(0 if run_suite().passed else 1)
