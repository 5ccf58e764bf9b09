import itertools

import numpy as np
import pytest
import sympy as sp

from ljet.problem import load_problem


@pytest.fixture(scope="session")
def examples():
    return {n: load_problem(f"example{n}") for n in range(1, 6)}


def random_poly(rng, symbols, degree=2, terms=3, coeff=3):
    """Random polynomial with small integer coefficients."""
    monomials = [m for d in range(degree + 1)
                 for m in itertools.combinations_with_replacement(symbols, d)]
    picks = rng.choice(len(monomials), size=min(terms, len(monomials)), replace=False)
    out = sp.Integer(0)
    for i in picks:
        c = int(rng.integers(-coeff, coeff + 1))
        out += c * sp.Mul(*monomials[i])
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one PASS/FAIL line per acceptance criterion, printed after the run
_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None and (rep.when == "call" or rep.failed):
        number, title = mark.args
        ok = rep.passed and _criteria.get(number, (title, True))[1]
        _criteria[number] = (title, ok)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_criteria):
        title, ok = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
