import random
from pathlib import Path

import pytest
import sympy as sp

from rop.jets import JetSpace
from rop.problem import parse_problem

PROBLEM_DIR = Path(__file__).resolve().parent.parent / "problems"


@pytest.fixture(scope="session")
def eq5():
    return parse_problem((PROBLEM_DIR / "eq5.rop").read_text())


@pytest.fixture(scope="session")
def dfkn2():
    return parse_problem((PROBLEM_DIR / "dfkn2.rop").read_text())


@pytest.fixture(scope="session")
def dfkn3():
    return parse_problem((PROBLEM_DIR / "dfkn3.rop").read_text())


@pytest.fixture()
def space():
    """Small three-variable jet space for kernel-level tests."""
    return JetSpace(["x", "y", "z"], max_order=4)


@pytest.fixture()
def rng():
    return random.Random(20240817)


def random_poly(rng, symbols, terms=4, degree=2):
    """Random integer polynomial; small and fast to cancel."""
    out = sp.Integer(rng.randint(-5, 5))
    for _ in range(terms):
        mon = sp.Integer(rng.randint(-5, 5))
        for _ in range(rng.randint(0, degree)):
            mon *= rng.choice(symbols)
        out += mon
    return out


def random_rational(rng, symbols, terms=3, degree=2):
    num = random_poly(rng, symbols, terms, degree)
    den = random_poly(rng, symbols, terms - 1, degree - 1) + sp.Integer(
        rng.randint(1, 7))
    if den == 0:
        den = sp.Integer(1)
    return num / den
