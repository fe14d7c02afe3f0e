import sys
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kaidd.ldpc_code import ParityCheckMatrix, peg_construct  # noqa: E402


@lru_cache(maxsize=None)
def _peg(N, M, dv, seed):
    return peg_construct(N, M, dv, seed=seed)


@pytest.fixture(scope="session")
def code96():
    """(3,6)-regular PEG code, N=96."""
    return _peg(96, 48, 3, 0)


@pytest.fixture(scope="session")
def code1000():
    """The N=1000, rate-1/2, girth-6 evaluation code."""
    return _peg(1000, 500, 3, None)


@pytest.fixture(scope="session")
def tree_code():
    # cycle-free: 5 checks, 11 variables, each check shares at most one variable
    rows = [[0, 1, 2], [2, 3, 4], [4, 5, 6], [1, 7, 8], [6, 9, 10]]
    return ParityCheckMatrix.from_rows(rows, 11)


def random_small_H(rng, max_nodes=30):
    """Random binary H with no empty rows/columns and M + N <= max_nodes."""
    while True:
        M = int(rng.integers(2, 9))
        N = int(rng.integers(3, max_nodes - M + 1))
        A = (rng.random((M, N)) < rng.uniform(0.2, 0.5)).astype(np.uint8)
        if A.any(axis=0).all() and A.any(axis=1).all():
            return A


# ---------------------------------------------------------------- acceptance report

ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
