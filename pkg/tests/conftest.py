"""Shared fixtures for the choiforge test suite."""

import logging
from pathlib import Path

import numpy as np
import pytest

import choiforge
from choiforge.choi.io import load_choi
from choiforge.core.tensor_core import HermitianOperator
from choiforge.sdp.certificates import Certificate, CertificateEngine
from choiforge.sdp.conic import ExtendSide, SolveStatus, SolverOptions

FIXTURES = Path(choiforge.__file__).parent / "fixtures"


@pytest.fixture(autouse=True)
def _restore_root_logging():
    """setup_logging replaces root handlers; put pytest's back afterwards"""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def choi_map():
    return load_choi(FIXTURES / "choi_map.json")


@pytest.fixture
def swap_d2():
    return load_choi(FIXTURES / "transposition_d2.json")


@pytest.fixture
def swap_d3():
    return load_choi(FIXTURES / "transposition_d3.json")


@pytest.fixture
def identity_d3():
    return load_choi(FIXTURES / "identity_d3.json")


@pytest.fixture
def solver_options():
    return SolverOptions()


@pytest.fixture
def engine(solver_options):
    return CertificateEngine(solver_options)


class ScriptedEngine:
    """
    Certificate engine stand-in returning fixed values.
    zeta1 and zetak are callables of the 1-based call count, or constants;
    None makes that certificate fail.
    """

    def __init__(self, zeta1=0.0, zetak=0.0, options=None):
        self.options = options or SolverOptions()
        self._values = {1: zeta1, "k": zetak}
        self.calls = {1: 0, "k": 0}

    def zeta(self, choi, k):
        key = 1 if k == 1 else "k"
        self.calls[key] += 1
        value = self._values[key]
        if callable(value):
            value = value(self.calls[key])
        n = choi.array.shape[0]
        if value is None:
            return Certificate(float("nan"), None, SolveStatus.FAILED, k, 0.0)
        witness = HermitianOperator(np.eye(n) / n)
        return Certificate(float(value), witness, SolveStatus.OPTIMAL, k, 0.0, ExtendSide.SECOND)


@pytest.fixture
def scripted_engine():
    return ScriptedEngine
