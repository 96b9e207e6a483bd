import sys
from pathlib import Path

import numpy as np
import pytest

from stochham.systems import harmonic_field, kubo_field, random_hamiltonian_system

ROOT = Path(__file__).resolve().parents[1]
FIELDS = ROOT / "fields"
GOLDEN = Path(__file__).resolve().parent / "golden"


@pytest.fixture
def kubo():
    return kubo_field(a=1.0, s=0.5)


@pytest.fixture
def harmonic():
    return harmonic_field()


def random_systems(count=50, seed=2024, degree=4):
    """The acceptance population: d <= 3, n <= 2, degree <= 4, coefficients in [-2, 2]."""
    rng = np.random.default_rng(seed)
    return [random_hamiltonian_system(rng, degree=degree) for _ in range(count)]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.LINES):
        terminalreporter.write_line(mod.LINES[number])
