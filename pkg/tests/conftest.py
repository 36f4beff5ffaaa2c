from pathlib import Path

import pytest

from eb2jml import parse_machine

TESTS_DIR = Path(__file__).resolve().parent
MACHINES_DIR = TESTS_DIR.parent / "machines"
GOLDEN_DIR = TESTS_DIR / "golden"


def load_machine(name: str):
    return parse_machine((MACHINES_DIR / name).read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def social_abstract():
    return load_machine("social_abstract.ebm")


@pytest.fixture(scope="session")
def social_ref1():
    return load_machine("social_ref1.ebm")


@pytest.fixture(scope="session")
def counter():
    return load_machine("counter.ebm")


@pytest.fixture(scope="session")
def swap():
    return load_machine("swap.ebm")
