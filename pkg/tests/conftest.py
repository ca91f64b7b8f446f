import pathlib

import pytest

DATA = pathlib.Path(__file__).parent / "data"
GOLDEN = pathlib.Path(__file__).parent / "golden"


def data(name: str) -> str:
    return (DATA / name).read_text()


def golden(name: str) -> str:
    return (GOLDEN / name).read_text()


@pytest.fixture(scope="session")
def counter_src() -> str:
    return data("counter.smala")


@pytest.fixture(scope="session")
def counter(counter_src):
    from smalite import load

    return load(counter_src)
