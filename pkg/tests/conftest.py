import pytest

from flamesmith.specfile import parse_spec

SPEC_TEXT = """\
op polyeval
var y : scalar, out
var a : vector(n), in
var x : scalar, in
var k : scalar, index
pre: 0 <= n
post: y = sum(i, 0, n-1, a[i] * x^i)
"""


@pytest.fixture(scope="session")
def polyeval():
    return parse_spec(SPEC_TEXT)


@pytest.fixture(scope="session")
def spec_text():
    return SPEC_TEXT


@pytest.fixture(scope="session")
def horner_indexed(polyeval):
    from flamesmith.worksheet import derive

    return derive(polyeval, 5, "indexed", trials=200, seed=42)


@pytest.fixture(scope="session")
def horner_flame(polyeval):
    from flamesmith.worksheet import derive

    return derive(polyeval, 5, "flame", trials=200, seed=42)


@pytest.fixture(scope="session")
def repo_root():
    from pathlib import Path

    return Path(__file__).resolve().parent.parent
