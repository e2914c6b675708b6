"""Acceptance criteria 1-9, one printed pass/fail line each."""
import pytest

from qubitdist.verify import CRITERIA


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    result = CRITERIA[number]()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.detail
