"""End-to-end acceptance criteria; each prints one PASS/FAIL line (run with -s to see them)."""
import pytest

from fqhe_torus.acceptance import CRITERIA


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_acceptance_criterion(number):
    result = CRITERIA[number]()
    print(f"\n{result.line()} ({result.seconds:.1f} s)")
    for key, value in result.details.items():
        print(f"    {key} = {value}")
    assert result.passed, result.details
