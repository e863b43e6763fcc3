"""One test per acceptance criterion, each at its stated tolerance.

Every test prints a ``PASS``/``FAIL`` line; the lines are repeated in the
terminal summary so they show up without ``-s``.
"""
import pytest

from faber_relu.verify import CRITERIA, ExperimentConfig, run_criterion

CONFIG = ExperimentConfig()
RESULTS: list[str] = []


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    name = CRITERIA[number][0]
    status, rows = run_criterion(number, CONFIG)
    line = f"{status} criterion {number}: {name}"
    RESULTS.append(line)
    print(line)
    failures = [r for r in rows if r.status == "FAIL"]
    assert status == "PASS", "\n".join(r.csv() for r in failures)
