"""Acceptance criteria at their stated sample sizes and tolerances.

Each criterion prints one PASS/FAIL line (shown in the pytest terminal
summary, or directly when this file is run as a script).
"""
import sys

import pytest

from lossless_release.suite import ACCEPTANCE, DEFAULT_SEED, suite_checks

from conftest import ACCEPTANCE_LINES

CHECKS = dict(suite_checks(seed=DEFAULT_SEED, quick=False, include_invariants=False))


@pytest.mark.acceptance
@pytest.mark.slow
@pytest.mark.parametrize("name", ACCEPTANCE)
def test_criterion(name):
    res = CHECKS[name]()
    line = res.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert res.passed, line


if __name__ == "__main__":
    failed = 0
    for name in ACCEPTANCE:
        res = CHECKS[name]()
        print(res.line())
        failed += not res.passed
    sys.exit(1 if failed else 0)
