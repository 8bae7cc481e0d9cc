"""Acceptance criteria at their stated tolerances (full level).

Each criterion prints one PASS/FAIL line, repeated in the terminal summary.
"""
import pytest

from conftest import ACCEPTANCE_LINES
from noma_coverage import validate

NAMES = {
    1: "ordering probability",
    2: "bound chain",
    3: "conditional coverage vs fading oracle",
    4: "analytic vs Monte Carlo",
    5: "scale invariance",
    6: "approximate Laplace transform accuracy",
    7: "limits, continuity and monotonicity",
    8: "determinism",
}


@pytest.mark.acceptance
@pytest.mark.parametrize("criterion", sorted(validate.CRITERIA))
def test_criterion(criterion):
    results = validate.CRITERIA[criterion]("full")
    passed = all(r.passed for r in results)
    tag = "PASS" if passed else "FAIL"
    detail = "; ".join(f"{'ok' if r.passed else 'FAILED'} {r.name}: {r.detail}" for r in results)
    line = f"[{tag}] criterion {criterion} ({NAMES[criterion]}): {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print("\n" + line)
    assert passed, detail
