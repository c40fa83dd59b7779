"""Acceptance battery: one test per criterion, each at desk scale with its runtime budget."""

import pytest

from rvstar.verify import run_suite

CRITERIA = [
    (1, "timechange", "time-change identity, |z| <= 4 at 1e5 draws per side"),
    (2, "moment", "E[rho(Theta_t)^alpha] <= 1 and closed forms within 3 se"),
    (3, "nuk", "tail-measure integral vs finite-u empirical within 3 se"),
    (4, "polar", "Pareto KS band, angle homogeneity, exponential power check"),
    (5, "projection", "projected vs direct tail measure within the edge bound"),
    (6, "axioms", "builtin spaces pass, weighted Hilbert flagged with e_100"),
    (7, "estimator_oracle", "Hill, spectral median and extremogram against oracles"),
]


@pytest.mark.parametrize("number, suite, description", CRITERIA, ids=[c[1] for c in CRITERIA])
def test_criterion(number, suite, description, capsys):
    result = run_suite(suite, seed=0, scale="desk")
    ok = result.passed and result.within_budget
    failed = ", ".join(c.name for c in result.failures()) or "-"
    with capsys.disabled():
        print(
            f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {suite}: {description} "
            f"({len(result.checks)} checks, {result.seconds:.1f}s of {result.budget:.0f}s; failed: {failed})"
        )
    assert result.passed, [c.to_dict() for c in result.failures]
    assert result.within_budget, f"{result.seconds:.1f}s exceeds {result.budget:.0f}s"
