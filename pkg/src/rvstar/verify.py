"""Seeded verification batteries behind ``rvstar verify``.

Each suite returns a :class:`SuiteResult` listing every check with its value,
target, z-score or violation size, and the suite's wall time against its
budget.  The ``desk`` scale runs the full sizes; ``smoke`` shrinks only the
Monte Carlo sizes of z-score based checks, so fixed tolerances keep their
meaning.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import InvalidParameter, UnknownSuite
from .estimate import ThresholdRule, empirical_spectral, extremogram, hill
from .models import (
    ar1_positive,
    iid_pareto,
    max_moving_average,
    path_amplitude,
    simulate,
    true_forward_spectral,
    true_moment,
)
from .rng import derive_seed, stream
from .series import SeriesPath
from .spectral import (
    backward_expectation,
    indicator_exceed,
    indicator_nonzero,
    nu_k_integral,
    product_exceed,
    spectral_moment,
    time_change_residual,
)
from .starspace import Euclidean, PathSup, SnowflakeGauge, WeightedHilbert, validate_axioms
from .tailmeasure import polar_product_check, projection_consistency

SCALES = {"desk": 1, "smoke": 10}
MOMENT_FLOOR = 1e-12


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float | None = None
    target: float | None = None
    z: float | None = None
    detail: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out = {"name": self.name, "pass": self.passed, "value": self.value, "target": self.target, "z": self.z}
        out.update(self.detail)
        return out


@dataclass
class SuiteResult:
    suite: str
    checks: list[CheckResult]
    seconds: float
    budget: float
    seed: int
    scale: str

    @property
    def within_budget(self) -> bool:
        return self.seconds <= self.budget

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict[str, Any]:
        return {"suite": self.suite, "pass": self.passed, "seconds": self.seconds, "budget": self.budget,
                "within_budget": self.within_budget, "seed": self.seed, "scale": self.scale,
                "checks": [c.to_dict() for c in self.checks]}


def _finite(z: float) -> float | None:
    return z if math.isfinite(z) else None


def _zcheck(name: str, value: float, target: float, se: float, limit: float, **detail) -> CheckResult:
    diff = value - target
    z = diff / se if se > 0 else (0.0 if diff == 0 else math.copysign(math.inf, diff))
    return CheckResult(name, abs(z) <= limit, value, target, _finite(z), {"se": se, **detail})


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


def timechange_models():
    return [ar1_positive(0.5, 1), ar1_positive(0.5, 2), max_moving_average((1, 1), 1), iid_pareto(1)]


def suite_timechange(seed: int, div: int) -> list[CheckResult]:
    n = 100_000 // div
    out = []
    for model in timechange_models():
        law = true_forward_spectral(model)
        for s in (1, 2):
            for t in (0, 1):
                for c in (0.5, 1.0, 2.0):
                    r = time_change_residual(law, indicator_exceed(-s, c), s, t, n, seed)
                    out.append(CheckResult(
                        f"{model.label()} s={s} t={t} c={c:g}", abs(r.z_score) <= 4,
                        r.lhs.value, r.rhs.value, _finite(r.z_score),
                        {"lhs_se": r.lhs.std_error, "rhs_se": r.rhs.std_error},
                    ))
    law = true_forward_spectral(ar1_positive(0.5, 2))
    est = backward_expectation(law, indicator_nonzero(-1), 1, 0, n, seed)
    out.append(_zcheck("ar1(0.5,2) Pr[Theta_-1 != 0]", est.value, 0.25, est.std_error, 3))
    return out


def moment_laws():
    return [iid_pareto(1), iid_pareto(2, Euclidean(2)), ar1_positive(0.5, 1), ar1_positive(0.5, 2),
            max_moving_average((1, 1), 1), max_moving_average((1, 0.5, 0.25), 2), path_amplitude(1)]


def suite_moment(seed: int, div: int) -> list[CheckResult]:
    n = 100_000 // div
    out = []
    for model in moment_laws():
        law = true_forward_spectral(model)
        for t in range(11):
            est = spectral_moment(law, t, n, seed)
            slack = max(3 * est.std_error, MOMENT_FLOOR)
            out.append(CheckResult(f"{model.label()} t={t} bound", est.value <= 1 + slack, est.value, 1.0,
                                   None, {"se": est.std_error}))
            exact = true_moment(model, t)
            ok = abs(est.value - exact) <= slack
            z = (est.value - exact) / est.std_error if est.std_error > 0 else None
            out.append(CheckResult(f"{model.label()} t={t} exact", ok, est.value, exact, z, {"se": est.std_error}))
    return out


def suite_nuk(seed: int, div: int) -> list[CheckResult]:
    model = ar1_positive(0.5, 1)
    law = true_forward_spectral(model)
    f = product_exceed(1.0, 1.0, start=1)
    formula = nu_k_integral(law, f, 2, 1.0, 100_000 // div, seed)
    out = [_zcheck("formula vs analytic 0.5", formula.value, 0.5, formula.std_error, 3)]

    path = simulate(model, 1_000_000, derive_seed(seed, "nu-k-path"))
    emp, emp_se, detail = empirical_nu(path, [1.0, 1.0], ThresholdRule(quantile=0.999))
    se = math.hypot(emp_se, formula.std_error)
    out.append(_zcheck("empirical vs formula", emp, formula.value, se, 3,
                       formula=formula.value, formula_se=formula.std_error, empirical_se=emp_se, **detail))
    return out


def empirical_nu(path: SeriesPath, levels, threshold) -> tuple[float, float, dict[str, Any]]:
    """``(1/V(u)) Pr[rho(X_j)/u > levels[j-1], j = 1..k]`` from one path.

    The standard error is the delta-method one for a ratio of two counts
    treated as independent Poisson variables.
    """
    rho = path.moduli()
    u = threshold.resolve(rho)
    k = len(levels)
    n = rho.size - k
    base = int(np.count_nonzero(rho[:n] > u))
    joint = np.ones(n, dtype=bool)
    for j, lv in enumerate(levels, start=1):
        joint &= rho[j : j + n] > lv * u
    hits = int(np.count_nonzero(joint))
    if base == 0:
        return math.nan, math.inf, {"u": u, "exceedances": 0, "joint": hits}
    value = hits / base
    se = value * math.sqrt(1 / max(hits, 1) + 1 / base)
    return value, se, {"u": u, "exceedances": base, "joint": hits}


def suite_polar(seed: int, div: int) -> list[CheckResult]:
    path = simulate(iid_pareto(1, Euclidean(2)), 1_000_000, derive_seed(seed, "polar"))
    rep = polar_product_check(path, ThresholdRule(quantile=0.9), seed=seed)
    out = [
        CheckResult("pareto KS within 99% band", rep.pareto_ok, rep.ks_distance, rep.ks_band, None,
                    {"n_exceed": rep.n_exceed, "alpha_hat": rep.alpha_hat}),
        CheckResult("angle homogeneity p > 0.01", rep.homogeneous, rep.homogeneity_p, 0.01, None,
                    {"statistic": rep.homogeneity}),
    ]
    rng = stream(seed, "power-check")
    g = rng.standard_normal((1_000_000, 2))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    light = SeriesPath(g * rng.exponential(size=1_000_000)[:, None], Euclidean(2))
    power = polar_product_check(light, ThresholdRule(quantile=0.9), seed=seed)
    out.append(CheckResult("exponential data fails KS", not power.pareto_ok, power.ks_distance, power.ks_band,
                           None, {"n_exceed": power.n_exceed}))
    return out


def suite_projection(seed: int, div: int) -> list[CheckResult]:
    out = []
    for model in (ar1_positive(0.5, 1), max_moving_average((1, 1), 1), iid_pareto(1)):
        path = simulate(model, 100_000, derive_seed(seed, "projection", model.label()))
        rule = ThresholdRule(quantile=0.99)
        rep = projection_consistency(path, 2, 1, rule)
        out.append(CheckResult(f"{model.label()} n=2 m=1 edge bound", rep.within_edge_bound and rep.passed,
                               rep.max_discrepancy, rep.edge_bound, None, {"rigorous_bound": rep.rigorous_bound}))
        same = projection_consistency(path, 1, 1, rule)
        out.append(CheckResult(f"{model.label()} n=m discrepancy", same.max_discrepancy == 0.0,
                               same.max_discrepancy, 0.0))
    # short paths with a low threshold put exceedances at the edges
    for rep_i in range(20):
        path = simulate(ar1_positive(0.5, 1), 100, derive_seed(seed, "short-path", rep_i))
        rep = projection_consistency(path, 2, 1, ThresholdRule(quantile=0.5))
        out.append(CheckResult(f"short path {rep_i} edge bound", rep.within_edge_bound and rep.passed,
                               rep.max_discrepancy, rep.edge_bound, None, {"rigorous_bound": rep.rigorous_bound}))
    return out


def suite_axioms(seed: int, div: int) -> list[CheckResult]:
    n = 100_000 // div
    out = []
    for space in (Euclidean(3), PathSup(16), SnowflakeGauge(2, 0.5)):
        rep = validate_axioms(space, n_samples=n, seed=seed)
        worst = max(c.worst_violation for c in rep.checks)
        out.append(CheckResult(f"{space.kind} passes", rep.passed, worst, None, None,
                               {"checks": [c.to_dict() for c in rep.checks]}))
    rep = validate_axioms(WeightedHilbert(100), n_samples=10_000, seed=seed)
    flagged = [e for e in rep.neighbourhood if e.flagged]
    # at epsilon = 1 the witness is e_100 itself
    witness = next((e for e in flagged if e.epsilon == 1.0), None)
    ok = (
        witness is not None
        and abs(witness.witness_modulus - 0.1) <= 1e-9
        and abs(witness.witness_dist - 1.0) <= 1e-9
    )
    detail = {"flagged": bool(flagged), "flagged_epsilons": [e.epsilon for e in flagged]}
    if witness is not None:
        detail.update(witness_modulus=witness.witness_modulus, witness_dist=witness.witness_dist,
                      epsilon=witness.epsilon)
    out.append(CheckResult("weighted_hilbert flagged with witness e_100", ok,
                           witness.witness_modulus if witness else None, 0.1, None, detail))
    return out


def suite_estimator_oracle(seed: int, div: int) -> list[CheckResult]:
    out = []
    for alpha in (1.0, 2.0):
        path = simulate(iid_pareto(alpha), 100_000, derive_seed(seed, "hill", alpha))
        est = hill(path.moduli(), 1000)
        ok = abs(est.alpha_hat - alpha) <= 0.1 * alpha
        out.append(CheckResult(f"hill alpha={alpha:g}", ok, est.alpha_hat, alpha,
                               (est.alpha_hat - alpha) / est.se, {"se": est.se}))
    path = simulate(ar1_positive(0.5, 2), 1_000_000, derive_seed(seed, "spectral-median"))
    emp = empirical_spectral(path, 1, ThresholdRule(quantile=0.999))
    med = float(np.median(emp.draws.modulus(1)))
    out.append(CheckResult("ar1(0.5,2) lag-1 median in [0.45, 0.55]", 0.45 <= med <= 0.55, med, 0.5, None,
                           {"draws": emp.n}))
    path = simulate(ar1_positive(0.5, 1), 1_000_000, derive_seed(seed, "extremogram"))
    curve = extremogram(path, [1], ThresholdRule(quantile=0.999))
    out.append(_zcheck("ar1(0.5,1) extremogram lag 1", float(curve.values[0]), 0.5, float(curve.se[0]), 3,
                       exceedances=curve.n_exceed))
    return out


SUITES: dict[str, tuple[Callable[[int, int], list[CheckResult]], float]] = {
    "timechange": (suite_timechange, 60.0),
    "moment": (suite_moment, 10.0),
    "nuk": (suite_nuk, 120.0),
    "polar": (suite_polar, 60.0),
    "projection": (suite_projection, 10.0),
    "axioms": (suite_axioms, 10.0),
    "estimator_oracle": (suite_estimator_oracle, 120.0),
}


def run_suite(name: str, seed: int = 0, scale: str = "desk") -> SuiteResult:
    if name not in SUITES:
        raise UnknownSuite(f"unknown suite {name!r}; expected one of {sorted(SUITES)} or 'all'")
    if scale not in SCALES:
        raise InvalidParameter(f"unknown scale {scale!r}; expected one of {sorted(SCALES)}")
    fn, budget = SUITES[name]
    t0 = time.perf_counter()
    checks = fn(seed, SCALES[scale])
    return SuiteResult(name, checks, time.perf_counter() - t0, budget, seed, scale)


def run_suites(name: str, seed: int = 0, scale: str = "desk") -> list[SuiteResult]:
    names = list(SUITES) if name == "all" else [name]
    return [run_suite(n, seed, scale) for n in names]
