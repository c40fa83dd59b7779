"""Empirical tail measures on finite windows and checks of their structure."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import InsufficientData, InvalidParameter, NoExceedances, ShapeMismatch
from .estimate import _windows, as_rule, pareto_mle
from .rng import stream
from .series import SeriesPath
from .spectral import WindowBatch

DEFAULT_FLOOR = 0.05
MIN_PER_BIN = 30
# the edge bounds can be attained exactly; allow for the rounding of both sides
BOUND_RTOL = 1e-12
KS_99 = 1.63
ANGLE_RTOL = 1e-12


@dataclass
class EmpiricalTailMeasure:
    """Atoms ``(X_{s-m}, ..., X_{s+m}) / u`` with weight ``1 / (count * V(u))``.

    ``count`` is the number of anchors with a full window and ``normalizer``
    the fraction of them with ``rho(X_s) > u``, so every atom weighs one over
    the number of exceedances.  Atoms whose largest coordinate modulus is at
    most ``floor`` are dropped: sets must stay above ``floor`` to be
    evaluated exactly.
    """

    m: int
    atoms: WindowBatch
    weights: np.ndarray
    normalizer: float
    u: float
    count: int
    floor: float = DEFAULT_FLOOR

    @property
    def n_exceed(self) -> int:
        return int(round(self.normalizer * self.count))

    def mass(self, levels: Mapping[int, float]) -> float:
        """Measure of ``{x : rho(x_j) > levels[j] for every j}``."""
        if not levels:
            raise InvalidParameter("a set needs at least one coordinate constraint")
        if max(levels.values()) < self.floor:
            raise InvalidParameter(f"sets must exceed the floor {self.floor} in some coordinate")
        ok = np.ones(self.atoms.n, dtype=bool)
        for j, level in levels.items():
            if abs(j) > self.m:
                raise ShapeMismatch(f"coordinate {j} outside the window of half-width {self.m}")
            ok &= self.atoms.modulus(j) > level
        return float(np.sum(self.weights[ok]))

    def mass_se(self, levels: Mapping[int, float]) -> float:
        """Poisson-type standard error ``sqrt(sum of squared weights in the set)``."""
        ok = np.ones(self.atoms.n, dtype=bool)
        for j, level in levels.items():
            ok &= self.atoms.modulus(j) > level
        return float(np.sqrt(np.sum(self.weights[ok] ** 2)))

    def sidecar(self) -> dict[str, Any]:
        return {"m": self.m, "u": self.u, "normalizer": self.normalizer, "count": self.count}

    def export(self, csv_target, json_target) -> None:
        flat = self.atoms.values.reshape(self.atoms.n, -1)
        dim = self.atoms.space.dim
        cols = [f"t{t}_x{i}" for t in range(-self.m, self.m + 1) for i in range(dim)]
        np.savetxt(csv_target, np.column_stack([flat, self.weights]), fmt="%.17g", delimiter=",",
                   header=",".join([*cols, "weight"]), comments="")
        with open(json_target, "w") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)


def build_tail_measure(path: SeriesPath, m: int, u, floor: float = DEFAULT_FLOOR,
                       anchors: slice | None = None) -> EmpiricalTailMeasure:
    """Empirical ``(1/V(u)) Pr[X^(m) / u in .]`` from the windows of ``path``.

    ``anchors`` restricts the anchor positions (used for split-sample
    comparisons); by default every position with a full window is used.

    Raises
    ------
    NoExceedances
        If no anchor exceeds ``u``.
    """
    if int(m) != m or m < 0:
        raise InvalidParameter("m must be a nonnegative integer")
    m = int(m)
    rho = path.moduli()
    n = rho.size
    if n < 2 * m + 1:
        raise InsufficientData(f"path of length {n} is shorter than a window of length {2 * m + 1}")
    u = as_rule(u).resolve(rho)
    pos = np.arange(m, n - m)
    if anchors is not None:
        pos = pos[(pos >= (anchors.start or 0)) & (pos < (anchors.stop if anchors.stop is not None else n))]
    if pos.size == 0:
        raise InsufficientData("no anchor positions in range")
    exceed = int(np.count_nonzero(rho[pos] > u))
    if exceed == 0:
        raise NoExceedances(f"no anchor exceeds u={u:.6g}")
    view = sliding_window_max(rho, m)[pos - m]
    keep = pos[view > floor * u]
    w = _windows(path.points, m, keep)
    atoms = WindowBatch(path.space, path.space.scale(np.full(keep.size, 1.0 / u)[:, None], w), start=-m)
    return EmpiricalTailMeasure(m, atoms, np.full(keep.size, 1.0 / exceed), exceed / pos.size, u, pos.size, floor)


def sliding_window_max(rho: np.ndarray, m: int) -> np.ndarray:
    return np.lib.stride_tricks.sliding_window_view(rho, 2 * m + 1).max(axis=-1)


def project(measure: EmpiricalTailMeasure, m: int) -> EmpiricalTailMeasure:
    """Keep coordinates ``-m..m`` of every atom; weights and normalizer are unchanged."""
    if int(m) != m or not 0 <= m <= measure.m:
        raise ShapeMismatch(f"cannot project a half-width {measure.m} measure to {m}")
    if m == measure.m:
        return measure
    return EmpiricalTailMeasure(m, measure.atoms.slice(-m, m), measure.weights, measure.normalizer,
                                measure.u, measure.count, measure.floor)


def default_sets(m: int, levels: Sequence[float] = (1.0, 2.0)) -> list[dict[int, float]]:
    """Modulus-exceedance rectangles on coordinates ``-m..m``."""
    sets: list[dict[int, float]] = []
    for j in range(-m, m + 1):
        sets.extend({j: lv} for lv in levels)
    for j in range(-m, m + 1):
        if j != 0:
            sets.extend({0: 1.0, j: lv} for lv in (0.25, 0.5))
    return sets


@dataclass
class ConsistencyReport:
    n: int
    m: int
    rows: list[dict[str, Any]]
    edge_bound: float
    rigorous_bound: float
    disjoint: bool

    @property
    def max_discrepancy(self) -> float:
        return max((r["discrepancy"] for r in self.rows), default=0.0)

    @property
    def passed(self) -> bool:
        if self.disjoint:
            return all(r["z"] is None or abs(r["z"]) <= 4 for r in self.rows)
        return self.max_discrepancy <= self.rigorous_bound * (1 + BOUND_RTOL)

    @property
    def within_edge_bound(self) -> bool:
        return self.max_discrepancy <= self.edge_bound * (1 + BOUND_RTOL)

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.n, "m": self.m, "disjoint": self.disjoint, "max_discrepancy": self.max_discrepancy,
                "edge_bound": self.edge_bound, "rigorous_bound": self.rigorous_bound,
                "within_edge_bound": self.within_edge_bound, "passed": self.passed,
                "differs": [r["set"] for r in self.rows if r["beyond_tolerance"]], "rows": self.rows}


def projection_consistency(path: SeriesPath, n: int, m: int, u, sets=None,
                           disjoint: bool = False, floor: float = DEFAULT_FLOOR) -> ConsistencyReport:
    """Compare the projection of the half-width ``n`` measure with the half-width ``m`` one.

    On a shared path the two anchor sets differ in ``2(n - m)`` positions, so
    masses differ by at most ``2(n - m) max(1, mass_n) / E_m`` with ``E_m``
    the exceedance count of the smaller window.  That bound, and the coarser
    ``2n / E_m``, are reported.  With ``disjoint`` the measures come from the
    two halves of the path and are compared by z-scores instead.
    """
    if not 0 <= m <= n:
        raise InvalidParameter(f"need 0 <= m <= n, got m={m}, n={n}")
    rho = path.moduli()
    u = as_rule(u).resolve(rho)
    if disjoint:
        half = len(path) // 2
        big = build_tail_measure(path, n, u, floor, anchors=slice(0, half))
        small = build_tail_measure(path, m, u, floor, anchors=slice(half, None))
    else:
        big = build_tail_measure(path, n, u, floor)
        small = build_tail_measure(path, m, u, floor)
    proj = project(big, m)
    sets = default_sets(m) if sets is None else sets
    e_m = small.n_exceed
    rows = []
    worst_mass = 1.0
    for s in sets:
        a, b = proj.mass(s), small.mass(s)
        worst_mass = max(worst_mass, a)
        row = {"set": {str(k): v for k, v in s.items()}, "projected": a, "direct": b, "discrepancy": abs(a - b)}
        if disjoint:
            se = math.hypot(proj.mass_se(s), small.mass_se(s))
            row["z"] = (a - b) / se if se > 0 else (None if a == b else math.inf)
        rows.append(row)
    rigorous = 2 * (n - m) * worst_mass / e_m
    edge = 2 * n / e_m
    for row in rows:
        row["beyond_tolerance"] = (
            row["z"] is not None and abs(row["z"]) > 4 if disjoint else row["discrepancy"] > rigorous * (1 + BOUND_RTOL)
        )
    return ConsistencyReport(n, m, rows, edge, rigorous, disjoint)


# ---------------------------------------------------------------------------
# Polar product structure
# ---------------------------------------------------------------------------

AngleFunction = Callable[[np.ndarray], np.ndarray]


def default_angle_functions(dim: int) -> list[AngleFunction]:
    """Coordinates and squared coordinates of the angle."""
    funcs: list[AngleFunction] = []
    for i in range(dim):
        funcs.append(lambda th, i=i: th[:, i])
        funcs.append(lambda th, i=i: th[:, i] ** 2)
    return funcs


@dataclass
class PolarReport:
    n_exceed: int
    n_bins: int
    alpha_hat: float
    ks_distance: float
    ks_band: float
    ks_pvalue: float
    homogeneity: float | None
    homogeneity_p: float | None
    degenerate_angle: bool

    @property
    def pareto_ok(self) -> bool:
        return self.ks_distance <= self.ks_band

    @property
    def homogeneous(self) -> bool:
        return self.degenerate_angle or (self.homogeneity_p is not None and self.homogeneity_p > 0.01)

    @property
    def passed(self) -> bool:
        return self.pareto_ok and self.homogeneous

    def to_dict(self) -> dict[str, Any]:
        return {"n_exceed": self.n_exceed, "n_bins": self.n_bins, "alpha_hat": self.alpha_hat,
                "ks_distance": self.ks_distance, "ks_band": self.ks_band, "ks_pvalue": self.ks_pvalue,
                "homogeneity": self.homogeneity, "homogeneity_p": self.homogeneity_p,
                "degenerate_angle": self.degenerate_angle, "pareto_ok": self.pareto_ok,
                "homogeneous": self.homogeneous, "passed": self.passed}


def _constant_columns(values: np.ndarray) -> np.ndarray:
    """Columns whose spread is at rounding level, e.g. angles of a fixed template."""
    if values.shape[0] == 0:
        return np.ones(values.shape[1], dtype=bool)
    spread = values.max(axis=0) - values.min(axis=0)
    return spread <= ANGLE_RTOL * np.maximum(1.0, np.abs(values).max(axis=0))


def _homogeneity(labels: np.ndarray, values: np.ndarray, n_bins: int) -> float:
    counts = np.bincount(labels, minlength=n_bins)
    stat = 0.0
    for k in range(values.shape[1]):
        v = values[:, k]
        var = v.var()
        means = np.bincount(labels, weights=v, minlength=n_bins) / counts
        stat += float(np.sum(counts * (means - v.mean()) ** 2) / var)
    return stat


def polar_product_check(path: SeriesPath, u=None, modulus_bins: int = 5, angle_functions=None,
                        n_perm: int = 199, seed: int = 0) -> PolarReport:
    """Test that ``rho(X)/u`` is Pareto and independent of the angle above ``u``.

    Exceedances are cut into quantile bins of ``rho/u`` (merged until each
    holds at least 30).  The homogeneity statistic
    ``sum_k sum_b n_b (mean_bk - mean_k)^2 / var_k`` is referred to its
    permutation distribution over bin labels.  The Pareto part is a KS
    distance against ``y^-alpha_hat`` with the 99% band ``1.63 / sqrt(E)``.
    Constant angles short-circuit to the Pareto part.
    """
    rho = path.moduli()
    u = as_rule(u).resolve(rho)
    idx = np.flatnonzero(rho > u)
    e = idx.size
    if e == 0:
        raise NoExceedances(f"no exceedance of u={u:.6g}")
    if e < 2:
        raise InsufficientData("need at least two exceedances")
    y = rho[idx] / u
    a = pareto_mle(y)
    ks = stats.kstest(y, lambda v: 1.0 - np.maximum(v, 1.0) ** (-a))
    band = KS_99 / math.sqrt(e)

    theta = path.space.scale(1.0 / rho[idx], path.points[idx])
    funcs = default_angle_functions(path.space.dim) if angle_functions is None else angle_functions
    values = np.column_stack([np.asarray(f(theta), dtype=float) for f in funcs]) if funcs else np.zeros((e, 0))
    values = values[:, ~_constant_columns(values)]
    degenerate = values.shape[1] == 0
    n_bins = max(1, min(int(modulus_bins), e // MIN_PER_BIN))
    stat = p = None
    if not degenerate and n_bins >= 2:
        order = np.argsort(y, kind="stable")
        labels = np.empty(e, dtype=np.intp)
        labels[order] = (np.arange(e) * n_bins) // e
        stat = _homogeneity(labels, values, n_bins)
        rng = stream(seed, "permutation-test")
        hits = sum(_homogeneity(rng.permutation(labels), values, n_bins) >= stat for _ in range(n_perm))
        p = (1 + hits) / (1 + n_perm)
    return PolarReport(e, n_bins, a, float(ks.statistic), band, float(ks.pvalue), stat, p, degenerate)


# ---------------------------------------------------------------------------
# Tail ratio curve and lag diagnostics
# ---------------------------------------------------------------------------


@dataclass
class TailRatioCurve:
    lambdas: np.ndarray
    ratios: np.ndarray
    se: np.ndarray
    counts: np.ndarray
    u: float
    alpha_slope: float
    notes: list[str] = field(default_factory=list)

    def rows(self) -> list[dict[str, float]]:
        return [{"lambda": float(l), "ratio": float(r), "se": float(s), "count": int(c)}
                for l, r, s, c in zip(self.lambdas, self.ratios, self.se, self.counts)]

    def to_csv(self, target) -> None:
        np.savetxt(target, np.column_stack([self.lambdas, self.ratios, self.se, self.counts]),
                   fmt=["%.17g", "%.17g", "%.17g", "%d"], delimiter=",", header="lambda,ratio,se,count", comments="")


def tail_ratio_curve(path: SeriesPath, lambdas: Sequence[float], u=None) -> TailRatioCurve:
    """``V(lambda u) / V(u)`` with binomial standard errors.

    The slope of ``log ratio`` against ``log lambda`` through the origin
    estimates ``-alpha``.  Grid points without exceedances get ``nan`` and a
    note rather than an error.
    """
    lam = np.asarray(lambdas, dtype=float)
    if lam.size == 0 or np.any(lam < 1):
        raise InvalidParameter("lambda grid must be nonempty with every value >= 1")
    rho = path.moduli()
    u = as_rule(u).resolve(rho)
    base = int(np.count_nonzero(rho > u))
    if base == 0:
        raise NoExceedances(f"no exceedance of u={u:.6g}")
    counts = np.array([np.count_nonzero(rho > l * u) for l in lam])
    ratios = counts / base
    se = np.sqrt(ratios * (1 - ratios) / base)
    notes = []
    for l, c in zip(lam, counts):
        if c == 0:
            notes.append(f"no exceedances at lambda={l:g}")
    ratios = np.where(counts > 0, ratios, np.nan)
    fit = (counts > 0) & (lam > 1)
    if fit.any():
        x, yv = np.log(lam[fit]), np.log(ratios[fit])
        slope = -float(np.sum(x * yv) / np.sum(x * x))
    else:
        slope = math.nan
    return TailRatioCurve(lam, ratios, se, counts, u, slope, notes)


def lag_exceedance_counts(path: SeriesPath, max_lag: int, u=None) -> list[dict[str, int]]:
    """Joint exceedance counts ``#{s : rho(X_s) > u, rho(X_{s+t}) > u}`` per lag."""
    rho = path.moduli()
    u = as_rule(u).resolve(rho)
    ex = rho > u
    return [{"lag": t, "count": int(np.count_nonzero(ex[: ex.size - t] & ex[t:]))} for t in range(max_lag + 1)]
