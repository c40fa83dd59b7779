"""Estimators that recover tail objects from a raw series.

Standard errors throughout treat exceedances as independent.  That is exact
for iid data and optimistic under serial dependence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InsufficientData, InvalidParameter, NoExceedances, NonPositiveThreshold, ShapeMismatch
from .series import SeriesPath
from .spectral import MCEstimate, SpectralLaw, WindowBatch, theta_backward_law
from .rng import map_chunks

ZERO_ETA = 0.1
DEFAULT_K_EXPONENT = 0.7


@dataclass(frozen=True)
class TailIndexEstimate:
    alpha_hat: float
    k: int
    se: float
    threshold: float

    def to_dict(self) -> dict[str, Any]:
        return {"alpha_hat": self.alpha_hat, "k": self.k, "se": self.se, "threshold": self.threshold}


def hill(moduli, k: int) -> TailIndexEstimate:
    """Hill estimate from the ``k`` largest values.

    ``alpha_hat = k / sum_{i<=k} log(X_(i) / X_(k+1))`` with descending order
    statistics.

    >>> round(hill([math.e**3, math.e**2, math.e, 1.0], 3).alpha_hat, 12)
    0.5
    """
    x = np.asarray(moduli, dtype=float).ravel()
    if int(k) != k or k < 1:
        raise InsufficientData(f"k must be a positive integer, got {k!r}")
    k = int(k)
    if k >= x.size:
        raise InsufficientData(f"k={k} needs at least {k + 1} values, got {x.size}")
    desc = -np.sort(-x, kind="stable")
    u = desc[k]
    if not u > 0:
        raise NonPositiveThreshold(f"order statistic X_({k + 1}) = {u} is not positive")
    s = float(np.sum(np.log(desc[:k] / u)))
    if s <= 0:
        raise InsufficientData("the top order statistics are all tied with the threshold")
    a = k / s
    return TailIndexEstimate(alpha_hat=a, k=k, se=a / math.sqrt(k), threshold=float(u))


def pareto_mle(ratios) -> float:
    """``alpha`` fitted to exceedance ratios ``y > 1`` by maximum likelihood."""
    y = np.asarray(ratios, dtype=float)
    s = float(np.sum(np.log(y)))
    if y.size == 0 or s <= 0:
        raise InsufficientData("need exceedance ratios above 1")
    return y.size / s


@dataclass(frozen=True)
class ThresholdRule:
    """Either a fixed ``u``, the ``(k+1)``-th largest modulus, or a quantile.

    With nothing set, ``k = ceil(n^0.7)``.
    """

    u: float | None = None
    k: int | None = None
    quantile: float | None = None

    def __post_init__(self):
        given = [v is not None for v in (self.u, self.k, self.quantile)]
        if sum(given) > 1:
            raise InvalidParameter("give at most one of u, k, quantile")
        if self.u is not None and not self.u > 0:
            raise NonPositiveThreshold(f"threshold must be positive, got {self.u}")
        if self.quantile is not None and not 0 < self.quantile < 1:
            raise InvalidParameter(f"quantile must lie in (0, 1), got {self.quantile}")

    @classmethod
    def from_config(cls, block) -> "ThresholdRule":
        if block is None:
            return cls()
        if isinstance(block, (int, float)):
            return cls(u=float(block))
        allowed = {"u", "k", "quantile"}
        extra = set(block) - allowed
        if extra:
            raise InvalidParameter(f"unknown threshold keys {sorted(extra)}")
        return cls(**dict(block))

    def resolve(self, moduli) -> float:
        x = np.asarray(moduli, dtype=float)
        if self.u is not None:
            return float(self.u)
        if self.quantile is not None:
            u = float(np.quantile(x, self.quantile))
        else:
            k = self.k if self.k is not None else math.ceil(x.size**DEFAULT_K_EXPONENT)
            if k >= x.size:
                raise InsufficientData(f"k={k} needs more than {x.size} values")
            u = float(np.partition(x, x.size - k - 1)[x.size - k - 1])
        if not u > 0:
            raise NonPositiveThreshold(f"resolved threshold {u} is not positive")
        return u

    def to_dict(self) -> dict[str, Any]:
        return {k: v for k, v in (("u", self.u), ("k", self.k), ("quantile", self.quantile)) if v is not None}


def as_rule(threshold) -> ThresholdRule:
    if isinstance(threshold, ThresholdRule):
        return threshold
    if threshold is None:
        return ThresholdRule()
    return ThresholdRule(u=float(threshold))


# ---------------------------------------------------------------------------
# Empirical spectral tail process
# ---------------------------------------------------------------------------


@dataclass
class EmpiricalSpectral:
    """Windows ``(X_{s-m}, ..., X_{s+m}) / rho(X_s)`` over anchors with ``rho(X_s) > u``.

    ``ratio`` holds ``rho(X_s) / u`` per draw, and ``alpha_hat`` the Pareto
    fit to those ratios.
    """

    m: int
    draws: WindowBatch
    u: float
    anchors: np.ndarray
    ratio: np.ndarray
    alpha_hat: float
    n_anchor_positions: int

    @property
    def n(self) -> int:
        return self.draws.n

    def to_csv(self, target) -> None:
        flat = self.draws.values.reshape(self.n, -1)
        cols = [f"t{t}_x{i}" for t in range(-self.m, self.m + 1) for i in range(self.draws.space.dim)]
        np.savetxt(target, np.column_stack([self.anchors, flat]), fmt="%.17g", delimiter=",",
                   header=",".join(["anchor", *cols]), comments="")

    def summary(self) -> dict[str, Any]:
        return {"m": self.m, "u": self.u, "n_draws": self.n, "alpha_hat": self.alpha_hat,
                "anchor_positions": self.n_anchor_positions}


def _windows(points: np.ndarray, m: int, anchors: np.ndarray) -> np.ndarray:
    view = sliding_window_view(points, 2 * m + 1, axis=0)  # (n-2m, dim, 2m+1)
    return np.moveaxis(view[anchors - m], -1, 1)


def empirical_spectral(path: SeriesPath, m: int, threshold=None) -> EmpiricalSpectral:
    """Rescale every window around an exceedance by the anchor's modulus.

    Anchors overlap freely: each exceedance with a full window is one draw.

    Raises
    ------
    NoExceedances
        If no anchor with a full window exceeds the threshold.
    """
    if int(m) != m or m < 0:
        raise InvalidParameter("m must be a nonnegative integer")
    m = int(m)
    rho = path.moduli()
    n = rho.size
    if n < 2 * m + 1:
        raise InsufficientData(f"path of length {n} has no full window of half-width {m}")
    u = as_rule(threshold).resolve(rho)
    pos = np.arange(m, n - m)
    anchors = pos[rho[pos] > u]
    if anchors.size == 0:
        raise NoExceedances(f"no anchor exceeds u={u:.6g}")
    w = _windows(path.points, m, anchors)
    r = rho[anchors]
    draws = WindowBatch(path.space, path.space.scale(1.0 / r[:, None], w), start=-m)
    ratio = r / u
    try:
        a = pareto_mle(ratio)
    except InsufficientData:
        a = math.nan
    return EmpiricalSpectral(m, draws, u, anchors, ratio, a, pos.size)


# ---------------------------------------------------------------------------
# Extremogram
# ---------------------------------------------------------------------------


@dataclass
class ExtremogramCurve:
    lags: list[int]
    values: np.ndarray
    se: np.ndarray
    u: float
    n_exceed: int

    def rows(self) -> list[dict[str, float]]:
        return [{"lag": int(l), "value": float(v), "se": float(s)} for l, v, s in zip(self.lags, self.values, self.se)]

    def to_csv(self, target) -> None:
        np.savetxt(target, np.column_stack([self.lags, self.values, self.se]), fmt=["%d", "%.17g", "%.17g"],
                   delimiter=",", header="lag,value,se", comments="")


def extremogram(path: SeriesPath, lags: Sequence[int], threshold=None) -> ExtremogramCurve:
    """Fraction of exceedances at ``s`` that are followed by one at ``s + t``.

    Anchors are restricted to ``s + max(lags) < n`` so every lag uses the same
    denominator.  The binomial standard error ignores serial dependence.
    """
    lags = [int(t) for t in lags]
    if any(t < 0 for t in lags):
        raise InvalidParameter("lags must be nonnegative")
    rho = path.moduli()
    u = as_rule(threshold).resolve(rho)
    top = max(lags, default=0)
    if rho.size <= top:
        raise InsufficientData("series shorter than the largest lag")
    exceed = rho > u
    base = exceed[: rho.size - top]
    count = int(base.sum())
    if count == 0:
        raise NoExceedances(f"no exceedance of u={u:.6g}")
    values = np.array([np.count_nonzero(base & exceed[t : t + base.size]) / count for t in lags])
    se = np.sqrt(values * (1.0 - values) / count)
    return ExtremogramCurve(lags, values, se, u, count)


# ---------------------------------------------------------------------------
# Empirical vs law comparison
# ---------------------------------------------------------------------------

SUMMARIES = ("capped_moment", "exceed", "zero_mass")


@dataclass(frozen=True)
class SummarySpec:
    """One functional of ``Theta_t``.

    ``capped_moment`` is ``min(rho, 1)^alpha``; ``exceed`` is
    ``1{rho > level}``; ``zero_mass`` is the probability that the lag-``t``
    value is below ``eta`` times the threshold.
    """

    kind: str
    lag: int
    level: float | None = None

    def __post_init__(self):
        if self.kind not in SUMMARIES:
            raise InvalidParameter(f"unknown summary {self.kind!r}; expected one of {SUMMARIES}")

    def label(self) -> str:
        return f"{self.kind}[{self.lag}]" if self.level is None else f"{self.kind}@{self.level:g}[{self.lag}]"


def default_summaries(m: int, levels=(0.3, 0.75), negative: bool = True) -> list[SummarySpec]:
    lags = [t for t in range(-m, m + 1) if t != 0 and (negative or t > 0)]
    out = []
    for t in lags:
        out.append(SummarySpec("capped_moment", t))
        out.extend(SummarySpec("exceed", t, c) for c in levels)
        out.append(SummarySpec("zero_mass", t))
    return out


def _point_summary(spec: SummarySpec, rho: np.ndarray, alpha: float, eta: float) -> np.ndarray:
    if spec.kind == "capped_moment":
        return np.minimum(rho, 1.0) ** alpha
    if spec.kind == "exceed":
        return (rho > spec.level).astype(float)
    # zero_mass on the law side: 1 - Pr[Y rho > eta] with Y ~ Pareto(alpha)
    return 1.0 - np.minimum(rho / eta, 1.0) ** alpha


def _law_summary(law: SpectralLaw, spec: SummarySpec, n: int, seed: int, eta: float) -> MCEstimate:
    alpha = law.alpha
    if spec.lag >= 0:
        def chunk(rng, size):
            return _point_summary(spec, law.sample(size, spec.lag, rng).modulus(spec.lag), alpha, eta)

        return MCEstimate.from_samples(map_chunks(chunk, n, seed, ("summary", spec.label())), seed)

    def g(w: WindowBatch) -> np.ndarray:
        return _point_summary(spec, w.modulus(0), alpha, eta)

    return theta_backward_law(law, -spec.lag, g, n, seed)


def _empirical_summary(emp: EmpiricalSpectral, spec: SummarySpec, alpha: float, eta: float,
                       alpha_se: float = 0.0) -> MCEstimate:
    if abs(spec.lag) > emp.m:
        raise ShapeMismatch(f"lag {spec.lag} outside the empirical window of half-width {emp.m}")
    rho = emp.draws.modulus(spec.lag)
    if spec.kind == "zero_mass":
        vals = (rho * emp.ratio <= eta).astype(float)
    else:
        vals = _point_summary(spec, rho, alpha, eta)
    if vals.size < 2:
        raise InsufficientData("need at least two empirical draws")
    est = MCEstimate.from_samples(vals)
    if spec.kind == "capped_moment" and alpha_se > 0:
        # delta method for the plugged-in alpha_hat
        capped = np.minimum(rho, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = float(np.mean(np.where(capped > 0, vals * np.log(capped), 0.0)))
        est = MCEstimate(est.value, math.hypot(est.std_error, slope * alpha_se), est.n)
    return est


def spectral_summaries(source, summaries, *, alpha: float | None = None, n: int = 100_000,
                       seed: int = 0, eta: float = ZERO_ETA) -> dict[str, MCEstimate]:
    """Evaluate each summary on an :class:`EmpiricalSpectral` or a :class:`SpectralLaw`."""
    out = {}
    for spec in summaries:
        if isinstance(source, SpectralLaw):
            out[spec.label()] = _law_summary(source, spec, n, seed, eta)
        else:
            if alpha is None:
                a, a_se = source.alpha_hat, source.alpha_hat / math.sqrt(source.n)
            else:
                a, a_se = alpha, 0.0
            out[spec.label()] = _empirical_summary(source, spec, a, eta, a_se)
    return out


@dataclass
class SpectralComparison:
    rows: list[dict[str, Any]] = field(default_factory=list)
    z_limit: float = 4.0

    @property
    def max_abs_z(self) -> float:
        return max((abs(r["z"]) for r in self.rows), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_abs_z <= self.z_limit

    def to_dict(self) -> dict[str, Any]:
        return {"passed": self.passed, "max_abs_z": self.max_abs_z, "z_limit": self.z_limit, "rows": self.rows}


def compare_spectral(emp, law: SpectralLaw, summaries=None, *, oracle_alpha: bool = False,
                     n_law: int = 100_000, seed: int = 0, eta: float = ZERO_ETA,
                     z_limit: float = 4.0) -> SpectralComparison:
    """Compare summaries of ``emp`` with those of ``law`` through combined z-scores.

    ``emp`` is usually an :class:`EmpiricalSpectral`; another
    :class:`SpectralLaw` is accepted and sampled under ``seed + 1``.  The
    empirical side plugs in its fitted ``alpha_hat`` unless ``oracle_alpha``;
    the fit's own uncertainty enters the capped-moment standard errors by the
    delta method.

    Raises
    ------
    ShapeMismatch
        If the spaces differ or a summary lag lies outside the window.
    """
    emp_space = emp.space if isinstance(emp, SpectralLaw) else emp.draws.space
    if emp_space != law.space:
        raise ShapeMismatch("empirical draws and law live in different spaces")
    if summaries is None:
        m = emp.m if isinstance(emp, EmpiricalSpectral) else 2
        summaries = default_summaries(m)
    if isinstance(emp, SpectralLaw):
        left = spectral_summaries(emp, summaries, n=n_law, seed=seed + 1, eta=eta)
    else:
        left = spectral_summaries(emp, summaries, alpha=law.alpha if oracle_alpha else None, eta=eta)
    right = spectral_summaries(law, summaries, n=n_law, seed=seed, eta=eta)
    report = SpectralComparison(z_limit=z_limit)
    for spec in summaries:
        a, b = left[spec.label()], right[spec.label()]
        se = math.hypot(a.std_error, b.std_error)
        diff = a.value - b.value
        z = diff / se if se > 0 else (0.0 if diff == 0 else math.copysign(math.inf, diff))
        report.rows.append({"summary": spec.label(), "empirical": a.value, "empirical_se": a.std_error,
                            "law": b.value, "law_se": b.std_error, "z": z})
    return report
