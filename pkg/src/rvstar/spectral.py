"""Spectral tail processes and Monte Carlo estimators of their identities.

A :class:`SpectralLaw` only knows how to sample the forward process
``Theta_0, ..., Theta_T``.  Expectations involving negative times are
computed from forward draws through the time-change formula, either in its
weighted form (:func:`time_change_residual`) or the telescoping form
(:func:`backward_expectation`).

Test functions act on a :class:`WindowBatch` and return one value per row.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import ContractViolation, InvalidParameter, ShapeMismatch, SupportViolation
from .rng import map_chunks, stream
from .starspace import StarSpace

CONTRACT_PROBE = 1024


@dataclass
class WindowBatch:
    """``n`` windows ``(x_start, ..., x_{start+L-1})`` of points in ``space``.

    ``zero`` marks coordinates that are structurally the origin.  Exactly-zero
    vectors are marked automatically, and marked coordinates are stored as
    exact zeros, so ``1{x = 0}`` never depends on rounding.
    """

    space: StarSpace
    values: np.ndarray
    zero: np.ndarray | None = None
    start: int = 0
    rows: np.ndarray | None = None
    _mod: dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3 or v.shape[-1] != self.space.dim:
            raise ShapeMismatch(f"window values need shape (n, L, {self.space.dim}), got {v.shape}")
        exact = ~np.any(v != 0.0, axis=-1)
        zero = exact if self.zero is None else (np.asarray(self.zero, dtype=bool) | exact)
        if zero.shape != v.shape[:2]:
            raise ShapeMismatch(f"zero flags need shape {v.shape[:2]}, got {zero.shape}")
        if zero.any() and not exact[zero].all():
            v = v.copy()
            v[zero] = 0.0
        self.values = v
        self.zero = zero

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]

    @property
    def stop(self) -> int:
        """Last index covered (inclusive)."""
        return self.start + self.length - 1

    def _pos(self, t: int) -> int:
        if not self.start <= t <= self.stop:
            raise ShapeMismatch(f"coordinate {t} outside window {self.start}..{self.stop}")
        return t - self.start

    def point(self, t: int) -> np.ndarray:
        return self.values[:, self._pos(t)]

    def is_zero(self, t: int) -> np.ndarray:
        return self.zero[:, self._pos(t)]

    def modulus(self, t: int) -> np.ndarray:
        pos = self._pos(t)
        if pos not in self._mod:
            r = np.zeros(self.n)
            live = ~self.zero[:, pos]
            if live.any():
                r[live] = self.space.modulus(self.values[live, pos])
            self._mod[pos] = r
        return self._mod[pos]

    def max_modulus(self, lo: int | None = None, hi: int | None = None) -> np.ndarray:
        lo = self.start if lo is None else lo
        hi = self.stop if hi is None else hi
        out = np.zeros(self.n)
        for t in range(lo, hi + 1):
            np.maximum(out, self.modulus(t), out=out)
        return out

    def row_ids(self) -> np.ndarray:
        """Index of each row in the batch it was originally drawn as."""
        return np.arange(self.n) if self.rows is None else self.rows

    def _like(self, values, zero, start) -> "WindowBatch":
        return WindowBatch(self.space, values, zero, start, self.rows)

    def take(self, rows) -> "WindowBatch":
        rows = np.asarray(rows)
        return WindowBatch(self.space, self.values[rows], self.zero[rows], self.start, self.row_ids()[rows])

    def slice(self, lo: int, hi: int) -> "WindowBatch":
        a, b = self._pos(lo), self._pos(hi) + 1
        return self._like(self.values[:, a:b], self.zero[:, a:b], lo)

    def scaled(self, lam) -> "WindowBatch":
        """Every coordinate of row ``i`` multiplied by ``lam[i]``."""
        lam = np.broadcast_to(np.asarray(lam, dtype=float), (self.n,))
        return self._like(self.space.scale(lam[:, None], self.values), self.zero, self.start)

    def shifted(self, start: int) -> "WindowBatch":
        return self._like(self.values, self.zero, start)

    def padded(self, n_zeros: int) -> "WindowBatch":
        """Prepend ``n_zeros`` origin coordinates; the window starts ``n_zeros`` earlier."""
        if n_zeros == 0:
            return self
        pad = np.zeros((self.n, n_zeros, self.space.dim))
        values = np.concatenate([pad, self.values], axis=1)
        zero = np.concatenate([np.ones((self.n, n_zeros), dtype=bool), self.zero], axis=1)
        return self._like(values, zero, self.start - n_zeros)

    @classmethod
    def zeros(cls, space: StarSpace, n: int, length: int, start: int = 0) -> "WindowBatch":
        return cls(space, np.zeros((n, length, space.dim)), np.ones((n, length), dtype=bool), start)


ForwardSampler = Callable[[int, int, np.random.Generator], WindowBatch]
WindowFunction = Callable[[WindowBatch], np.ndarray]


@dataclass
class SpectralLaw:
    """A forward spectral tail process with tail index ``alpha``.

    ``sampler(n, horizon, rng)`` returns ``n`` windows covering times
    ``0..horizon`` with ``rho(Theta_0) = 1``.
    """

    alpha: float
    space: StarSpace
    sampler: ForwardSampler
    name: str = "spectral law"

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidParameter(f"alpha must be positive, got {self.alpha}")

    def sample(self, n: int, horizon: int, rng: np.random.Generator) -> WindowBatch:
        if horizon < 0:
            raise InvalidParameter("horizon must be >= 0")
        batch = self.sampler(n, horizon, rng)
        if batch.length != horizon + 1 or batch.start != 0:
            raise ShapeMismatch(f"sampler returned window {batch.start}..{batch.stop}, expected 0..{horizon}")
        return batch


@dataclass(frozen=True)
class MCEstimate:
    value: float
    std_error: float
    n: int
    seed: int | None = None

    @classmethod
    def from_samples(cls, samples: np.ndarray, seed: int | None = None) -> "MCEstimate":
        samples = np.asarray(samples, dtype=float)
        n = samples.size
        if n < 2:
            raise InvalidParameter("need at least two samples for a standard error")
        return cls(float(np.mean(samples)), float(np.std(samples, ddof=1) / math.sqrt(n)), n, seed)

    def z_against(self, target: float) -> float:
        return _z(self.value - target, self.std_error)

    def to_dict(self) -> dict[str, Any]:
        return {"value": self.value, "std_error": self.std_error, "n": self.n, "seed": self.seed}


def _z(diff: float, se: float) -> float:
    if se > 0:
        return diff / se
    return 0.0 if diff == 0 else math.copysign(math.inf, diff)


def _check_n(n: int) -> int:
    if int(n) != n or n < 2:
        raise InvalidParameter(f"n must be an integer >= 2, got {n!r}")
    return int(n)


def _check_lag(name: str, v: int) -> int:
    if int(v) != v or v < 0:
        raise InvalidParameter(f"{name} must be a nonnegative integer, got {v!r}")
    return int(v)


def _mc(fn, n: int, seed: int, names: Sequence, workers: int | None) -> MCEstimate:
    return MCEstimate.from_samples(map_chunks(fn, n, seed, names, workers), seed)


def spectral_moment(law: SpectralLaw, t: int, n: int, seed: int = 0, workers: int | None = None) -> MCEstimate:
    """Monte Carlo estimate of ``E[rho(Theta_t)^alpha]``, which never exceeds 1."""
    t = _check_lag("t", t)

    def chunk(rng, size):
        return law.sample(size, t, rng).modulus(t) ** law.alpha

    return _mc(chunk, _check_n(n), seed, ("spectral-moment", t), workers)


def _telescope(law: SpectralLaw, g: WindowFunction, s: int, t: int, fwd: WindowBatch) -> np.ndarray:
    """Per-draw telescoping integrand whose mean is ``E[g(Theta_{-s}, ..., Theta_t)]``."""
    total = np.asarray(g(fwd.slice(0, t).padded(s)), dtype=float).copy()
    for j in range(1, s + 1):
        rho_j = fwd.modulus(j)
        live = np.flatnonzero(rho_j > 0)
        if live.size == 0:
            continue
        w = fwd.take(live)
        inv = 1.0 / rho_j[live]
        a = w.slice(0, t + j).scaled(inv).padded(s - j).shifted(-s)
        b = w.slice(1, t + j).scaled(inv).padded(s - j + 1).shifted(-s)
        diff = np.asarray(g(a), dtype=float) - np.asarray(g(b), dtype=float)
        total[live] += diff * rho_j[live] ** law.alpha
    return total


def backward_expectation(
    law: SpectralLaw,
    g: WindowFunction,
    s: int,
    t: int,
    n: int,
    seed: int = 0,
    stream_name: str = "spectral-lhs",
    workers: int | None = None,
) -> MCEstimate:
    """Estimate ``E[g(Theta_{-s}, ..., Theta_t)]`` from forward draws only.

    Uses the telescoping sum over ``j = s, ..., 1`` of
    ``E[(g(0.., Theta_0.., Theta_{t+j}) - g(0.., Theta_1.., Theta_{t+j})) / rho(Theta_j)
    * rho(Theta_j)^alpha]`` plus ``E[g(0^s, Theta_0, ..., Theta_t)]``, with every
    term read off the same forward draws of horizon ``t + s``.  Draws with
    ``rho(Theta_j) = 0`` contribute nothing to term ``j``.  ``g`` must be
    bounded.  With ``s = 0`` this is the plain forward mean.
    """
    s, t = _check_lag("s", s), _check_lag("t", t)

    def chunk(rng, size):
        return _telescope(law, g, s, t, law.sample(size, t + s, rng))

    return _mc(chunk, _check_n(n), seed, (stream_name, s, t), workers)


def _forward_weighted(law: SpectralLaw, f: WindowFunction, s: int, t: int, fwd: WindowBatch) -> np.ndarray:
    """``f(Theta_0/rho_s, ..., Theta_{t+s}/rho_s) * rho_s^alpha``, indexed from ``-s``."""
    if s == 0:
        return np.asarray(f(fwd), dtype=float)
    out = np.zeros(fwd.n)
    rho_s = fwd.modulus(s)
    live = np.flatnonzero(rho_s > 0)
    if live.size:
        w = fwd.take(live).scaled(1.0 / rho_s[live]).shifted(-s)
        out[live] = np.asarray(f(w), dtype=float) * rho_s[live] ** law.alpha
    return out


def _check_vanishes_at_first(f: WindowFunction, law: SpectralLaw, s: int, t: int, seed: int) -> None:
    fwd = law.sample(CONTRACT_PROBE, t + s, stream(seed, "contract-probe", s, t)).shifted(-s)
    zero = fwd.zero.copy()
    zero[:, 0] = True
    probe = WindowBatch(fwd.space, fwd.values, zero, -s)
    vals = np.asarray(f(probe), dtype=float)
    if np.any(vals != 0):
        raise ContractViolation(
            f"f is nonzero on {int(np.count_nonzero(vals))} of {CONTRACT_PROBE} windows whose coordinate {-s} is the origin"
        )


@dataclass(frozen=True)
class TimeChangeResult:
    lhs: MCEstimate
    rhs: MCEstimate
    z_score: float

    def to_dict(self) -> dict[str, Any]:
        return {"lhs": self.lhs.to_dict(), "rhs": self.rhs.to_dict(), "z_score": self.z_score}


def time_change_residual(
    law: SpectralLaw,
    f: WindowFunction,
    s: int,
    t: int,
    n: int,
    seed: int = 0,
    shared_stream: bool = False,
    workers: int | None = None,
) -> TimeChangeResult:
    """Compare both sides of the time-change formula.

    ``lhs = E[f(Theta_{-s}, ..., Theta_t)]`` (telescoping estimator) and
    ``rhs = E[f(Theta_0/rho(Theta_s), ..., Theta_{t+s}/rho(Theta_s)) rho(Theta_s)^alpha]``.
    The two sides use independent streams unless ``shared_stream`` is set.

    Raises
    ------
    ContractViolation
        If ``f`` is nonzero on sampled windows whose first coordinate is the origin.
    """
    s, t, n = _check_lag("s", s), _check_lag("t", t), _check_n(n)
    _check_vanishes_at_first(f, law, s, t, seed)
    lhs = backward_expectation(law, f, s, t, n, seed, "spectral-lhs", workers)
    rhs_name = "spectral-lhs" if shared_stream else "spectral-rhs"

    def chunk(rng, size):
        return _forward_weighted(law, f, s, t, law.sample(size, t + s, rng))

    rhs = _mc(chunk, n, seed, (rhs_name, s, t), workers)
    z = _z(lhs.value - rhs.value, math.hypot(lhs.std_error, rhs.std_error))
    return TimeChangeResult(lhs, rhs, z)


def theta_backward_law(
    law: SpectralLaw, t: int, g: WindowFunction, n: int, seed: int = 0, workers: int | None = None
) -> MCEstimate:
    """``int g d(nu_t)``, the limit law of ``X_{-t} / rho(X_0)``.

    Equals ``g(0) (1 - E[rho(Theta_t)^alpha]) + E[g(Theta_0/rho(Theta_t)) rho(Theta_t)^alpha]``.
    ``g`` acts on single-coordinate windows at index 0.  Each draw contributes
    ``g(0) + w (g(Theta_0/rho_t) - g(0))`` with ``w = rho_t^alpha``, so
    ``g = 1`` returns exactly 1.
    """
    t = _check_lag("t", t)

    def chunk(rng, size):
        fwd = law.sample(size, t, rng)
        g0 = np.asarray(g(WindowBatch.zeros(law.space, size, 1)), dtype=float)
        out = g0.copy()
        rho = fwd.modulus(t)
        live = np.flatnonzero(rho > 0)
        if live.size:
            theta = fwd.take(live).slice(0, 0).scaled(1.0 / rho[live])
            out[live] += rho[live] ** law.alpha * (np.asarray(g(theta), dtype=float) - g0[live])
        return out

    return _mc(chunk, _check_n(n), seed, ("backward-law", t), workers)


def nu_k_integral(
    law: SpectralLaw,
    f: WindowFunction,
    k: int,
    r0: float,
    n: int,
    seed: int = 0,
    workers: int | None = None,
) -> MCEstimate:
    """Integrate ``f`` against the tail measure of ``(X_1, ..., X_k)``.

    The measure is ``sum_i int E[f(0, ..., 0, z Theta_0, ..., z Theta_{k-i})
    1{Theta_{1-i} = ... = Theta_{-1} = 0}] d(-z^-alpha)``.  Term ``i`` has a
    backward part and is computed by telescoping.  ``f`` must vanish whenever
    every coordinate has modulus at most ``r0``; the ``z``-integral then
    starts at ``r0 / M`` with ``M`` the largest coordinate modulus, and is
    sampled exactly as a Pareto variable with one uniform per draw.

    Raises
    ------
    SupportViolation
        If ``f`` is nonzero on sampled windows inside the ``r0``-ball.
    """
    k = _check_lag("k", k)
    if k < 1:
        raise InvalidParameter("k must be >= 1")
    if not r0 > 0:
        raise InvalidParameter(f"r0 must be positive, got {r0}")
    n = _check_n(n)
    alpha = law.alpha
    _check_support(law, f, k, r0, seed)

    def chunk(rng, size):
        fwd = law.sample(size, k - 1, rng)
        u = 1.0 - rng.random(size)
        total = np.zeros(size)
        for i in range(1, k + 1):
            total += _telescope(law, _radial_term(f, k, i, r0, alpha, u), i - 1, k - i, fwd)
        return total

    return _mc(chunk, n, seed, ("nu-k", k), workers)


def _radial_term(f: WindowFunction, k: int, i: int, r0: float, alpha: float, u: np.ndarray) -> WindowFunction:
    """``g_i(theta_{1-i..k-i}) = 1{theta_{1-i..-1} = 0} int f(0^{i-1}, z theta_0..) d(-z^-alpha)``.

    ``u`` holds one uniform per original draw, so every telescoping window of a
    draw shares it.
    """
    s = i - 1

    def g(w: WindowBatch) -> np.ndarray:
        out = np.zeros(w.n)
        ok = np.ones(w.n, dtype=bool)
        for j in range(-s, 0):
            ok &= w.is_zero(j)
        big = w.max_modulus(0, w.stop)
        live = np.flatnonzero(ok & (big > 0))
        if live.size == 0:
            return out
        uu = u[w.row_ids()[live]]
        zmin = r0 / big[live]
        z = zmin * uu ** (-1.0 / alpha)
        tail = w.take(live).slice(0, w.stop).scaled(z).padded(s).shifted(1)
        out[live] = np.asarray(f(tail), dtype=float) * zmin ** (-alpha)
        return out

    return g


def _check_support(law: SpectralLaw, f: WindowFunction, k: int, r0: float, seed: int) -> None:
    rng = stream(seed, "support-probe", k)
    fwd = law.sample(CONTRACT_PROBE, k - 1, rng)
    big = fwd.max_modulus()
    shrink = r0 * rng.random(CONTRACT_PROBE) / np.where(big > 0, big, 1.0)
    probe = fwd.scaled(shrink).shifted(1)
    vals = np.asarray(f(probe), dtype=float)
    if np.any(vals != 0):
        raise SupportViolation(f"f is nonzero on sampled windows with every modulus below r0={r0}")


# ---------------------------------------------------------------------------
# Catalogue of test functions
# ---------------------------------------------------------------------------


class CatalogueFunction:
    """A named, vectorised function of a window batch."""

    name = "function"

    def args(self) -> tuple:
        return ()

    def __call__(self, w: WindowBatch) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{self.name}({', '.join(repr(a) for a in self.args())})"


class IndicatorExceed(CatalogueFunction):
    name = "indicator_exceed"

    def __init__(self, coord: int, level: float):
        self.coord, self.level = int(coord), float(level)

    def args(self):
        return (self.coord, self.level)

    def __call__(self, w):
        return (w.modulus(self.coord) > self.level).astype(float)


class IndicatorNonzero(CatalogueFunction):
    name = "indicator_nonzero"

    def __init__(self, coord: int):
        self.coord = int(coord)

    def args(self):
        return (self.coord,)

    def __call__(self, w):
        return (~w.is_zero(self.coord)).astype(float)


class ProductExceed(CatalogueFunction):
    """``prod_i 1{rho(x_{start+i}) > levels[i]}``."""

    name = "product_exceed"

    def __init__(self, *levels: float, start: int = 1):
        if not levels:
            raise InvalidParameter("product_exceed needs at least one level")
        self.levels, self.start = tuple(float(v) for v in levels), int(start)

    def args(self):
        return self.levels

    def __repr__(self):
        return f"{self.name}({', '.join(map(repr, self.levels))}, start={self.start})"

    def __call__(self, w):
        ok = np.ones(w.n, dtype=bool)
        for i, level in enumerate(self.levels):
            ok &= w.modulus(self.start + i) > level
        return ok.astype(float)


class MinAlphaPower(CatalogueFunction):
    """``min(rho(x_coord), 1)^alpha``: its mean at a lag is the extremogram limit."""

    name = "min_alpha_power"

    def __init__(self, coord: int, alpha: float = 1.0):
        self.coord, self.alpha = int(coord), float(alpha)

    def args(self):
        return (self.coord, self.alpha)

    def __call__(self, w):
        return np.minimum(w.modulus(self.coord), 1.0) ** self.alpha


indicator_exceed = IndicatorExceed
indicator_nonzero = IndicatorNonzero
product_exceed = ProductExceed
min_alpha_power = MinAlphaPower

CATALOGUE: dict[str, type[CatalogueFunction]] = {
    cls.name: cls for cls in (IndicatorExceed, IndicatorNonzero, ProductExceed, MinAlphaPower)
}


def parse_function(text: str) -> CatalogueFunction:
    """Parse catalogue calls such as ``"indicator_exceed(-1, 0.5)"``.

    >>> parse_function("product_exceed(1, 1, start=1)")
    product_exceed(1.0, 1.0, start=1)
    """
    try:
        call = ast.parse(text.strip(), mode="eval").body
    except SyntaxError:
        raise InvalidParameter(f"cannot parse test function {text!r}") from None
    if not isinstance(call, ast.Call) or not isinstance(call.func, ast.Name):
        raise InvalidParameter(f"expected a call like indicator_exceed(0, 1.0), got {text!r}")
    cls = CATALOGUE.get(call.func.id)
    if cls is None:
        raise InvalidParameter(f"unknown test function {call.func.id!r}; known: {sorted(CATALOGUE)}")
    try:
        args = [ast.literal_eval(a) for a in call.args]
        kwargs = {kw.arg: ast.literal_eval(kw.value) for kw in call.keywords}
        return cls(*args, **kwargs)
    except (ValueError, TypeError) as exc:
        raise InvalidParameter(f"bad arguments in {text!r}: {exc}") from None
