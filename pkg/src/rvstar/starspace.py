"""Star-shaped metric spaces: metric, origin, scalar multiplication and modulus.

Points are dense float vectors of length ``space.dim``.  Every method accepts a
single point (shape ``(dim,)``) or any batch with leading axes
(shape ``(..., dim)``), and scalars passed to :meth:`StarSpace.scale`
broadcast against the batch axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .errors import BracketFailure, InvalidParameter, OriginPoint, ShapeMismatch

# Default "is origin" floor; rho(x) = 0 <=> x = origin only holds in exact arithmetic.
ORIGIN_FLOOR = 1e-12
BISECTION_TOL = 1e-15
BRACKET_EXPONENT = 60

PointSampler = Callable[[int, np.random.Generator], np.ndarray]


class StarSpace:
    """A star-shaped metric space built on R^dim with the usual scalar multiplication.

    Subclasses supply :meth:`dist` and :meth:`modulus`.
    """

    kind = "abstract"

    def __init__(self, dim: int):
        if int(dim) != dim or dim < 1:
            raise InvalidParameter(f"dim must be a positive integer, got {dim!r}")
        self.dim = int(dim)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.dim,)

    @property
    def origin(self) -> np.ndarray:
        return np.zeros(self.dim)

    def scale(self, lam, x) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        return lam[..., None] * np.asarray(x, dtype=float)

    def dist(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def modulus(self, x) -> np.ndarray:
        raise NotImplementedError

    def norm0(self, x) -> np.ndarray:
        """Distance to the origin."""
        x = np.asarray(x, dtype=float)
        return self.dist(x, np.zeros_like(x))

    def params(self) -> dict[str, Any]:
        return {"dim": self.dim}

    def descriptor(self) -> dict[str, Any]:
        return {"kind": self.kind, **self.params()}

    def check_points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.dim:
            raise ShapeMismatch(f"{self.kind} points need trailing dimension {self.dim}, got shape {x.shape}")
        if not np.isfinite(x).all():
            raise InvalidParameter("points must be finite")
        return x

    def default_sampler(self) -> PointSampler:
        return shell_sampler(self)

    def __eq__(self, other) -> bool:
        return isinstance(other, StarSpace) and self.descriptor() == other.descriptor()

    def __hash__(self) -> int:
        return hash(tuple(sorted(self.descriptor().items())))

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class Euclidean(StarSpace):
    """R^dim with the p-norm metric; the norm itself is the modulus."""

    kind = "euclidean"

    def __init__(self, dim: int = 1, p: float = 2.0):
        super().__init__(dim)
        p = float(p)
        if not p >= 1.0:
            raise InvalidParameter(f"p-norm exponent must be >= 1, got {p}")
        self.p = p

    def _norm(self, v: np.ndarray) -> np.ndarray:
        if self.p == 2.0:
            return np.sqrt(np.einsum("...i,...i->...", v, v))
        return np.linalg.norm(v, ord=self.p, axis=-1)

    def dist(self, x, y):
        return self._norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))

    def modulus(self, x):
        return self._norm(np.asarray(x, dtype=float))

    norm0 = modulus

    def params(self):
        return {"dim": self.dim, "p": self.p}


class PathSup(StarSpace):
    """Real paths sampled on a fixed grid, uniform metric, sup modulus.

    On a fixed grid with no time deformation the Skorohod distance to the zero
    path is the sup norm, which is what the modulus returns.
    """

    kind = "path_sup"

    def __init__(self, grid: int = 16):
        super().__init__(grid)

    @property
    def grid(self) -> int:
        return self.dim

    def dist(self, x, y):
        return np.max(np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)), axis=-1)

    def modulus(self, x):
        return np.max(np.abs(np.asarray(x, dtype=float)), axis=-1)

    norm0 = modulus

    def params(self):
        return {"grid": self.dim}

    def default_sampler(self) -> PointSampler:
        def sample(n, rng):
            # Brownian-like paths rather than white noise.
            paths = np.cumsum(rng.standard_normal((n, self.dim)), axis=-1)
            paths /= np.max(np.abs(paths), axis=-1, keepdims=True)
            return paths * _log_uniform(rng, n)[:, None]

        return sample


class SnowflakeGauge(StarSpace):
    """R^dim with the snowflake metric ``|x - y|^beta`` and the gauge modulus.

    The metric is not homogeneous for ``beta < 1``, so the modulus is obtained
    numerically from the gauge construction (see :func:`gauge_modulus`).
    """

    kind = "snowflake_gauge"

    def __init__(self, dim: int = 2, beta: float = 0.5, tol: float = BISECTION_TOL):
        super().__init__(dim)
        beta = float(beta)
        if not 0.0 < beta <= 1.0:
            raise InvalidParameter(f"beta must lie in (0, 1], got {beta}")
        self.beta = beta
        self.tol = tol

    def dist(self, x, y):
        v = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return np.sqrt(np.einsum("...i,...i->...", v, v)) ** self.beta

    def norm0(self, x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.einsum("...i,...i->...", x, x)) ** self.beta

    def modulus(self, x):
        return gauge_modulus(self, x, tol=self.tol)

    def params(self):
        return {"dim": self.dim, "beta": self.beta}


class WeightedHilbert(StarSpace):
    """Truncated l2 with ``rho(x) = sqrt(sum_i x_i^2 / i)``.

    This is the counterexample space: rho is continuous, homogeneous and
    positive off the origin, yet ``rho(e_i) -> 0`` while ``d(e_i, 0) = 1``, so
    sublevel sets of rho are not a neighbourhood base of the origin.
    """

    kind = "weighted_hilbert"

    def __init__(self, truncation: int = 100):
        super().__init__(truncation)
        self.weights = 1.0 / np.arange(1, self.dim + 1, dtype=float)

    @property
    def truncation(self) -> int:
        return self.dim

    def dist(self, x, y):
        v = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return np.sqrt(np.einsum("...i,...i->...", v, v))

    def norm0(self, x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.einsum("...i,...i->...", x, x))

    def modulus(self, x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.einsum("...i,i,...i->...", x, self.weights, x))

    def params(self):
        return {"truncation": self.dim}

    def default_sampler(self) -> PointSampler:
        return basis_probe_sampler(self)


BUILTIN_SPACES: dict[str, type[StarSpace]] = {
    cls.kind: cls for cls in (Euclidean, PathSup, SnowflakeGauge, WeightedHilbert)
}


def space_from_config(block: Mapping[str, Any]) -> StarSpace:
    """Build a space from a config block such as ``{kind = "euclidean", dim = 2, p = 2}``."""
    if not isinstance(block, Mapping):
        raise InvalidParameter("space block must be a table")
    params = dict(block)
    kind = params.pop("kind", None)
    if kind not in BUILTIN_SPACES:
        raise InvalidParameter(f"unknown space kind {kind!r}; expected one of {sorted(BUILTIN_SPACES)}")
    try:
        return BUILTIN_SPACES[kind](**params)
    except TypeError as exc:
        raise InvalidParameter(f"bad parameters for space {kind!r}: {exc}") from None


def to_inline_table(block: Mapping[str, Any]) -> str:
    parts = []
    for key, value in block.items():
        parts.append(f'{key} = "{value}"' if isinstance(value, str) else f"{key} = {value!r}")
    return "{ " + ", ".join(parts) + " }"


# ---------------------------------------------------------------------------
# Polar decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolarCoordinates:
    r: float
    theta: np.ndarray


def polar_decompose(space: StarSpace, x, floor: float = ORIGIN_FLOOR) -> PolarCoordinates:
    """Split ``x`` into its modulus and its angle on the unit sphere.

    Raises
    ------
    OriginPoint
        If ``modulus(x) <= floor``: the angle is undefined at the origin.
    """
    x = space.check_points(x)
    if x.ndim != 1:
        raise ShapeMismatch("polar_decompose takes a single point; use polar_batch for batches")
    r = float(space.modulus(x))
    if r <= floor:
        raise OriginPoint(f"modulus {r:.3g} is at or below the origin floor {floor:.3g}")
    return PolarCoordinates(r=r, theta=space.scale(1.0 / r, x))


def reconstruct(space: StarSpace, polar: PolarCoordinates) -> np.ndarray:
    return space.scale(polar.r, polar.theta)


def polar_batch(space: StarSpace, x, floor: float = ORIGIN_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised polar map; rows at the origin raise :class:`OriginPoint`."""
    x = np.asarray(x, dtype=float)
    r = np.asarray(space.modulus(x))
    if np.any(r <= floor):
        raise OriginPoint(f"{int(np.sum(r <= floor))} point(s) at or below the origin floor")
    return r, space.scale(1.0 / r, x)


# ---------------------------------------------------------------------------
# Monotone bisection: gauge modulus and radial crossings
# ---------------------------------------------------------------------------


def _monotone_inf(score, n: int, tol: float, exponent: int = BRACKET_EXPONENT) -> np.ndarray:
    """Per-row ``inf{lam > 0 : score(lam) >= 0}`` for scores increasing in ``lam``.

    ``score(lam, rows)`` evaluates the given rows at row-aligned scalars.  A
    power-of-two bracket is refined with Illinois steps, falling back to
    bisection whenever the secant leaves the bracket.
    """
    rows = np.arange(n)
    lo = np.full(n, np.nan)
    hi = np.full(n, np.nan)
    flo = np.full(n, np.nan)
    fhi = np.full(n, np.nan)
    f1 = score(np.ones(n), rows)
    at_one = f1 >= 0
    hi[at_one], fhi[at_one] = 1.0, f1[at_one]
    lo[~at_one], flo[~at_one] = 1.0, f1[~at_one]

    for step, moving in ((-1, rows[at_one]), (1, rows[~at_one])):
        for e in range(1, exponent + 1):
            if moving.size == 0:
                break
            lam = 2.0 ** (step * e)
            f = score(np.full(moving.size, lam), moving)
            ok = f >= 0
            hi[moving[ok]], fhi[moving[ok]] = lam, f[ok]
            lo[moving[~ok]], flo[moving[~ok]] = lam, f[~ok]
            moving = moving[ok] if step < 0 else moving[~ok]
        if moving.size:
            raise BracketFailure(
                f"{moving.size} point(s) have no bracket inside [2^-{exponent}, 2^{exponent}]"
            )

    last = np.zeros(n, dtype=np.int8)
    for _ in range(400):
        live = ((hi - lo) > tol * hi) & (fhi > 0) & (np.nextafter(lo, np.inf) < hi)
        if not live.any():
            break
        idx = rows[live]
        a, b, fa, fb = lo[idx], hi[idx], flo[idx], fhi[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = b - fb * (b - a) / (fb - fa)
        bad = ~((cand > a) & (cand < b))
        cand[bad] = 0.5 * (a[bad] + b[bad])
        f = score(cand, idx)
        ok = f >= 0
        hi[idx[ok]], fhi[idx[ok]] = cand[ok], f[ok]
        lo[idx[~ok]], flo[idx[~ok]] = cand[~ok], f[~ok]
        side = np.where(ok, 1, -1).astype(np.int8)
        repeat = side == last[idx]
        flo[idx[repeat & ok]] *= 0.5
        fhi[idx[repeat & ~ok]] *= 0.5
        last[idx] = side
    return hi


def gauge_modulus(space: StarSpace, x, tol: float = BISECTION_TOL, exponent: int = BRACKET_EXPONENT):
    """``inf{lam > 0 : d(x / lam, 0) <= 1}``, and 0 at the origin.

    Only ``space.dist`` and ``space.scale`` are used, so this also works as the
    modulus of the space that calls it.  The criterion is monotone in ``lam``
    because scalar multiplication strictly increases the distance to the
    origin along rays.  ``tol`` is relative.

    Raises
    ------
    BracketFailure
        If the infimum lies outside ``[2**-exponent, 2**exponent]``, which
        happens when the metric does not scale uniformly.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    flat = x.reshape(-1, x.shape[-1])
    out = np.zeros(flat.shape[0])
    nonzero = np.flatnonzero(np.any(flat != 0.0, axis=-1))
    if nonzero.size:
        pts = flat[nonzero]

        def inside(lam, rows):
            return 1.0 - space.norm0(space.scale(1.0 / lam, pts[rows]))

        out[nonzero] = _monotone_inf(inside, pts.shape[0], tol, exponent)
    out = out.reshape(x.shape[:-1])
    return float(out) if single else out


def radial_crossing(space: StarSpace, theta, level: float, tol: float = 1e-13) -> np.ndarray:
    """Smallest ``r`` with ``d(r * theta, 0) >= level``, row by row."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))

    def reached(r, rows):
        return space.norm0(space.scale(r, theta[rows])) - level

    return _monotone_inf(reached, theta.shape[0], tol)


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


def _log_uniform(rng: np.random.Generator, n: int, lo: float = 1e-3, hi: float = 1e3) -> np.ndarray:
    return np.exp(rng.uniform(math.log(lo), math.log(hi), n))


def shell_sampler(space: StarSpace, r_min: float = 1e-3, r_max: float = 1e3) -> PointSampler:
    """Gaussian directions at log-uniform radii, covering many distance shells."""

    def sample(n, rng):
        g = rng.standard_normal((n, space.dim))
        g /= np.linalg.norm(g, axis=-1, keepdims=True)
        return g * _log_uniform(rng, n, r_min, r_max)[:, None]

    return sample


def basis_probe_sampler(space: StarSpace, r_min: float = 1e-3, r_max: float = 1e3) -> PointSampler:
    """Shell samples with the unit basis vectors e_1, ..., e_dim threaded through in order.

    The basis vectors are the probe sequence along which a modulus that fails
    the neighbourhood-base condition degenerates.
    """
    base = shell_sampler(space, r_min, r_max)

    def sample(n, rng):
        pts = base(n, rng)
        k = min(space.dim, n)
        pos = ((np.arange(1, k + 1) * n) // k) - 1
        pts[pos] = np.eye(space.dim)[:k]
        return pts

    return sample


# ---------------------------------------------------------------------------
# Axiom validation
# ---------------------------------------------------------------------------


@dataclass
class AxiomCheck:
    axiom: str
    passed: bool
    worst_violation: float
    n_samples: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "axiom": self.axiom,
            "pass": bool(self.passed),
            "worst_violation": float(self.worst_violation),
            "n_samples": int(self.n_samples),
        }


@dataclass
class NeighbourhoodEvidence:
    """Sampled evidence for ``inf{rho(x) : d(x, 0) >= eps} > 0`` at one ``eps``."""

    epsilon: float
    sampled_inf: float
    half_sample_inf: float
    flagged: bool
    witness: np.ndarray
    witness_modulus: float
    witness_dist: float

    @property
    def trend_ratio(self) -> float:
        return self.sampled_inf / self.half_sample_inf if self.half_sample_inf > 0 else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "sampled_inf": self.sampled_inf,
            "half_sample_inf": self.half_sample_inf,
            "trend_ratio": self.trend_ratio,
            "flagged": bool(self.flagged),
            "witness_modulus": self.witness_modulus,
            "witness_dist": self.witness_dist,
            "witness_support": np.flatnonzero(self.witness).tolist()[:16],
        }


@dataclass
class AxiomReport:
    space: dict[str, Any]
    n_samples: int
    checks: list[AxiomCheck]
    neighbourhood: list[NeighbourhoodEvidence] = field(default_factory=list)
    label: str = "sampled evidence"

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, axiom: str) -> AxiomCheck:
        for c in self.checks:
            if c.axiom == axiom:
                return c
        raise KeyError(axiom)

    @property
    def neighbourhood_flagged(self) -> bool:
        return any(e.flagged for e in self.neighbourhood)

    def to_dict(self) -> dict[str, Any]:
        return {
            "space": self.space,
            "label": self.label,
            "n_samples": self.n_samples,
            "pass": self.passed,
            "axioms": [c.to_dict() for c in self.checks],
            "neighbourhood_base": [e.to_dict() for e in self.neighbourhood],
        }


def _rel_coord_error(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    scale = np.maximum(np.max(np.abs(b), axis=-1), np.finfo(float).tiny)
    return np.max(np.abs(a - b), axis=-1) / scale


def validate_axioms(
    space: StarSpace,
    sampler: PointSampler | None = None,
    n_samples: int = 10_000,
    tol: float = 1e-9,
    eps_grid: Sequence[float] = (0.25, 0.5, 1.0),
    seed: int = 0,
    trend_tol: float = 0.05,
) -> AxiomReport:
    """Check the scalar-multiplication and modulus axioms on sampled points.

    Scaling identities and homogeneity are compared coordinate-wise at
    relative tolerance ``tol``; radial monotonicity must hold strictly.

    The neighbourhood-base condition quantifies over an infinite set, so it
    can only be probed.  For each sampled direction the smallest modulus on its
    ray with ``d(x, 0) >= eps`` is found by bisection; the running infimum over
    the sample sequence is flagged when it still drops by more than
    ``trend_tol`` between the first half of the sample and the whole sample,
    or when it collapses to zero.
    """
    from . import rng as _rng

    sampler = sampler or space.default_sampler()
    gen = _rng.stream(seed, "validate_axioms", space.kind)
    x = space.check_points(sampler(n_samples, gen))
    n = x.shape[0]
    origin = space.origin
    checks: list[AxiomCheck] = []

    identity = _rel_coord_error(space.scale(np.ones(n), x), x)
    checks.append(AxiomCheck("scale_identity", bool(np.all(identity <= tol)), float(identity.max()), n))

    lam1 = _log_uniform(gen, n)
    lam2 = _log_uniform(gen, n)
    assoc = _rel_coord_error(space.scale(lam1, space.scale(lam2, x)), space.scale(lam1 * lam2, x))
    checks.append(AxiomCheck("scale_associativity", bool(np.all(assoc <= tol)), float(assoc.max()), n))

    at_zero = np.max(np.abs(space.scale(np.zeros(n), x) - origin), axis=-1)
    checks.append(AxiomCheck("scale_zero", bool(np.all(at_zero == 0.0)), float(at_zero.max()), n))

    big = _log_uniform(gen, n)
    small = big * gen.uniform(0.0, 1.0 - 1e-6, n)
    small[: max(1, n // 20)] = 0.0
    d_small = space.norm0(space.scale(small, x))
    d_big = space.norm0(space.scale(big, x))
    checks.append(
        AxiomCheck(
            "radial_monotonicity",
            bool(np.all(d_small < d_big)),
            float(max(0.0, np.max(d_small - d_big))),
            n,
        )
    )

    rho = np.asarray(space.modulus(x))
    lam = _log_uniform(gen, n)
    expected = lam * rho
    homog = np.abs(np.asarray(space.modulus(space.scale(lam, x))) - expected) / np.maximum(expected, np.finfo(float).tiny)
    checks.append(AxiomCheck("modulus_homogeneity", bool(np.all(homog <= tol)), float(homog.max()), n))

    rho0 = float(space.modulus(origin))
    nonzero = np.any(x != 0.0, axis=-1)
    positive = bool(np.all(rho[nonzero] > 0.0))
    checks.append(AxiomCheck("modulus_separation", rho0 == 0.0 and positive, abs(rho0), n))

    evidence = []
    theta = space.scale(1.0 / rho[nonzero], x[nonzero])
    half = max(1, theta.shape[0] // 2)
    for eps in eps_grid:
        r_star = radial_crossing(space, theta, float(eps))
        i_min = int(np.argmin(r_star))
        m_all = float(r_star[i_min])
        m_half = float(np.min(r_star[:half]))
        witness = space.scale(m_all, theta[i_min])
        flagged = m_all <= ORIGIN_FLOOR or m_all < (1.0 - trend_tol) * m_half
        evidence.append(
            NeighbourhoodEvidence(
                epsilon=float(eps),
                sampled_inf=m_all,
                half_sample_inf=m_half,
                flagged=bool(flagged),
                witness=witness,
                witness_modulus=float(space.modulus(witness)),
                witness_dist=float(space.norm0(witness)),
            )
        )
    worst = max((1.0 - e.trend_ratio for e in evidence), default=0.0)
    checks.append(AxiomCheck("neighbourhood_base", not any(e.flagged for e in evidence), max(0.0, worst), n))
    return AxiomReport(space=space.descriptor(), n_samples=n, checks=checks, neighbourhood=evidence)


# ---------------------------------------------------------------------------
# Sequence-space metric
# ---------------------------------------------------------------------------


def seq_metric(space: StarSpace, x, y, m: int | None = None) -> float | np.ndarray:
    """Truncated product metric ``sum_{|t|<=m} 2^-|t| d(x_t, y_t) / (1 + d(x_t, y_t))``.

    ``x`` and ``y`` are windows of shape ``(..., 2m+1, dim)`` indexed from
    ``-m`` to ``m``.  The neglected tail of the full sequence metric is at most
    :func:`seq_metric_truncation_bound`.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ShapeMismatch(f"window shapes differ: {x.shape} vs {y.shape}")
    if x.ndim < 2 or x.shape[-1] != space.dim:
        raise ShapeMismatch(f"windows need shape (..., 2m+1, {space.dim}), got {x.shape}")
    length = x.shape[-2]
    if length % 2 == 0:
        raise ShapeMismatch(f"window length must be odd (2m+1), got {length}")
    half = length // 2
    if m is not None and m != half:
        raise ShapeMismatch(f"windows cover m={half}, expected m={m}")
    t = np.arange(-half, half + 1)
    d = space.dist(x, y)
    out = np.sum(2.0 ** -np.abs(t) * (d / (1.0 + d)), axis=-1)
    return float(out) if out.ndim == 0 else out


def seq_metric_truncation_bound(m: int) -> float:
    """Upper bound on the terms with ``|t| > m``: ``2 * sum_{t>m} 2^-t = 2 * 2^-m``."""
    return 2.0 * 2.0 ** -m
