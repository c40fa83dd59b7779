"""Stationary regularly varying series with closed-form spectral tail processes.

Every model is driven by iid Pareto(alpha) amplitudes ``Z_t = U^(-1/alpha)``
times iid unit-modulus angles ``A_t``.  On one-dimensional spaces the angle is
``+1``; otherwise it is a Gaussian vector divided by its modulus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidParameter, NoClosedForm
from .rng import normals, uniforms
from .series import SeriesPath
from .spectral import SpectralLaw, WindowBatch
from .starspace import Euclidean, PathSup, StarSpace, space_from_config

KINDS = ("iid_pareto", "ar1_positive", "max_moving_average", "path_amplitude")
AR1_BURN_TOL = 1e-12


def default_path(grid: int) -> np.ndarray:
    """``sin(pi s)`` on ``grid`` points of [0, 1], scaled to sup norm 1."""
    psi = np.sin(np.pi * np.linspace(0.0, 1.0, grid))
    return psi / np.max(np.abs(psi))


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    alpha: float
    space: StarSpace
    phi: float | None = None
    coefficients: tuple[float, ...] = ()
    path: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameter(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if not (isinstance(self.alpha, (int, float)) and self.alpha > 0 and math.isfinite(self.alpha)):
            raise InvalidParameter(f"alpha must be a positive finite number, got {self.alpha!r}")
        if self.kind == "ar1_positive":
            if self.phi is None or not 0.0 < self.phi < 1.0:
                raise InvalidParameter(f"ar1_positive needs phi in (0, 1), got {self.phi!r}")
        if self.kind == "max_moving_average":
            c = np.asarray(self.coefficients, dtype=float)
            if c.ndim != 1 or c.size == 0:
                raise InvalidParameter("max_moving_average needs at least one coefficient")
            if np.any(c < 0) or not np.all(np.isfinite(c)):
                raise InvalidParameter(f"coefficients must be finite and nonnegative, got {self.coefficients}")
            if not np.any(c > 0):
                raise InvalidParameter("at least one coefficient must be positive")
        if self.kind == "path_amplitude":
            if not isinstance(self.space, PathSup):
                raise InvalidParameter("path_amplitude lives on a path_sup space")
            psi = np.asarray(self.path, dtype=float)
            if psi.shape != (self.space.dim,):
                raise InvalidParameter(f"path needs {self.space.dim} grid values, got {psi.shape}")
            if not math.isclose(float(self.space.modulus(psi)), 1.0, rel_tol=1e-12):
                raise InvalidParameter("path must have unit modulus")

    @property
    def q(self) -> int:
        return len(self.coefficients) - 1

    def default_burn_in(self) -> int:
        if self.kind == "ar1_positive":
            return math.ceil(math.log(AR1_BURN_TOL) / math.log(self.phi))
        if self.kind == "max_moving_average":
            return self.q
        return 0

    def label(self) -> str:
        if self.kind == "ar1_positive":
            return f"ar1({self.phi:g},{self.alpha:g})"
        if self.kind == "max_moving_average":
            return f"mma({','.join(f'{c:g}' for c in self.coefficients)};{self.alpha:g})"
        if self.kind == "iid_pareto":
            return f"iid({self.alpha:g})"
        return f"path({self.alpha:g})"

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "alpha": self.alpha, "space": self.space.descriptor()}
        if self.phi is not None:
            out["phi"] = self.phi
        if self.coefficients:
            out["coefficients"] = list(self.coefficients)
        if self.path:
            out["path"] = list(self.path)
        return out


def iid_pareto(alpha: float, space: StarSpace | None = None) -> ModelSpec:
    return ModelSpec("iid_pareto", alpha, space or Euclidean(1))


def ar1_positive(phi: float, alpha: float, space: StarSpace | None = None) -> ModelSpec:
    return ModelSpec("ar1_positive", alpha, space or Euclidean(1), phi=phi)


def max_moving_average(coefficients, alpha: float, space: StarSpace | None = None) -> ModelSpec:
    return ModelSpec("max_moving_average", alpha, space or Euclidean(1), coefficients=tuple(map(float, coefficients)))


def path_amplitude(alpha: float, path=None, space: PathSup | None = None) -> ModelSpec:
    space = space or PathSup(16)
    psi = default_path(space.dim) if path is None else np.asarray(path, dtype=float)
    return ModelSpec("path_amplitude", alpha, space, path=tuple(map(float, psi)))


def model_from_config(block: Mapping[str, Any], space: StarSpace | None = None) -> ModelSpec:
    """Build a model from ``{kind = "ar1_positive", alpha = 2, phi = 0.5}`` and a space."""
    params = dict(block)
    kind = params.pop("kind", None)
    if "space" in params:
        space = space_from_config(params.pop("space"))
    if kind == "path_amplitude" and space is None:
        space = PathSup(16)
    space = space or Euclidean(1)
    if kind == "path_amplitude" and "path" not in params:
        params["path"] = default_path(space.dim)
    for key in ("coefficients", "path"):
        if key in params:
            params[key] = tuple(float(v) for v in params[key])
    try:
        return ModelSpec(kind=kind, space=space, **params)
    except TypeError as exc:
        raise InvalidParameter(f"bad parameters for model {kind!r}: {exc}") from None


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


def _angles(space: StarSpace, n: int, rng_or_seed, names=()) -> np.ndarray:
    if space.dim == 1:
        return np.ones((n, 1))
    if isinstance(rng_or_seed, np.random.Generator):
        g = rng_or_seed.standard_normal((n, space.dim))
    else:
        g = normals((n, space.dim), rng_or_seed, names)
    return space.scale(1.0 / np.asarray(space.modulus(g)), g)


def simulate(model: ModelSpec, n: int, seed: int = 0, burn_in: int | None = None, workers: int | None = None) -> SeriesPath:
    """Draw ``X_0, ..., X_{n-1}`` after discarding ``burn_in`` warm-up steps.

    The output depends only on ``(model, n, seed, burn_in)``: amplitudes and
    angles come from fixed-size chunks of named streams regardless of
    ``workers``.
    """
    if int(n) != n or n < 1:
        raise InvalidParameter(f"n must be a positive integer, got {n!r}")
    n = int(n)
    burn = model.default_burn_in() if burn_in is None else int(burn_in)
    if burn < 0:
        raise InvalidParameter("burn_in must be >= 0")
    total = n + burn
    alpha = model.alpha
    z = uniforms(total, seed, ("model", "amplitude"), workers) ** (-1.0 / alpha)

    if model.kind == "path_amplitude":
        pts = z[burn:, None] * np.asarray(model.path)[None, :]
    else:
        a = _angles(model.space, total, seed, ("model", "angle"))
        y = z[:, None] * a
        if model.kind == "iid_pareto":
            x = y
        elif model.kind == "ar1_positive":
            x = lfilter([1.0], [1.0, -model.phi], y, axis=0)
        else:
            c = np.asarray(model.coefficients)
            lagged = np.full((c.size, total), -np.inf)
            for j, cj in enumerate(c):
                lagged[j, j:] = cj * z[: total - j]
            pick = np.argmax(lagged, axis=0)
            t = np.arange(total)
            src = np.clip(t - pick, 0, None)
            x = (c[pick] * z[src])[:, None] * a[src]
        pts = x[burn:]
    seed_record = {"seed": int(seed), "streams": ["model/amplitude", "model/angle"]}
    return SeriesPath(pts, model.space, seed=seed_record, burn_in=burn, meta={"model": model.to_dict()})


# ---------------------------------------------------------------------------
# Closed-form spectral tail processes
# ---------------------------------------------------------------------------


def true_forward_spectral(model: ModelSpec) -> SpectralLaw:
    """The forward spectral tail process of ``model`` as a sampler.

    iid and path models put ``Theta_t`` at the origin for ``t >= 1``; AR(1)
    gives ``phi^t Theta_0``; the max moving average picks the dominating lag
    ``J`` with probability proportional to ``c_J^alpha`` and gives
    ``(c_{J+t}/c_J) Theta_0``, zero once ``J + t > q``.
    """
    space, alpha = model.space, model.alpha

    if model.kind in ("iid_pareto", "path_amplitude"):
        psi = None if model.kind == "iid_pareto" else np.asarray(model.path)

        def sampler(n, horizon, rng):
            v = np.zeros((n, horizon + 1, space.dim))
            v[:, 0] = _angles(space, n, rng) if psi is None else psi
            zero = np.ones((n, horizon + 1), dtype=bool)
            zero[:, 0] = False
            return WindowBatch(space, v, zero)

    elif model.kind == "ar1_positive":
        phi = model.phi

        def sampler(n, horizon, rng):
            theta0 = _angles(space, n, rng)
            powers = phi ** np.arange(horizon + 1)
            return WindowBatch(space, powers[None, :, None] * theta0[:, None, :])

    elif model.kind == "max_moving_average":
        c = np.asarray(model.coefficients)
        p = c**alpha / np.sum(c**alpha)
        cdf = np.cumsum(p)

        def sampler(n, horizon, rng):
            j = np.minimum(np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right"), c.size - 1)
            theta0 = _angles(space, n, rng)
            idx = j[:, None] + np.arange(horizon + 1)[None, :]
            ext = np.concatenate([c, np.zeros(horizon + 1)])
            ratio = ext[idx] / c[j][:, None]
            return WindowBatch(space, ratio[:, :, None] * theta0[:, None, :])

    else:  # pragma: no cover - guarded by ModelSpec
        raise NoClosedForm(f"no closed-form spectral process for {model.kind!r}")

    return SpectralLaw(alpha=alpha, space=space, sampler=sampler, name=model.label())


def true_extremogram(model: ModelSpec, t: int) -> float:
    """Limit of ``Pr[rho(X_t) > u | rho(X_0) > u]``, i.e. ``E[min(rho(Theta_t), 1)^alpha]``."""
    if int(t) != t or t < 0:
        raise InvalidParameter("lag must be a nonnegative integer")
    if t == 0:
        return 1.0
    if model.kind in ("iid_pareto", "path_amplitude"):
        return 0.0
    if model.kind == "ar1_positive":
        return model.phi ** (t * model.alpha)
    if model.kind == "max_moving_average":
        c = np.asarray(model.coefficients)
        w = c**model.alpha / np.sum(c**model.alpha)
        later = np.concatenate([c, np.zeros(t)])[np.arange(c.size) + t]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(c > 0, later / c, 0.0)
        return float(np.sum(w * np.minimum(ratio, 1.0) ** model.alpha))
    raise NoClosedForm(f"no closed-form extremogram for {model.kind!r}")


def true_moment(model: ModelSpec, t: int) -> float:
    """``E[rho(Theta_t)^alpha]``, the mass of ``Theta_{-t}`` off the origin."""
    if t == 0:
        return 1.0
    if model.kind in ("iid_pareto", "path_amplitude"):
        return 0.0
    if model.kind == "ar1_positive":
        return model.phi ** (t * model.alpha)
    c = np.asarray(model.coefficients)
    later = np.concatenate([c, np.zeros(t)])[np.arange(c.size) + t]
    return float(np.sum(later**model.alpha) / np.sum(c**model.alpha))
