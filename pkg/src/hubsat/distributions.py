"""Service-time distribution families with exact transforms and closeness metrics.

Five parametric families (exponential, Erlang, two-phase hyperexponential,
deterministic, gamma) expose exact Laplace-Stieltjes transforms, first two
moments, CDFs with explicit left limits at atoms, and inversion samplers.
On top of these the module measures how far a law is from memoryless:

* ``memoryless_deviation`` -- sup over (x, y) of |G(x) - G_y(x)| where G_y is
  the residual-life law given survival past y,
* ``kolmogorov_to_exponential`` -- sup distance to the exponential with the
  same mean,
* ``aging_class`` -- NBU / NWU / boundary classification from the sign of the
  survival-function defect S(x+y) - S(x)S(y).

All sup metrics are evaluated on a geometric grid (see ``GridSpec``); atoms of
the deterministic family are probed explicitly with left and right limits so
jump discontinuities are not lost between grid points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np
from scipy import special

__all__ = [
    "ServiceDistribution",
    "Exponential",
    "Erlang",
    "HyperExp2",
    "Deterministic",
    "Gamma",
    "GridSpec",
    "AgingClass",
    "ClosenessReport",
    "distribution_from_config",
    "scaled_service_sample",
    "memoryless_deviation",
    "kolmogorov_to_exponential",
    "aging_class",
    "closeness_report",
    "scv",
    "variance_exceeds_exponential",
]

ArrayLike = Union[float, np.ndarray]

# Family registry is filled as classes are defined (maps config names).
_FAMILIES: dict[str, type] = {}


def _check_positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be a positive finite real, got {value!r}")
    return value


class ServiceDistribution:
    """Base class: a positive service-time law with finite second moment."""

    family: str = "base"

    # --- contract -----------------------------------------------------------

    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def second_moment(self) -> float:
        raise NotImplementedError

    @property
    def rate(self) -> float:
        """Reciprocal mean; the service rate of the matched exponential."""
        return 1.0 / self.mean

    def lst(self, s: ArrayLike) -> ArrayLike:
        """Laplace-Stieltjes transform integral(exp(-s x) dG(x)), s >= 0."""
        raise NotImplementedError

    def cdf(self, x: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def sf(self, x: ArrayLike) -> ArrayLike:
        """Survival function 1 - cdf(x), computed without cancellation."""
        raise NotImplementedError

    def cdf_left(self, x: ArrayLike) -> ArrayLike:
        """Left limit of the CDF; differs from cdf only at atoms."""
        return self.cdf(x)

    def sf_left(self, x: ArrayLike) -> ArrayLike:
        """P{X >= x}, the complement of the CDF left limit."""
        return self.sf(x)

    def quantile(self, u: ArrayLike) -> ArrayLike:
        """Generalized inverse CDF, defined for u in [0, 1)."""
        raise NotImplementedError

    def atoms(self) -> tuple[float, ...]:
        return ()

    def params(self) -> dict[str, float]:
        raise NotImplementedError

    # --- shared behaviour ----------------------------------------------------

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Draw by inversion: one uniform per variate through the quantile."""
        return self.quantile(rng.random(size))

    def sample_one(self, rng: np.random.Generator) -> float:
        return float(self.quantile(rng.random()))

    def to_config(self) -> dict:
        return {"family": self.family, "params": self.params()}

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={v:g}" for k, v in self.params().items())
        return f"{type(self).__name__}({inner})"

    def __eq__(self, other) -> bool:
        return type(other) is type(self) and other.params() == self.params()

    def __hash__(self) -> int:
        return hash((type(self).__name__, tuple(sorted(self.params().items()))))

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        _FAMILIES[cls.family] = cls

    @staticmethod
    def _check_s(s: ArrayLike) -> np.ndarray:
        arr = np.asarray(s, dtype=float)
        if np.any(arr < 0.0):
            raise ValueError("LST argument s must be nonnegative")
        return arr


class Exponential(ServiceDistribution):
    """Exponential law with the given rate (mean 1/rate)."""

    family = "exponential"

    def __init__(self, rate: float):
        self._rate = _check_positive("rate", rate)

    @property
    def mean(self) -> float:
        return 1.0 / self._rate

    @property
    def second_moment(self) -> float:
        return 2.0 / self._rate**2

    def lst(self, s):
        s = self._check_s(s)
        out = self._rate / (self._rate + s)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0.0, -np.expm1(-self._rate * np.maximum(x, 0.0)), 0.0)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0.0, np.exp(-self._rate * np.maximum(x, 0.0)), 1.0)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return -np.log1p(-u) / self._rate

    def sample_one(self, rng) -> float:
        return -math.log1p(-rng.random()) / self._rate

    def params(self):
        return {"rate": self._rate}


class Erlang(ServiceDistribution):
    """Erlang law: sum of `shape` independent exponentials of the given rate."""

    family = "erlang"

    def __init__(self, shape: int, rate: float):
        if int(shape) != shape or shape < 1:
            raise ValueError(f"shape must be a positive integer, got {shape!r}")
        self._shape = int(shape)
        self._rate = _check_positive("rate", rate)

    @property
    def mean(self) -> float:
        return self._shape / self._rate

    @property
    def second_moment(self) -> float:
        return self._shape * (self._shape + 1) / self._rate**2

    def lst(self, s):
        s = self._check_s(s)
        out = (self._rate / (self._rate + s)) ** self._shape
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return special.gammainc(self._shape, self._rate * np.maximum(x, 0.0))

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return special.gammaincc(self._shape, self._rate * np.maximum(x, 0.0))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return special.gammaincinv(self._shape, u) / self._rate

    def params(self):
        return {"shape": self._shape, "rate": self._rate}


class Gamma(ServiceDistribution):
    """Gamma law with arbitrary positive shape and rate."""

    family = "gamma"

    def __init__(self, shape: float, rate: float):
        self._shape = _check_positive("shape", shape)
        self._rate = _check_positive("rate", rate)

    @property
    def mean(self) -> float:
        return self._shape / self._rate

    @property
    def second_moment(self) -> float:
        return self._shape * (self._shape + 1) / self._rate**2

    def lst(self, s):
        s = self._check_s(s)
        out = (self._rate / (self._rate + s)) ** self._shape
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return special.gammainc(self._shape, self._rate * np.maximum(x, 0.0))

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return special.gammaincc(self._shape, self._rate * np.maximum(x, 0.0))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return special.gammaincinv(self._shape, u) / self._rate

    def params(self):
        return {"shape": self._shape, "rate": self._rate}


class HyperExp2(ServiceDistribution):
    """Two-phase hyperexponential: Exp(rate1) w.p. weight, else Exp(rate2)."""

    family = "hyperexp2"

    def __init__(self, weight: float, rate1: float, rate2: float):
        weight = float(weight)
        if not 0.0 < weight < 1.0:
            raise ValueError(f"weight must lie in (0, 1), got {weight!r}")
        self._w = weight
        self._r1 = _check_positive("rate1", rate1)
        self._r2 = _check_positive("rate2", rate2)

    @property
    def mean(self) -> float:
        return self._w / self._r1 + (1.0 - self._w) / self._r2

    @property
    def second_moment(self) -> float:
        return 2.0 * self._w / self._r1**2 + 2.0 * (1.0 - self._w) / self._r2**2

    def lst(self, s):
        s = self._check_s(s)
        out = self._w * self._r1 / (self._r1 + s) + (1.0 - self._w) * self._r2 / (self._r2 + s)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        return 1.0 - self.sf(x)

    def sf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return self._w * np.exp(-self._r1 * x) + (1.0 - self._w) * np.exp(-self._r2 * x)

    def quantile(self, u):
        # No closed inverse.  The survival function is convex and decreasing,
        # so Newton started at (or clamped into) the left of the root climbs
        # monotonically; chunking keeps the working set cache resident.
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        flat = np.atleast_1d(u).ravel()
        if np.any((flat < 0.0) | (flat >= 1.0)):
            raise ValueError("quantile argument must lie in [0, 1)")
        out = np.empty_like(flat)
        w, v, r1, r2 = self._w, 1.0 - self._w, self._r1, self._r2
        for start in range(0, flat.size, 1 << 17):
            target = 1.0 - flat[start:start + (1 << 17)]
            x = -self.mean * np.log(target)  # matched-exponential start
            for _ in range(60):
                e1 = np.exp(-r1 * x)
                e2 = np.exp(-r2 * x)
                step = (w * e1 + v * e2 - target) / (w * r1 * e1 + v * r2 * e2)
                x += step
                np.maximum(x, 0.0, out=x)
                if float(np.max(np.abs(step))) <= 1e-13 * (1.0 + float(np.max(x))):
                    break
            out[start:start + (1 << 17)] = x
        out = out.reshape(np.atleast_1d(u).shape)
        return float(out[0]) if scalar else out

    def params(self):
        return {"weight": self._w, "rate1": self._r1, "rate2": self._r2}


class Deterministic(ServiceDistribution):
    """Unit point mass at a fixed positive service time."""

    family = "deterministic"

    def __init__(self, value: float):
        self._value = _check_positive("value", value)

    @property
    def mean(self) -> float:
        return self._value

    @property
    def second_moment(self) -> float:
        return self._value**2

    def lst(self, s):
        s = self._check_s(s)
        out = np.exp(-s * self._value)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= self._value, 1.0, 0.0)

    def cdf_left(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > self._value, 1.0, 0.0)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= self._value, 0.0, 1.0)

    def sf_left(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > self._value, 0.0, 1.0)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        out = np.full_like(u, self._value)
        return float(out) if out.ndim == 0 else out

    def sample_one(self, rng) -> float:
        rng.random()  # consume one uniform so streams stay aligned across families
        return self._value

    def atoms(self):
        return (self._value,)

    def params(self):
        return {"value": self._value}


def distribution_from_config(obj: dict) -> ServiceDistribution:
    """Build a distribution from ``{"family": name, "params": {...}}``."""
    if not isinstance(obj, dict) or "family" not in obj:
        raise ValueError("distribution config must be an object with a 'family' key")
    family = obj["family"]
    cls = _FAMILIES.get(family)
    if cls is None:
        known = ", ".join(sorted(k for k in _FAMILIES if k != "base"))
        raise ValueError(f"unknown distribution family {family!r} (known: {known})")
    params = obj.get("params", {})
    if not isinstance(params, dict):
        raise ValueError("'params' must be an object")
    try:
        return cls(**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for family {family!r}: {exc}") from exc


def scaled_service_sample(dist: ServiceDistribution, k: int, rng: np.random.Generator) -> float:
    """One service time drawn from the law scaled down by the occupancy k.

    With k units present at a service start the duration is X/k for X from
    the base law, so the expected duration is mean/k.
    """
    if k < 1:
        raise ValueError(f"occupancy k must be >= 1, got {k}")
    return dist.sample_one(rng) / k


# ---------------------------------------------------------------------------
# Closeness metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Geometric evaluation grid for the sup metrics.

    x covers (0, q(1 - tail_prob)] with `x_points` geometric points (plus 0).
    y extends further, to the survival floor q(1 - min_survival): residual
    gaps keep growing in y for non-exponential laws, so y must reach the
    conditioning limit rather than stop at the x tail.
    """

    x_points: int = 4096
    y_points: int = 512
    tail_prob: float = 1e-6
    min_survival: float = 1e-12

    def __post_init__(self):
        if self.x_points < 2 or self.y_points < 2:
            raise ValueError("grid needs at least two points per axis")
        if not 0.0 < self.tail_prob < 1.0:
            raise ValueError("tail_prob must lie in (0, 1)")

    def x_grid(self, dist: ServiceDistribution) -> np.ndarray:
        hi = float(dist.quantile(1.0 - self.tail_prob))
        xs = np.geomspace(hi * 1e-9, hi, self.x_points - 1)
        return np.concatenate(([0.0], xs))

    def y_grid(self, dist: ServiceDistribution) -> np.ndarray:
        hi = float(dist.quantile(1.0 - self.min_survival))
        ys = np.concatenate(([0.0], np.geomspace(hi * 1e-9, hi, self.y_points - 1)))
        keep = np.asarray(dist.sf(ys)) >= self.min_survival
        return ys[keep]

    def describe(self, dist: ServiceDistribution) -> str:
        hi = float(dist.quantile(1.0 - self.tail_prob))
        return (
            f"geometric x[{self.x_points}] up to {hi:.6g} "
            f"(tail {self.tail_prob:g}), y[{self.y_points}] with survival >= {self.min_survival:g}"
        )


class AgingClass(Enum):
    NBU = "NBU"
    NWU = "NWU"
    BOUNDARY = "Boundary"
    NEITHER = "Neither"


@dataclass(frozen=True)
class ClosenessReport:
    """Grid estimates of the distance-from-memoryless metrics for one law."""

    epsilon_hat: float
    kolmogorov_exp: float
    aging: AgingClass
    grid: str
    grid_tol: float


def grid_tolerance(dist: ServiceDistribution, grid: GridSpec | None = None) -> float:
    """Largest continuous-part CDF increment between adjacent x-grid points.

    Bounds how far a grid maximum of a CDF-difference sup can sit below the
    true sup; atom jumps are excluded because atoms are probed explicitly.
    """
    grid = grid or GridSpec()
    xs = grid.x_grid(dist)
    inc = np.asarray(dist.cdf_left(xs[1:])) - np.asarray(dist.cdf(xs[:-1]))
    return float(np.max(np.clip(inc, 0.0, None)))


def _atom_x_candidates(dist: ServiceDistribution, y: np.ndarray) -> list[np.ndarray]:
    """x points where |G(x) - G_y(x)| can jump: atoms and atoms shifted by y."""
    cands = []
    for a in dist.atoms():
        cands.append(np.full_like(y, a))
        shifted = a - y
        cands.append(np.where(shifted > 0.0, shifted, a))
    return cands


def memoryless_deviation(dist: ServiceDistribution, grid: GridSpec | None = None) -> float:
    """Grid sup over x, y of |G(x) - G_y(x)| with G_y the residual-life law.

    Zero (up to rounding) iff the law is exponential; equals 1 for a point
    mass. y ranges over grid points with survival above ``grid.min_survival``.
    The gap is evaluated in survival form |S(x+y)/S(y) - S(x)| in y-chunks
    small enough to stay cache resident.
    """
    grid = grid or GridSpec()
    xs = grid.x_grid(dist)
    ys = grid.y_grid(dist)
    if xs.size == 0 or ys.size == 0:
        raise ValueError("empty evaluation grid")

    sx = np.asarray(dist.sf(xs))
    sy = np.asarray(dist.sf(ys))
    rows = max(1, (1 << 18) // xs.size)
    best = 0.0
    for i in range(0, ys.size, rows):
        yb = ys[i:i + rows, None]
        ratio = np.asarray(dist.sf(xs[None, :] + yb)) / sy[i:i + rows, None]
        ratio -= sx[None, :]
        np.abs(ratio, out=ratio)
        best = max(best, float(ratio.max()))

    # Left limits differ from the survival function only at atoms.
    if not dist.atoms():
        return best

    sx_left = np.asarray(dist.sf_left(xs))
    for i in range(0, ys.size, rows):
        yb = ys[i:i + rows, None]
        ratio = np.asarray(dist.sf_left(xs[None, :] + yb)) / sy[i:i + rows, None]
        ratio -= sx_left[None, :]
        np.abs(ratio, out=ratio)
        best = max(best, float(ratio.max()))

    for xa in _atom_x_candidates(dist, ys):
        gap_r = np.abs(np.asarray(dist.sf(xa + ys)) / sy - np.asarray(dist.sf(xa)))
        gap_l = np.abs(np.asarray(dist.sf_left(xa + ys)) / sy - np.asarray(dist.sf_left(xa)))
        best = max(best, float(gap_r.max()), float(gap_l.max()))
    return best


def kolmogorov_to_exponential(dist: ServiceDistribution, grid: GridSpec | None = None) -> float:
    """Grid sup of |G(x) - (1 - exp(-x/mean))| against the matched exponential."""
    grid = grid or GridSpec()
    xs = grid.x_grid(dist)
    if xs.size == 0:
        raise ValueError("empty evaluation grid")
    lam = dist.rate
    expo = -np.expm1(-lam * xs)
    best = float(np.max(np.abs(np.asarray(dist.cdf(xs)) - expo)))
    if dist.atoms():
        best = max(best, float(np.max(np.abs(np.asarray(dist.cdf_left(xs)) - expo))))
    for a in dist.atoms():
        ea = -math.expm1(-lam * a)
        best = max(
            best,
            abs(float(dist.cdf(a)) - ea),
            abs(float(dist.cdf_left(a)) - ea),
        )
    return best


def aging_class(
    dist: ServiceDistribution,
    grid: GridSpec | None = None,
    tol: float = 1e-9,
) -> AgingClass:
    """Classify by the sign of S(x+y) - S(x)S(y) over the grid.

    Uniformly <= tol gives NBU, uniformly >= -tol gives NWU, both give
    BOUNDARY (the exponential), neither gives NEITHER.
    """
    grid = grid or GridSpec()
    xs = grid.y_grid(dist)  # symmetric roles; the coarser axis keeps this cheap
    if xs.size == 0:
        raise ValueError("empty evaluation grid")
    sx = np.asarray(dist.sf(xs))
    defect = np.asarray(dist.sf(xs[None, :] + xs[:, None])) - sx[None, :] * sx[:, None]
    nbu = bool(np.all(defect <= tol))
    nwu = bool(np.all(defect >= -tol))
    if nbu and nwu:
        return AgingClass.BOUNDARY
    if nbu:
        return AgingClass.NBU
    if nwu:
        return AgingClass.NWU
    return AgingClass.NEITHER


def closeness_report(dist: ServiceDistribution, grid: GridSpec | None = None) -> ClosenessReport:
    grid = grid or GridSpec()
    return ClosenessReport(
        epsilon_hat=memoryless_deviation(dist, grid),
        kolmogorov_exp=kolmogorov_to_exponential(dist, grid),
        aging=aging_class(dist, grid),
        grid=grid.describe(dist),
        grid_tol=grid_tolerance(dist, grid),
    )


def scv(dist: ServiceDistribution) -> float:
    """Squared coefficient of variation (1 for the exponential)."""
    m = dist.mean
    return (dist.second_moment - m * m) / (m * m)


def variance_exceeds_exponential(dist: ServiceDistribution) -> bool:
    """True iff the second moment strictly exceeds 2 * mean^2.

    Equivalently the variance strictly exceeds that of the exponential with
    the same mean; the exponential itself sits exactly on the boundary.
    """
    return dist.second_moment > 2.0 * dist.mean**2
