"""Least-positive-root solvers for the fixed-point equations of the model.

Every equation here has the shape z = R(z) with R the Laplace-Stieltjes
transform of some service-related law evaluated at mu(1 - z).  When the mean
drift condition mu * mean > 1 holds, the least positive root lies strictly
inside (0, 1) and the monotone iteration z <- R(z) started from 0 climbs to
it.  Degenerate instances (drift at or below 1) report root 1 with a flag
instead of raising, so parameter sweeps can cross the bottleneck boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

from .distributions import ServiceDistribution

__all__ = [
    "RootResult",
    "least_root",
    "poisson_extinction",
    "CompoundSpec",
    "compound_lst",
    "satellite_root",
    "finite_n_root",
]

DEFAULT_TOL = 1e-12
MAX_ITERATIONS = 1_000_000
BISECTION_SPLITS = 200
# Plateau detection: successive-delta ratio above this for this many steps
# means sublinear convergence near criticality; switch to bisection.
PLATEAU_RATIO = 0.9999
PLATEAU_STEPS = 10_000


@dataclass(frozen=True)
class RootResult:
    """Least positive root of z = rhs(z) plus convergence diagnostics."""

    root: float
    iterations: int
    residual: float
    method: str  # "fixed-point" or "bisection"
    converged: bool
    degenerate: bool = False
    iterates: tuple[float, ...] | None = field(default=None, repr=False)


def _degenerate_result() -> RootResult:
    return RootResult(
        root=1.0, iterations=0, residual=0.0, method="fixed-point",
        converged=True, degenerate=True,
    )


def _eval_rhs(rhs: Callable[[float], float], z: float) -> float:
    value = rhs(z)
    if not math.isfinite(value):
        raise ValueError(f"fixed-point right-hand side returned {value!r} at z={z!r}")
    return value


def _bisect(rhs, lo: float, hi: float, iterations: int, track: list[float] | None) -> RootResult:
    # g(z) = z - rhs(z); g(lo) <= 0 <= g(hi) is the caller's responsibility.
    for _ in range(BISECTION_SPLITS):
        mid = 0.5 * (lo + hi)
        if mid - rhs(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15:
            break
    root = 0.5 * (lo + hi)
    return RootResult(
        root=root,
        iterations=iterations,
        residual=abs(root - _eval_rhs(rhs, root)),
        method="bisection",
        converged=True,
        iterates=tuple(track) if track is not None else None,
    )


def _solve(rhs: Callable[[float], float], tol: float, max_iter: int, track: bool) -> RootResult:
    iterates: list[float] | None = [0.0] if track else None
    z = 0.0
    prev_delta = math.inf
    plateau = 0
    for n in range(1, max_iter + 1):
        z_next = _eval_rhs(rhs, z)
        if z_next < z - 1e-12:
            # A valid LST iteration from 0 is nondecreasing; a drop means the
            # right-hand side is numerically untrustworthy here.
            return _bisect(rhs, 0.0, 1.0 - 1e-12, n, iterates)
        delta = z_next - z
        if iterates is not None:
            iterates.append(z_next)
        if delta <= tol:
            z = z_next
            # Polish: bracket the sign change of g(z) = z - rhs(z) just above
            # the exit point and bisect it down to machine width.
            lo, hi = z, None
            step = max(10.0 * tol, 1e-14)
            probe = z
            while probe < 1.0:
                probe = min(probe + step, 1.0 - 1e-15)
                if probe - rhs(probe) > 0.0:
                    hi = probe
                    break
                lo = probe
                step *= 10.0
                if probe >= 1.0 - 1e-15:
                    break
            if hi is not None:
                refined = _bisect(rhs, lo, hi, n, iterates)
                return replace(refined, method="fixed-point")
            return RootResult(
                root=z, iterations=n, residual=abs(z - _eval_rhs(rhs, z)),
                method="fixed-point", converged=True,
                iterates=tuple(iterates) if iterates is not None else None,
            )
        if prev_delta < math.inf and delta > PLATEAU_RATIO * prev_delta:
            plateau += 1
            if plateau >= PLATEAU_STEPS:
                return _bisect(rhs, z_next, 1.0 - 1e-12, n, iterates)
        else:
            plateau = 0
        prev_delta = delta
        z = z_next
    return _bisect(rhs, z, 1.0 - 1e-12, max_iter, iterates)


def least_root(
    lst: Callable[[float], float],
    mu: float,
    *,
    mean: float | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = MAX_ITERATIONS,
    track: bool = False,
) -> RootResult:
    """Least positive root of z = lst(mu - mu z).

    `lst` must be a normalized Laplace-Stieltjes transform (lst(0) = 1,
    decreasing). When `mean` (of the underlying law) is omitted it is
    estimated by a forward difference at 0. Instances with mu * mean <= 1
    return root 1 flagged degenerate.
    """
    if mu <= 0.0:
        raise ValueError(f"mu must be positive, got {mu!r}")
    at_zero = _eval_rhs(lst, 0.0)
    if abs(at_zero - 1.0) > 1e-9:
        raise ValueError(f"lst(0) = {at_zero!r}; not a normalized transform")
    if mean is None:
        h = 1e-7
        mean = (1.0 - _eval_rhs(lst, h)) / h
    if mu * mean <= 1.0:
        return _degenerate_result()
    return _solve(lambda z: lst(mu - mu * z), tol, max_iter, track)


def poisson_extinction(mean_offspring: float, tol: float = DEFAULT_TOL) -> RootResult:
    """Least root of z = exp(-a (1 - z)) for offspring mean a.

    This is the extinction probability of a Galton-Watson process with
    Poisson(a) offspring; a <= 1 is degenerate with root 1.
    """
    a = float(mean_offspring)
    if not math.isfinite(a) or a < 0.0:
        raise ValueError(f"mean_offspring must be a nonnegative real, got {a!r}")
    if a <= 1.0:
        return _degenerate_result()
    return _solve(lambda z: math.exp(-a * (1.0 - z)), tol, MAX_ITERATIONS, False)


@dataclass(frozen=True)
class CompoundSpec:
    """Geometric compound of hub services feeding one satellite station.

    The interarrival law at a satellite with routing probability
    `branch_prob` is a geometric number of hub services, each scaled by the
    fluid hub occupancy `scale`; the satellite serves at `service_rate`.
    """

    base: ServiceDistribution
    branch_prob: float
    scale: float
    service_rate: float

    def __post_init__(self):
        if not 0.0 < self.branch_prob <= 1.0:
            raise ValueError(f"branch_prob must lie in (0, 1], got {self.branch_prob!r}")
        if not 0.0 < self.scale <= 1.0:
            raise ValueError(f"scale must lie in (0, 1], got {self.scale!r}")
        if self.service_rate <= 0.0:
            raise ValueError(f"service_rate must be positive, got {self.service_rate!r}")

    @property
    def arrival_rate(self) -> float:
        """Fluid arrival rate lambda * p * q_bar seen by the station."""
        return self.base.rate * self.branch_prob * self.scale

    @property
    def mean_interarrival(self) -> float:
        return 1.0 / self.arrival_rate

    @property
    def non_bottleneck(self) -> bool:
        return self.service_rate > self.arrival_rate


def compound_lst(spec: CompoundSpec, s: float) -> float:
    """Transform of the geometric compound: p G^(s/q) / (1 - (1-p) G^(s/q)).

    Equals the transform of the full geometric convolution series without
    truncation; compound_lst(spec, 0) == 1.
    """
    if s < 0.0:
        raise ValueError("LST argument s must be nonnegative")
    g = float(spec.base.lst(s / spec.scale))
    p = spec.branch_prob
    return p * g / (1.0 - (1.0 - p) * g)


def satellite_root(
    spec: CompoundSpec,
    tol: float = DEFAULT_TOL,
    *,
    track: bool = False,
) -> RootResult:
    """Least root of z = compound_lst(spec, mu - mu z) for the station.

    This is the limiting per-busy-period offspring mean of the station's
    level-crossing process; bottleneck parameter sets report a degenerate
    root of 1.
    """
    if not spec.non_bottleneck:
        return _degenerate_result()
    mu = spec.service_rate
    return _solve(lambda z: compound_lst(spec, mu - mu * z), tol, MAX_ITERATIONS, track)


def finite_n_root(
    spec: CompoundSpec,
    n_units: int,
    occupancy: float,
    tol: float = DEFAULT_TOL,
) -> RootResult:
    """Finite-population form of `satellite_root` with floored hub occupancy.

    The hub holds floor(n_units * occupancy) of n_units units, so the
    compound scale becomes that ratio; as n_units grows the root converges
    to satellite_root of the same spec with scale == occupancy.
    """
    if n_units < 1:
        raise ValueError(f"n_units must be >= 1, got {n_units!r}")
    if not 0.0 < occupancy <= 1.0:
        raise ValueError(f"occupancy must lie in (0, 1], got {occupancy!r}")
    floored = math.floor(n_units * occupancy)
    if floored < 1:
        raise ValueError(
            f"floor(n_units * occupancy) = {floored} < 1; no units left in the hub"
        )
    effective = replace(spec, scale=floored / n_units)
    return satellite_root(effective, tol)
