"""Closed-form fluid limits for the bottlenecked closed network.

Everything here is exact algebra on the bottleneck parameters: the hub
occupancy curve, its complement at the bottleneck station, the discrete
partition expansion that refines to the curve, and the small-step difference
quotients whose limits recover the drift coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "FluidParams",
    "hub_fluid",
    "satellite_fluid",
    "hub_fluid_mean",
    "partition_expansion",
    "partition_expansion_sum",
    "difference_quotients",
    "FluidCurve",
    "fluid_curve",
]

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class FluidParams:
    """Hub rate, bottleneck routing probability and bottleneck service rate."""

    lam: float
    p_k: float
    mu_k: float

    def __post_init__(self):
        if self.lam <= 0.0:
            raise ValueError(f"lam must be positive, got {self.lam!r}")
        if not 0.0 < self.p_k <= 1.0:
            raise ValueError(f"p_k must lie in (0, 1], got {self.p_k!r}")
        if self.mu_k <= 0.0:
            raise ValueError(f"mu_k must be positive, got {self.mu_k!r}")
        if self.mu_k >= self.lam * self.p_k:
            raise ValueError(
                f"bottleneck condition violated: mu_k = {self.mu_k!r} must be "
                f"strictly below lam * p_k = {self.lam * self.p_k!r}"
            )

    @property
    def drift(self) -> float:
        """Fluid drain rate lam * p_k - mu_k of the hub."""
        return self.lam * self.p_k - self.mu_k

    @property
    def depth(self) -> float:
        """Total fluid fraction (lam p_k - mu_k) / (lam p_k) that leaves the hub."""
        return self.drift / (self.lam * self.p_k)

    @property
    def floor(self) -> float:
        """Long-run hub occupancy mu_k / (lam p_k)."""
        return self.mu_k / (self.lam * self.p_k)


def hub_fluid(fp: FluidParams, t: ArrayLike) -> ArrayLike:
    """Normalized hub occupancy 1 - depth * (1 - exp(-lam p_k t))."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("t must be nonnegative")
    out = 1.0 + fp.depth * np.expm1(-fp.lam * fp.p_k * t)
    return float(out) if out.ndim == 0 else out


def satellite_fluid(fp: FluidParams, t: ArrayLike) -> ArrayLike:
    """Normalized bottleneck queue, the exact complement of `hub_fluid`."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("t must be nonnegative")
    out = -fp.depth * np.expm1(-fp.lam * fp.p_k * t)
    return float(out) if out.ndim == 0 else out


def hub_fluid_mean(fp: FluidParams, t0: float, t1: float) -> float:
    """Time average of `hub_fluid` over the window [t0, t1], in closed form."""
    if not 0.0 <= t0 < t1:
        raise ValueError(f"need 0 <= t0 < t1, got [{t0!r}, {t1!r}]")
    b = fp.lam * fp.p_k
    integral = (1.0 - fp.depth) * (t1 - t0) + fp.depth * (math.exp(-b * t0) - math.exp(-b * t1)) / b
    return integral / (t1 - t0)


def partition_expansion(fp: FluidParams, delta: float, i: int) -> float:
    """Hub occupancy after i partition steps of width delta, closed form.

    U(i, delta) = 1 - depth * (1 - (1 - lam p_k delta)^i); refining delta at
    fixed t = i * delta converges to hub_fluid(t).
    """
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    if i < 1:
        raise ValueError(f"step index i must be >= 1, got {i!r}")
    x = fp.lam * fp.p_k * delta
    if x >= 1.0:
        raise ValueError(f"lam * p_k * delta = {x!r} must be below 1")
    return 1.0 - fp.depth * (1.0 - (1.0 - x) ** i)


def partition_expansion_sum(fp: FluidParams, delta: float, i: int) -> float:
    """Same quantity as `partition_expansion` via the alternating binomial sum.

    Kept as an independent self-check of the closed form; exact summation
    (math.fsum) keeps the alternating cancellation below 1e-12 for i <= 30.
    """
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    if i < 1:
        raise ValueError(f"step index i must be >= 1, got {i!r}")
    x = fp.lam * fp.p_k * delta
    if x >= 1.0:
        raise ValueError(f"lam * p_k * delta = {x!r} must be below 1")
    terms = [(-1.0) ** (l - 1) * math.comb(i, l) * x**l for l in range(1, i + 1)]
    return 1.0 - fp.depth * math.fsum(terms)


def difference_quotients(fp: FluidParams, delta: float) -> tuple[float, float, float]:
    """First three small-step quotients of the hub curve at the origin.

    Returns ((1 - q(d))/d, (q(2d) - 2q(d) + 1)/d^2, (1 - 3q(d) + 3q(2d) - q(3d))/d^3),
    which converge as delta -> 0 to drift, lam p_k * drift and (lam p_k)^2 * drift.
    """
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    q1 = hub_fluid(fp, delta)
    q2 = hub_fluid(fp, 2.0 * delta)
    q3 = hub_fluid(fp, 3.0 * delta)
    d1 = (1.0 - q1) / delta
    d2 = (q2 - 2.0 * q1 + 1.0) / delta**2
    d3 = (1.0 - 3.0 * q1 + 3.0 * q2 - q3) / delta**3
    return d1, d2, d3


@dataclass(frozen=True)
class FluidCurve:
    """Sampled hub-occupancy curve with its bottleneck complement."""

    times: tuple[float, ...]
    hub: tuple[float, ...]
    bottleneck: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.times) == len(self.hub) == len(self.bottleneck)):
            raise ValueError("times, hub and bottleneck must have equal length")
        if any(b > a + 1e-12 for a, b in zip(self.hub, self.hub[1:])):
            raise ValueError("hub occupancy must be nonincreasing in time")
        if any(not 0.0 <= v <= 1.0 for v in self.hub):
            raise ValueError("hub occupancy must lie in [0, 1]")


def fluid_curve(fp: FluidParams, times) -> FluidCurve:
    ts = tuple(sorted(float(t) for t in times))
    hub = tuple(float(hub_fluid(fp, t)) for t in ts)
    return FluidCurve(times=ts, hub=hub, bottleneck=tuple(1.0 - v for v in hub))
