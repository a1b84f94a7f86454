"""Moment bounds and continuity envelopes for the satellite root.

Given the first two moments (a, b) of the compound interarrival law at a
satellite, the satellite root is sandwiched between the Poisson extinction
probability at offspring mean a * mu and 1 + (a^2/b)(ell - 1) for any law in
the two-moment class.  When the hub law is within epsilon of memoryless in
the residual-life metric, the root additionally stays within
(2 eps / p)(1 - ell) of the exponential-collapse value rho = lam p q / mu
(within (eps / p)(1 - ell) for NBU/NWU laws), giving the reported envelopes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import ServiceDistribution, variance_exceeds_exponential
from .roots import poisson_extinction

__all__ = [
    "CompoundMoments",
    "wald_moments",
    "RolskiBounds",
    "rolski_bounds",
    "continuity_gap",
    "traffic_intensity",
    "BoundsReport",
    "theorem_envelope",
    "QueueLengthLaw",
    "queue_length_law",
]

VARIANTS = ("corrected", "paper")
THEOREMS = ("T1", "T2")


@dataclass(frozen=True)
class CompoundMoments:
    """First two moments of the geometric-compound interarrival law."""

    a: float
    b: float
    variant: str

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.a <= 0.0 or self.b <= 0.0:
            raise ValueError("moments must be positive")
        if self.variant == "corrected" and self.b <= self.a**2:
            raise ValueError("second moment must exceed squared mean")


def wald_moments(
    dist: ServiceDistribution,
    p: float,
    q_bar: float,
    variant: str = "corrected",
) -> CompoundMoments:
    """Compound moments of a geometric sum of occupancy-scaled services.

    The summand is a service time scaled by the hub occupancy q_bar and the
    count is geometric on {1, 2, ...} with success probability p.  The mean
    is always 1 / (lam p q_bar).  The second moment depends on the geometric
    variance used: "corrected" is the standard (1-p)/p^2, "paper" keeps the
    literal 1/(1-p) + (1-2p)/p^2 (they agree only at p = 1/2).
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie strictly in (0, 1), got {p!r}")
    if not 0.0 < q_bar <= 1.0:
        raise ValueError(f"q_bar must lie in (0, 1], got {q_bar!r}")
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    lam = dist.rate
    r = dist.second_moment
    mean_xi = 1.0 / (lam * q_bar)
    var_xi = (r - 1.0 / lam**2) / q_bar**2
    if variant == "corrected":
        var_tau = (1.0 - p) / p**2
    else:
        var_tau = 1.0 / (1.0 - p) + (1.0 - 2.0 * p) / p**2
    a = mean_xi / p
    b = var_xi / p + var_tau * mean_xi**2 + a**2
    return CompoundMoments(a=a, b=b, variant=variant)


@dataclass(frozen=True)
class RolskiBounds:
    """Distribution-free sandwich for the least root given two moments."""

    lo: float
    hi: float
    degenerate: bool


def rolski_bounds(moments: CompoundMoments, mu: float) -> RolskiBounds:
    """Sandwich ell <= root <= 1 + (a^2/b)(ell - 1) for any law with (a, b)."""
    if mu <= 0.0:
        raise ValueError(f"mu must be positive, got {mu!r}")
    ell = poisson_extinction(moments.a * mu)
    hi = 1.0 + (moments.a**2 / moments.b) * (ell.root - 1.0)
    return RolskiBounds(lo=ell.root, hi=hi, degenerate=ell.degenerate)


def continuity_gap(kappa: float, moments: CompoundMoments, mu: float) -> float:
    """Guaranteed root distance kappa * (1 - ell) for two laws in the class.

    Applies to a pair of laws sharing the moments (a, b) whose Kolmogorov
    distance is below kappa; requires kappa < 1 - a^2/b.
    """
    if not 0.0 <= kappa <= 1.0:
        raise ValueError(f"kappa must lie in [0, 1], got {kappa!r}")
    threshold = 1.0 - moments.a**2 / moments.b
    if kappa >= threshold:
        raise ValueError(
            f"kappa = {kappa!r} must be strictly below 1 - a^2/b = {threshold!r}"
        )
    ell = poisson_extinction(moments.a * mu)
    return kappa * (1.0 - ell.root)


def traffic_intensity(lam: float, p_j: float, mu_j: float, q_bar: float) -> float:
    """Offered load lam * q_bar * p_j / mu_j at a satellite station.

    Equals the least root of the exponential-hub fixed point; values at or
    above 1 indicate bottleneck parameters and are returned unflagged.
    """
    if lam <= 0.0 or mu_j <= 0.0:
        raise ValueError("rates must be positive")
    if not 0.0 < p_j <= 1.0:
        raise ValueError(f"p_j must lie in (0, 1], got {p_j!r}")
    if not 0.0 < q_bar <= 1.0:
        raise ValueError(f"q_bar must lie in (0, 1], got {q_bar!r}")
    return lam * q_bar * p_j / mu_j


@dataclass(frozen=True)
class BoundsReport:
    """All bound components for one (station, time) evaluation."""

    rho: float
    ell: float
    rolski_lo: float
    rolski_hi: float
    eps_lo: float
    eps_hi: float
    lower: float
    upper: float
    theorem: str
    epsilon: float
    variant: str
    f1_satisfied: bool
    f2_satisfied: bool
    degenerate: bool


def theorem_envelope(
    dist: ServiceDistribution,
    p_j: float,
    mu_j: float,
    q_bar: float,
    epsilon: float,
    theorem: str = "T1",
    variant: str = "corrected",
) -> BoundsReport:
    """Envelope rho -/+ min(Rolski slack, closeness slack) for the root.

    `epsilon` is any upper bound on the residual-life deviation of the hub
    law (callers may pass a measured grid value or an analytic one); the
    closeness slack is (2 eps / p)(1 - ell) for theorem "T1" and
    (eps / p)(1 - ell) for "T2" (NBU/NWU laws).  Bottleneck parameters are
    flagged degenerate rather than rejected, and the f1/f2 moment conditions
    are reported, not enforced.
    """
    if theorem not in THEOREMS:
        raise ValueError(f"theorem must be one of {THEOREMS}, got {theorem!r}")
    if epsilon < 0.0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon!r}")
    moments = wald_moments(dist, p_j, q_bar, variant)
    rho = traffic_intensity(dist.rate, p_j, mu_j, q_bar)
    sandwich = rolski_bounds(moments, mu_j)
    ell = sandwich.lo
    factor = (2.0 if theorem == "T1" else 1.0) * epsilon / p_j
    closeness = factor * (1.0 - ell)
    eps_lo = min(rho - ell, closeness)
    eps_hi = min(sandwich.hi - rho, closeness)
    f1 = variance_exceeds_exponential(dist)
    f2 = ell <= rho <= sandwich.hi
    return BoundsReport(
        rho=rho,
        ell=ell,
        rolski_lo=sandwich.lo,
        rolski_hi=sandwich.hi,
        eps_lo=eps_lo,
        eps_hi=eps_hi,
        lower=rho - eps_lo,
        upper=rho + eps_hi,
        theorem=theorem,
        epsilon=epsilon,
        variant=variant,
        f1_satisfied=f1,
        f2_satisfied=f2,
        degenerate=sandwich.degenerate or rho >= 1.0,
    )


@dataclass(frozen=True)
class QueueLengthLaw:
    """Modified-geometric queue-length law of a non-bottleneck station.

    P{Q = 0} = 1 - rho and P{Q = i} = rho phi^(i-1) (1 - phi) for i >= 1;
    `probs` tabulates the mass up to `i_max` with tail mass rho phi^i_max.
    """

    rho: float
    phi: float
    probs: np.ndarray

    @property
    def i_max(self) -> int:
        return len(self.probs) - 1

    @property
    def tail_mass(self) -> float:
        return float(self.rho * self.phi**self.i_max)

    @property
    def mean_queue_length(self) -> float:
        return self.rho / (1.0 - self.phi)

    def pmf(self, i: int) -> float:
        if i < 0:
            return 0.0
        if i == 0:
            return 1.0 - self.rho
        return self.rho * self.phi ** (i - 1) * (1.0 - self.phi)


TAIL_TARGET = 1e-12
I_MAX_CAP = 10_000


def queue_length_law(rho: float, phi: float, i_max: int | None = None) -> QueueLengthLaw:
    """Tabulated law for offered load rho and branching root phi.

    When i_max is omitted it is the smallest index with tail mass below
    1e-12, capped at 10000.  rho = 0 collapses to a point mass at 0.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho!r}")
    if not 0.0 < phi < 1.0:
        raise ValueError(f"phi must lie in (0, 1), got {phi!r}")
    if i_max is None:
        if rho == 0.0:
            i_max = 1
        else:
            i_max = min(I_MAX_CAP, max(1, math.ceil(math.log(TAIL_TARGET / rho) / math.log(phi))))
    elif i_max < 1:
        raise ValueError(f"i_max must be >= 1, got {i_max!r}")
    i = np.arange(i_max + 1)
    probs = np.empty(i_max + 1)
    probs[0] = 1.0 - rho
    probs[1:] = rho * phi ** (i[1:] - 1.0) * (1.0 - phi)
    return QueueLengthLaw(rho=rho, phi=phi, probs=probs)
