"""Bottleneck analysis of large closed hub-and-satellite queueing networks.

The package cross-validates three views of the same model: closed-form
fluid limits, least-positive roots of the satellite fixed-point equations
with two-moment and continuity bounds, and an exact discrete-event
simulator of the finite network that serves as the empirical oracle.
"""

__version__ = "0.1.0"

from .bounds import (
    BoundsReport,
    CompoundMoments,
    QueueLengthLaw,
    RolskiBounds,
    continuity_gap,
    queue_length_law,
    rolski_bounds,
    theorem_envelope,
    traffic_intensity,
    wald_moments,
)
from .distributions import (
    AgingClass,
    ClosenessReport,
    Deterministic,
    Erlang,
    Exponential,
    Gamma,
    GridSpec,
    HyperExp2,
    ServiceDistribution,
    aging_class,
    closeness_report,
    distribution_from_config,
    kolmogorov_to_exponential,
    memoryless_deviation,
    scaled_service_sample,
    scv,
    variance_exceeds_exponential,
)
from .fluid import (
    FluidCurve,
    FluidParams,
    difference_quotients,
    fluid_curve,
    hub_fluid,
    hub_fluid_mean,
    partition_expansion,
    partition_expansion_sum,
    satellite_fluid,
)
from .roots import (
    CompoundSpec,
    RootResult,
    compound_lst,
    finite_n_root,
    least_root,
    poisson_extinction,
    satellite_root,
)
from .simulator import (
    NetworkConfig,
    OffspringEstimate,
    SimEstimate,
    SimTrace,
    compare_to_law,
    offspring_mean,
    replicate,
    simulate,
)

__all__ = [
    "__version__",
    # distributions
    "ServiceDistribution", "Exponential", "Erlang", "HyperExp2", "Deterministic", "Gamma",
    "GridSpec", "AgingClass", "ClosenessReport", "distribution_from_config",
    "scaled_service_sample", "memoryless_deviation", "kolmogorov_to_exponential",
    "aging_class", "closeness_report", "scv", "variance_exceeds_exponential",
    # roots
    "RootResult", "least_root", "poisson_extinction", "CompoundSpec", "compound_lst",
    "satellite_root", "finite_n_root",
    # fluid
    "FluidParams", "FluidCurve", "hub_fluid", "satellite_fluid", "hub_fluid_mean",
    "partition_expansion", "partition_expansion_sum", "difference_quotients", "fluid_curve",
    # bounds
    "CompoundMoments", "wald_moments", "RolskiBounds", "rolski_bounds", "continuity_gap",
    "traffic_intensity", "BoundsReport", "theorem_envelope", "QueueLengthLaw",
    "queue_length_law",
    # simulator
    "NetworkConfig", "SimTrace", "simulate", "SimEstimate", "replicate",
    "OffspringEstimate", "offspring_mean", "compare_to_law",
]
