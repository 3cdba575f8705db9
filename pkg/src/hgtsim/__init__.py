"""Eco-evolutionary dynamics of a trait-structured population with
competition and horizontal trait transfer.

Layers:

* ``model``      domain types and scalar rate quantities
* ``expr``       the rate-expression language used in scenario files
* ``scenario``   model parameterization, YAML loading, shipped presets
* ``gillespie``  exact stochastic jump-process engine
* ``odes``       two-trait ODE and trait-grid integro-differential limits
* ``phase``      fitness, fixed points, phase-diagram classification
* ``evolution``  invasion/fixation calculators, substitution sequence,
                 canonical trait flow
* ``cli``        artifact-producing subcommands (`hgtsim --help`)
"""

from .model import (
    MutationKernel,
    Population,
    RateSet,
    TraitSpace,
    TransferModel,
    TwoTraitParams,
    flux_rate,
    growth_rate,
    logistic_equilibrium,
    transfer_kernel_h,
)
from .scenario import Scenario, load_scenario, preset, preset_names

__version__ = "0.1.0"

__all__ = [
    "MutationKernel",
    "Population",
    "RateSet",
    "TraitSpace",
    "TransferModel",
    "TwoTraitParams",
    "Scenario",
    "flux_rate",
    "growth_rate",
    "logistic_equilibrium",
    "transfer_kernel_h",
    "load_scenario",
    "preset",
    "preset_names",
    "__version__",
]
