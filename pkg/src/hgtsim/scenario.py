"""Scenario configuration: the full model parameterization for one run.

A scenario bundles the trait space, the rate expressions, the transfer
regime, the mutation kernel, the system size K, the initial species list
and the run controls.  Scenarios are loaded from YAML files (see the
grammar in the README) or from named presets shipped with the package.

Presets
-------
tau0, tau02, tau06, tau07, tau10
    The unilateral frequency-dependent transfer campaign on [0, 4] with
    b = 4 - x, d = 1, C = 0.5, K = 1000, mutation (p=0.03, sigma=0.1),
    transfer constant tau in {0, 0.2, 0.6, 0.7, 1.0}.  These scenarios
    intentionally allow a negative-growth trait region (that is what makes
    evolutionary suicide possible), so they set strict_growth: false.
fig2a .. fig2d
    Two-trait invasion setups (resident trait 0, invader trait 1) with a
    deleterious invader sustained by unilateral transfer, in the four
    combinations of constant/asymmetric competition and density-/
    frequency-dependent transfer.
expflux
    Bilateral exponential transfer tau = exp(x - y) on [0, 4] with
    b = 4 - x, d = 0: the worked example whose substitution sequence walks
    toward ever larger traits.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .model import MutationKernel, Population, RateSet, TraitSpace, TransferModel, TwoTraitParams

__all__ = ["Scenario", "ScenarioError", "load_scenario", "preset", "preset_names"]

PRESET_NAMES = (
    "tau0",
    "tau02",
    "tau06",
    "tau07",
    "tau10",
    "fig2a",
    "fig2b",
    "fig2c",
    "fig2d",
    "expflux",
)

DEFAULT_EVENT_LIMIT = 1_000_000_000


class ScenarioError(ValueError):
    """Malformed or invalid scenario definition."""


@dataclass
class Scenario:
    """Validated model parameterization plus run controls."""

    space: TraitSpace
    rates: RateSet
    mutation: MutationKernel
    K: int
    initial: tuple[tuple[float, int], ...]
    t_max: float = 100.0
    cadence: float = 1.0
    seed: int = 1
    event_limit: int = DEFAULT_EVENT_LIMIT
    transfer: TransferModel = field(default_factory=TransferModel)
    strict_growth: bool = True
    name: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.K < 1:
            raise ScenarioError("K must be a positive integer")
        if self.t_max <= 0:
            raise ScenarioError("t_max must be positive")
        if self.cadence <= 0:
            raise ScenarioError("cadence must be positive")
        if self.event_limit < 1:
            raise ScenarioError("event_limit must be positive")
        if len(self.initial) == 0:
            raise ScenarioError("initial condition must list at least one species")
        for trait, count in self.initial:
            if not self.space.contains(trait):
                raise ScenarioError(f"initial trait {trait} outside the trait space")
            if count <= 0:
                raise ScenarioError(f"initial count {count} must be positive")
        traits = [t for t, _ in self.initial]
        if len(set(traits)) != len(traits):
            raise ScenarioError("initial traits must be pairwise distinct")
        try:
            self.rates.validate(self.space, strict_growth=self.strict_growth)
        except ValueError as err:
            raise ScenarioError(str(err)) from err

    def initial_population(self) -> Population:
        return Population.from_pairs(self.initial)

    def replace(self, **changes) -> "Scenario":
        """Copy with fields swapped out (revalidates)."""
        return dataclasses.replace(self, **changes)

    def two_trait(self, x: float, y: float) -> TwoTraitParams:
        """Evaluate the rates at a resident/invader trait pair."""
        self.space.require(x)
        self.space.require(y)
        r = self.rates
        return TwoTraitParams(
            bx=float(r.b(x)),
            dx=float(r.d(x)),
            by=float(r.b(y)),
            dy=float(r.d(y)),
            cxx=float(r.C(x, x)),
            cxy=float(r.C(x, y)),
            cyx=float(r.C(y, x)),
            cyy=float(r.C(y, y)),
            tau_xy=float(r.tau(x, y)),
            tau_yx=float(r.tau(y, x)),
            beta=r.beta,
            mu=r.mu,
        )

    def nbar(self, x: float) -> float:
        """Monomorphic equilibrium density at trait x."""
        from .model import logistic_equilibrium

        return logistic_equilibrium(x, self.rates, self.space)


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ScenarioError(f"missing required field {key!r} in {where}")
    return mapping[key]


def scenario_from_dict(doc: dict, name: str = "") -> Scenario:
    """Build and validate a Scenario from a parsed YAML document."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a mapping")

    ts = _require(doc, "trait_space", "scenario")
    space = TraitSpace(float(_require(ts, "min", "trait_space")), float(_require(ts, "max", "trait_space")))

    rt = _require(doc, "rates", "scenario")
    tr = _require(doc, "transfer", "scenario")
    try:
        rates = RateSet.from_expressions(
            b=_require(rt, "b", "rates"),
            d=_require(rt, "d", "rates"),
            C=_require(rt, "C", "rates"),
            tau=_require(rt, "tau", "rates"),
            beta=float(_require(tr, "beta", "transfer")),
            mu=float(_require(tr, "mu", "transfer")),
        )
    except ValueError as err:
        raise ScenarioError(f"bad rate expression: {err}") from err

    mt = _require(doc, "mutation", "scenario")
    mutation = MutationKernel(
        p=float(_require(mt, "p", "mutation")),
        sigma=float(_require(mt, "sigma", "mutation")),
        boundary_policy=str(mt.get("boundary", "resample")),
    )

    raw_initial = _require(doc, "initial", "scenario")
    if isinstance(raw_initial, dict):
        raw_initial = [raw_initial]
    initial = tuple(
        (float(_require(entry, "trait", "initial")), int(_require(entry, "count", "initial")))
        for entry in raw_initial
    )

    run = doc.get("run", {})
    return Scenario(
        space=space,
        rates=rates,
        mutation=mutation,
        K=int(_require(doc, "K", "scenario")),
        initial=initial,
        t_max=float(run.get("t_max", 100.0)),
        cadence=float(run.get("cadence", 1.0)),
        seed=int(run.get("seed", 1)),
        event_limit=int(run.get("event_limit", DEFAULT_EVENT_LIMIT)),
        strict_growth=bool(doc.get("strict_growth", True)),
        name=name or str(doc.get("name", "")),
    )


def load_scenario(path: str | Path) -> Scenario:
    """Load a scenario from a YAML file."""
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        loc = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise ScenarioError(f"YAML error in {path}{loc}: {err}") from err
    return scenario_from_dict(doc, name=path.stem)


def preset_names() -> tuple[str, ...]:
    return PRESET_NAMES


def preset(name: str) -> Scenario:
    """Load one of the shipped scenario presets by name."""
    if name not in PRESET_NAMES:
        raise ScenarioError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
    ref = resources.files("hgtsim").joinpath(f"presets/{name}.yaml")
    doc = yaml.safe_load(ref.read_text())
    return scenario_from_dict(doc, name=name)
