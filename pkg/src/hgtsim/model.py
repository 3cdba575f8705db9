"""Core domain types and scalar rate quantities.

The model describes a trait-structured population on a compact interval.
Individuals carry a one-dimensional trait that sets their birth rate b(x)
and death rate d(x); pairwise competition C(x,y) adds density-dependent
mortality, and a transfer kernel tau(x,y) (donor trait first) converts
recipients to the donor's trait at the population-size-modulated rate
tau(x,y)/(beta + mu * total_mass).

Scalar derived quantities:

* growth_rate        r(x) = b(x) - d(x)
* logistic_equilibrium  nbar(x) = r(x) / C(x,x), the monomorphic density
* transfer_kernel_h  tau(x,y) / (beta + mu * mass)
* flux_rate          alpha(x,y) = tau(x,y) - tau(y,x), the antisymmetric
                     net transfer intensity that drives the deterministic
                     limit

Rate sets built from expression text keep their sources so the stochastic
engine can JIT-compile them; validation samples the positivity conditions
(growth and competition) on a dense grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import expr

__all__ = [
    "TraitDomainError",
    "DegenerateDenominatorError",
    "TraitSpace",
    "MutationKernel",
    "RateSet",
    "TransferModel",
    "Population",
    "TwoTraitParams",
    "growth_rate",
    "logistic_equilibrium",
    "transfer_kernel_h",
    "flux_rate",
]

VALIDATION_GRID_POINTS = 1024
RESAMPLE_ATTEMPTS = 100


class TraitDomainError(ValueError):
    """A trait value fell outside the trait space."""


class DegenerateDenominatorError(ZeroDivisionError):
    """beta + mu*mass (or its scaled analogue) vanished."""


@dataclass(frozen=True)
class TraitSpace:
    """Compact one-dimensional trait interval [x_min, x_max]."""

    x_min: float
    x_max: float

    def __post_init__(self):
        if not np.isfinite(self.x_min) or not np.isfinite(self.x_max):
            raise ValueError("trait bounds must be finite")
        if not self.x_min < self.x_max:
            raise ValueError(f"need x_min < x_max, got [{self.x_min}, {self.x_max}]")

    def contains(self, x) -> bool:
        return bool(np.all((x >= self.x_min) & (x <= self.x_max)))

    def require(self, x):
        if not self.contains(x):
            raise TraitDomainError(f"trait {x} outside [{self.x_min}, {self.x_max}]")

    def clamp(self, x: float) -> float:
        return min(max(x, self.x_min), self.x_max)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    def grid(self, n: int, endpoints: bool = True) -> np.ndarray:
        """Uniform sample of the interval, endpoints included by default."""
        if endpoints:
            return np.linspace(self.x_min, self.x_max, n)
        dx = self.width / n
        return self.x_min + dx * (np.arange(n) + 0.5)


@dataclass(frozen=True)
class MutationKernel:
    """Gaussian trait increment applied at a fraction p of births.

    boundary_policy 'resample' redraws an out-of-bounds increment (up to
    RESAMPLE_ATTEMPTS times, then clamps); 'clamp' projects onto the
    boundary immediately.
    """

    p: float
    sigma: float
    boundary_policy: str = "resample"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"mutation probability p={self.p} outside [0, 1]")
        if not self.sigma > 0:
            raise ValueError(f"mutation sigma={self.sigma} must be positive")
        if self.boundary_policy not in ("resample", "clamp"):
            raise ValueError(f"unknown boundary policy {self.boundary_policy!r}")

    def sample(self, rng: np.random.Generator, x: float, space: TraitSpace) -> float:
        """Draw one mutant trait from parent trait x; always lands in space."""
        if self.boundary_policy == "clamp":
            return space.clamp(x + self.sigma * rng.standard_normal())
        for _ in range(RESAMPLE_ATTEMPTS):
            z = x + self.sigma * rng.standard_normal()
            if space.contains(z):
                return z
        return space.clamp(z)


def _as_callable(fn_or_text, nargs: int):
    """Accept a callable or expression text; return (callable, source)."""
    if callable(fn_or_text):
        return fn_or_text, None
    names = ("x", "y")[:nargs]
    ast = expr.parse(str(fn_or_text), allowed_vars=names)

    if nargs == 1:

        def one(x, _ast=ast):
            return expr.evaluate(_ast, {"x": x})

        return one, str(fn_or_text)

    def two(x, y, _ast=ast):
        return expr.evaluate(_ast, {"x": x, "y": y})

    return two, str(fn_or_text)


@dataclass
class RateSet:
    """Demographic and transfer rates of the model.

    b and d map a trait to per-capita birth/death rates; C(x,y) is the
    competitive pressure exerted on x by y per unit density; tau(x,y) is
    the transfer intensity from donor x to recipient y.  beta/mu select the
    density-dependent (mu=0), frequency-dependent (beta=0) or mixed
    Beddington-DeAngelis normalisation of the transfer rate.
    """

    b: Callable
    d: Callable
    C: Callable
    tau: Callable
    beta: float
    mu: float
    sources: dict = field(default_factory=dict)

    @classmethod
    def from_expressions(cls, b, d, C, tau, beta: float, mu: float) -> "RateSet":
        bf, bs = _as_callable(b, 1)
        df, ds = _as_callable(d, 1)
        cf, cs = _as_callable(C, 2)
        tf, ts = _as_callable(tau, 2)
        sources = {}
        for key, src in (("b", bs), ("d", ds), ("C", cs), ("tau", ts)):
            if src is not None:
                sources[key] = src
        return cls(b=bf, d=df, C=cf, tau=tf, beta=float(beta), mu=float(mu), sources=sources)

    def validate(self, space: TraitSpace, strict_growth: bool = True) -> None:
        """Check positivity conditions on a dense grid plus endpoints.

        C > 0 and tau >= 0 are always required.  strict_growth additionally
        requires b - d > 0 everywhere; scenarios that intentionally allow a
        negative-growth trait region (the evolutionary-suicide regime) set
        it to False, in which case b - d must still be positive somewhere.
        """
        if self.beta < 0 or self.mu < 0:
            raise ValueError("beta and mu must be nonnegative")
        if self.beta == 0 and self.mu == 0:
            raise ValueError("beta and mu cannot both vanish")
        grid = np.concatenate(
            [space.grid(VALIDATION_GRID_POINTS), [space.x_min, space.x_max]]
        )
        r = np.asarray(self.b(grid), dtype=float) - np.asarray(self.d(grid), dtype=float)
        r = np.broadcast_to(r, grid.shape)
        if strict_growth and not np.all(r > 0):
            bad = grid[np.argmin(r)]
            raise ValueError(f"growth rate b - d not positive at trait {bad}")
        if not np.any(r > 0):
            raise ValueError("growth rate b - d is nowhere positive")
        gx, gy = np.meshgrid(grid, grid, indexing="ij")
        cvals = np.broadcast_to(np.asarray(self.C(gx, gy), dtype=float), gx.shape)
        if not np.all(cvals > 0):
            i, j = np.unravel_index(np.argmin(cvals), cvals.shape)
            raise ValueError(f"competition kernel not positive at ({grid[i]}, {grid[j]})")
        tvals = np.broadcast_to(np.asarray(self.tau(gx, gy), dtype=float), gx.shape)
        if np.any(tvals < 0):
            i, j = np.unravel_index(np.argmin(tvals), tvals.shape)
            raise ValueError(f"transfer kernel negative at ({grid[i]}, {grid[j]})")


@dataclass(frozen=True)
class TransferModel:
    """Transfer map applied to a (donor, recipient) pair.

    Only 'replacement' is implemented: the pair (x, y) becomes (x, x), so
    each event conserves the total count.  The field is kept as an
    extension slot for general pair maps.
    """

    map_kind: str = "replacement"

    def __post_init__(self):
        if self.map_kind != "replacement":
            raise NotImplementedError(f"transfer map {self.map_kind!r} not implemented")


class Population:
    """Species-aggregated point measure: distinct traits with counts.

    The measure is (1/K) * sum_i count_i * delta(trait_i); its mass is
    total / K.  Traits are pairwise distinct and counts strictly positive.
    """

    __slots__ = ("traits", "counts", "total")

    def __init__(self, traits: Sequence[float], counts: Sequence[int]):
        traits = np.asarray(traits, dtype=float)
        counts = np.asarray(counts, dtype=np.int64)
        if traits.shape != counts.shape or traits.ndim != 1:
            raise ValueError("traits and counts must be 1-d arrays of equal length")
        if np.any(counts <= 0):
            raise ValueError("stored species must have positive counts")
        if len(np.unique(traits)) != len(traits):
            raise ValueError("trait values must be pairwise distinct")
        self.traits = traits
        self.counts = counts
        self.total = int(counts.sum())

    @classmethod
    def from_pairs(cls, pairs) -> "Population":
        if len(pairs) == 0:
            return cls(np.empty(0), np.empty(0, dtype=np.int64))
        traits, counts = zip(*pairs)
        return cls(np.asarray(traits, dtype=float), np.asarray(counts, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.traits)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Population):
            return NotImplemented
        return (
            self.traits.shape == other.traits.shape
            and bool(np.all(self.traits == other.traits))
            and bool(np.all(self.counts == other.counts))
        )

    def __repr__(self) -> str:
        inner = ", ".join(f"({t:g}, {c})" for t, c in zip(self.traits, self.counts))
        return f"Population([{inner}])"

    def mass(self, K: int) -> float:
        return self.total / K

    def mean_trait(self) -> float:
        if self.total == 0:
            raise ValueError("mean trait undefined for the empty population")
        return float(np.dot(self.traits, self.counts) / self.total)

    def trait_variance(self) -> float:
        m = self.mean_trait()
        return float(np.dot((self.traits - m) ** 2, self.counts) / self.total)

    def sorted(self) -> "Population":
        order = np.argsort(self.traits)
        return Population(self.traits[order], self.counts[order])


def growth_rate(x: float, rates: RateSet, space: TraitSpace) -> float:
    """Intrinsic growth rate r(x) = b(x) - d(x)."""
    space.require(x)
    return float(rates.b(x)) - float(rates.d(x))


def logistic_equilibrium(x: float, rates: RateSet, space: TraitSpace) -> float:
    """Monomorphic equilibrium density nbar(x) = r(x)/C(x,x).

    The corresponding individual count at system size K is K * nbar(x).
    """
    space.require(x)
    return growth_rate(x, rates, space) / float(rates.C(x, x))


def transfer_kernel_h(x: float, y: float, total_mass: float, rates: RateSet) -> float:
    """Population-modulated pair transfer rate tau(x,y)/(beta + mu*mass)."""
    if total_mass < 0:
        raise ValueError("total mass must be nonnegative")
    denom = rates.beta + rates.mu * total_mass
    if denom <= 0:
        raise DegenerateDenominatorError(
            f"beta + mu*mass = {denom} (beta={rates.beta}, mu={rates.mu}, mass={total_mass})"
        )
    return float(rates.tau(x, y)) / denom


def flux_rate(x: float, y: float, rates: RateSet, space: TraitSpace | None = None) -> float:
    """Net directional transfer intensity alpha(x,y) = tau(x,y) - tau(y,x)."""
    if space is not None:
        space.require(x)
        space.require(y)
    return float(rates.tau(x, y)) - float(rates.tau(y, x))


@dataclass(frozen=True)
class TwoTraitParams:
    """All scalars the two-trait system needs, trait x listed first.

    By convention x is the resident/focal label of equation-level results;
    the invader is y.  tau_xy means transfer with donor x and recipient y.
    """

    bx: float
    dx: float
    by: float
    dy: float
    cxx: float
    cxy: float
    cyx: float
    cyy: float
    tau_xy: float
    tau_yx: float
    beta: float
    mu: float

    def __post_init__(self):
        if self.cxx <= 0 or self.cyy <= 0 or self.cxy <= 0 or self.cyx <= 0:
            raise ValueError("competition coefficients must be positive")
        if self.tau_xy < 0 or self.tau_yx < 0:
            raise ValueError("transfer intensities must be nonnegative")
        if self.beta < 0 or self.mu < 0 or (self.beta == 0 and self.mu == 0):
            raise ValueError("need beta, mu >= 0 and not both zero")

    @property
    def rx(self) -> float:
        return self.bx - self.dx

    @property
    def ry(self) -> float:
        return self.by - self.dy

    @property
    def alpha_xy(self) -> float:
        """Flux rate alpha(x,y) = tau(x,y) - tau(y,x)."""
        return self.tau_xy - self.tau_yx

    @property
    def alpha_yx(self) -> float:
        return -self.alpha_xy

    @property
    def nbar_x(self) -> float:
        return self.rx / self.cxx

    @property
    def nbar_y(self) -> float:
        return self.ry / self.cyy

    def swapped(self) -> "TwoTraitParams":
        """Same system with the trait labels exchanged."""
        return TwoTraitParams(
            bx=self.by,
            dx=self.dy,
            by=self.bx,
            dy=self.dx,
            cxx=self.cyy,
            cxy=self.cyx,
            cyx=self.cxy,
            cyy=self.cxx,
            tau_xy=self.tau_yx,
            tau_yx=self.tau_xy,
            beta=self.beta,
            mu=self.mu,
        )

    def is_constant_C(self, tol: float = 1e-12) -> bool:
        vals = (self.cxy, self.cyx, self.cyy)
        return all(abs(v - self.cxx) <= tol * max(1.0, abs(self.cxx)) for v in vals)
