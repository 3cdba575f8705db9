"""Deterministic limits: the two-trait ODE system and the trait-grid
integro-differential equation.

Two-trait system (densities n_x, n_y; flux a = alpha(x, y)):

    dn_x/dt = (r(x) - C(x,x) n_x - C(x,y) n_y + a/(beta + mu n) * n_y) n_x
    dn_y/dt = (r(y) - C(y,x) n_x - C(y,y) n_y - a/(beta + mu n) * n_x) n_y

with n = n_x + n_y.  The trait-grid equation evolves a density u(t, x)
per unit trait on a uniform midpoint grid:

    du_i/dt = (r_i - sum_j C_ij u_j dx) u_i
              + u_i / (beta + mu * mass) * sum_j alpha_ij u_j dx

Integration uses an adaptive embedded Runge-Kutta 4(5) pair at
rtol=1e-8 / atol=1e-10; negative round-off values below 1e-14 are clipped
to zero in the reported states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .model import TraitSpace, TwoTraitParams
from .scenario import Scenario

__all__ = [
    "RTOL",
    "ATOL",
    "OdeTrajectory",
    "two_trait_rhs",
    "integrate_two_trait",
    "np_form",
    "np_inverse",
    "GridDensity",
    "GridOperator",
    "grid_rhs",
    "integrate_grid",
]

RTOL = 1e-8
ATOL = 1e-10
CLIP = 1e-14


def _clip(values: np.ndarray) -> np.ndarray:
    out = np.asarray(values, dtype=float).copy()
    out[(out < 0) & (out > -CLIP)] = 0.0
    return out


def two_trait_rhs(state, params: TwoTraitParams) -> np.ndarray:
    """Right-hand side of the two-trait system at (n_x, n_y)."""
    n_x, n_y = float(state[0]), float(state[1])
    total = n_x + n_y
    denom = params.beta + params.mu * total
    flux = params.alpha_xy / denom if denom > 0 else 0.0
    dnx = (params.rx - params.cxx * n_x - params.cxy * n_y + flux * n_y) * n_x
    dny = (params.ry - params.cyx * n_x - params.cyy * n_y - flux * n_x) * n_y
    return np.array([dnx, dny])


@dataclass
class OdeTrajectory:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), dim)

    def final(self) -> np.ndarray:
        return self.states[-1]


def _solve(fun, y0, t_max, t_eval, events=None):
    sol = solve_ivp(
        fun,
        (0.0, float(t_max)),
        np.asarray(y0, dtype=float),
        method="RK45",
        rtol=RTOL,
        atol=ATOL,
        t_eval=t_eval,
        events=events,
        dense_output=False,
    )
    if not sol.success:
        raise RuntimeError(f"integration failed: {sol.message}")
    return sol


def integrate_two_trait(
    initial,
    params: TwoTraitParams,
    t_max: float,
    t_eval: np.ndarray | None = None,
    stop_speed: float | None = None,
) -> OdeTrajectory:
    """Integrate the two-trait system from ``initial`` up to ``t_max``.

    stop_speed, if given, terminates early once ||rhs|| falls below it
    (used by the fixed-point convergence checks).
    """
    if initial[0] < 0 or initial[1] < 0:
        raise ValueError("densities must be nonnegative")

    def fun(_t, y):
        return two_trait_rhs(y, params)

    events = None
    if stop_speed is not None:

        def slow(_t, y):
            return float(np.linalg.norm(two_trait_rhs(y, params))) - stop_speed

        slow.terminal = True
        slow.direction = -1
        events = [slow]

    sol = _solve(fun, initial, t_max, t_eval, events)
    times = sol.t
    states = _clip(sol.y.T)
    if events is not None and sol.t_events[0].size > 0:
        times = np.append(times, sol.t_events[0][0])
        states = np.vstack([states, _clip(sol.y_events[0][0])])
    return OdeTrajectory(times=times, states=states)


def np_form(state, focal: str = "x"):
    """(total size, focal-trait fraction) representation.

    The size/fraction equations carry r(focal) against r(other); which
    trait is focal flips between conventions in the literature, so it is
    an explicit parameter here.  Undefined at n = 0.
    """
    if focal not in ("x", "y"):
        raise ValueError("focal must be 'x' or 'y'")
    arr = np.asarray(state, dtype=float)
    n_x = arr[..., 0]
    n_y = arr[..., 1]
    n = n_x + n_y
    if np.any(n == 0):
        raise ValueError("fraction undefined at total size 0")
    p = (n_x if focal == "x" else n_y) / n
    return n, p


def np_inverse(n, p, focal: str = "x"):
    """Back from (size, fraction) to (n_x, n_y); exact inverse of np_form."""
    if focal not in ("x", "y"):
        raise ValueError("focal must be 'x' or 'y'")
    n = np.asarray(n, dtype=float)
    p = np.asarray(p, dtype=float)
    focal_density = n * p
    other = n - focal_density
    if focal == "x":
        return np.stack([focal_density, other], axis=-1)
    return np.stack([other, focal_density], axis=-1)


# ---------------------------------------------------------------------------
# trait-grid equation


@dataclass
class GridDensity:
    """Nonnegative density per unit trait on a uniform midpoint grid."""

    space: TraitSpace
    u: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.u.ndim != 1 or self.u.size < 1:
            raise ValueError("u must be a nonempty 1-d array")
        if np.any(self.u < 0):
            raise ValueError("density must be nonnegative")

    @property
    def m(self) -> int:
        return self.u.size

    @property
    def dx(self) -> float:
        return self.space.width / self.m

    @property
    def centers(self) -> np.ndarray:
        return self.space.grid(self.m, endpoints=False)

    @property
    def mass(self) -> float:
        return float(self.u.sum() * self.dx)

    @classmethod
    def from_point_masses(
        cls, space: TraitSpace, m: int, pairs
    ) -> "GridDensity":
        """Place point masses into their containing cells (mass-preserving)."""
        u = np.zeros(m)
        dx = space.width / m
        for trait, mass in pairs:
            space.require(trait)
            idx = min(int((trait - space.x_min) / dx), m - 1)
            u[idx] += mass / dx
        return cls(space, u)


class GridOperator:
    """Precomputed grid discretization of one scenario's rates."""

    def __init__(self, scenario: Scenario, m: int = 256):
        if m < 1:
            raise ValueError("grid size must be positive")
        self.space = scenario.space
        self.m = m
        self.dx = self.space.width / m
        xc = self.space.grid(m, endpoints=False)
        self.centers = xc
        rates = scenario.rates
        bv = np.broadcast_to(np.asarray(rates.b(xc), dtype=float), xc.shape)
        dv = np.broadcast_to(np.asarray(rates.d(xc), dtype=float), xc.shape)
        self.r = bv - dv
        gx, gy = np.meshgrid(xc, xc, indexing="ij")
        self.cmat = np.broadcast_to(
            np.asarray(rates.C(gx, gy), dtype=float), gx.shape
        ).copy()
        tmat = np.broadcast_to(
            np.asarray(rates.tau(gx, gy), dtype=float), gx.shape
        )
        self.amat = tmat - tmat.T
        self.beta = rates.beta
        self.mu = rates.mu

    def rhs(self, u: np.ndarray) -> np.ndarray:
        """du/dt per cell (midpoint quadrature for both integrals)."""
        comp = self.cmat @ u * self.dx
        mass = float(u.sum() * self.dx)
        denom = self.beta + self.mu * mass
        out = (self.r - comp) * u
        if denom > 0:
            out = out + u * (self.amat @ u * self.dx) / denom
        return out


def grid_rhs(density: GridDensity, scenario: Scenario) -> np.ndarray:
    """One-shot rhs evaluation (builds the operator; see GridOperator for
    repeated use)."""
    op = GridOperator(scenario, m=density.m)
    return op.rhs(density.u)


def integrate_grid(
    u0: GridDensity,
    scenario: Scenario,
    t_max: float,
    t_eval: np.ndarray | None = None,
    operator: GridOperator | None = None,
) -> tuple[np.ndarray, np.ndarray, GridDensity]:
    """Method-of-lines integration of the trait-grid equation.

    Returns (times, densities[t, cell], final GridDensity).
    """
    op = operator if operator is not None else GridOperator(scenario, m=u0.m)
    if op.m != u0.m:
        raise ValueError("operator grid size does not match the density")

    def fun(_t, u):
        return op.rhs(u)

    sol = _solve(fun, u0.u, t_max, t_eval)
    dens = _clip(sol.y.T)
    return sol.t, dens, GridDensity(u0.space, _clip(dens[-1]))
