"""Invasion and fixation calculators, their Monte Carlo validators, the
trait-substitution-sequence simulator and the canonical-equation
integrator.

Closed forms (resident x at equilibrium nbar_x, rare invader y):

* survival probability of the invader's initial branching phase

      P(y;x) = [S(y;x)]_+ / (b(y) + tau(y,x) nbar_x / (beta + mu nbar_x))

* final-phase branching parameters of the displaced trait x against the
  new resident y

      b = b(x) + tau(x,y) r(y) / (beta C(y,y) + mu r(y))
      d = d(x) + C(x,y) r(y)/C(y,y) + tau(y,x) r(y) / (beta C(y,y) + mu r(y))

  with the identity b - d = S(x;y).

* expected extinction time of a subcritical line started at eta*K
  individuals:  (1/b) sum_{j>=1} (b/d)^j sum_{k=1}^{eta K - 1} 1/(k+j),
  asymptotically log K / (d - b).

* fixation time of a successful rare invader:

      T_fix = log K (1/S(y;x) + 1/|S(x;y)|)

  (the order-one additive term is omitted; scaling tests regress against
  log K so the omission cancels).

The substitution sequence jumps from resident x to y at the measure
b(x) nbar_x [P(y;x)]_+ m(x, dy) and is simulated by thinning: candidate
epochs at rate b(x) nbar_x, Gaussian candidates, acceptance [P(y;x)]_+.
Its small-mutation speed limit gives the canonical flow

      dx/dt = nbar_x * dS/dy(y;x)|_{y=x} * sigma^2

(the worked size-model example: dx/dt = (4 - x)/C * sigma^2).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import digamma

from . import seeds
from .gillespie import advance, make_state
from .model import MutationKernel, Population, TwoTraitParams
from .odes import ATOL, RTOL
from .phase import fitness_S
from .scenario import Scenario

__all__ = [
    "IifViolationError",
    "InvasionReport",
    "McEstimate",
    "TssPath",
    "CanonicalPath",
    "invasion_probability_params",
    "invasion_probability",
    "branching_params",
    "extinction_time_series",
    "fixation_time",
    "invasion_report",
    "mc_invasion",
    "mc_fixation_times",
    "tss_simulate",
    "canonical_rhs",
    "canonical_integrate",
]


class IifViolationError(RuntimeError):
    """A substitution step found both invasion fitnesses positive
    (coexistence), violating the invasion-implies-fixation assumption."""

    def __init__(self, resident, candidate, s_forward, s_backward):
        self.resident = resident
        self.candidate = candidate
        self.s_forward = s_forward
        self.s_backward = s_backward
        super().__init__(
            f"coexistence at jump {resident} -> {candidate}: "
            f"S(y;x)={s_forward:.6g} and S(x;y)={s_backward:.6g} both positive"
        )


def invasion_probability_params(params: TwoTraitParams) -> float:
    """P(y;x) from the two-trait scalars (resident x, invader y)."""
    s = fitness_S(params, invader="y")
    nbar = params.nbar_x
    if nbar <= 0:
        raise ValueError("resident equilibrium must be positive")
    denom = params.by + params.tau_yx * nbar / (params.beta + params.mu * nbar)
    if denom <= 0:
        raise ZeroDivisionError("invasion-probability denominator vanished")
    return max(s, 0.0) / denom


def invasion_probability(y: float, x: float, scenario: Scenario) -> float:
    """Survival probability of one y-mutant in the x-resident population."""
    return invasion_probability_params(scenario.two_trait(x, y))


def branching_params(x: float, y: float, scenario: Scenario) -> tuple[float, float]:
    """Birth/death rates (b, d) of the declining x-line against resident y."""
    q = scenario.two_trait(x, y)
    ry = q.ry
    denom = q.beta * q.cyy + q.mu * ry
    if denom <= 0:
        raise ZeroDivisionError("beta*C(y,y) + mu*r(y) must be positive")
    b = q.bx + q.tau_xy * ry / denom
    d = q.dx + q.cxy * ry / q.cyy + q.tau_yx * ry / denom
    return b, d


def extinction_time_series(eta: float, K: int, b: float, d: float) -> float:
    """Expected extinction time of a subcritical birth-death line started
    at eta*K individuals.

    Evaluated as (1/b) sum_j (b/d)^j [psi(M+j) - psi(j+1)] with M = eta*K,
    truncated once (b/d)^j log(M+j) drops below 1e-12 of the running sum.
    """
    if not 0 < b < d:
        raise ValueError("need subcritical rates 0 < b < d")
    m = int(round(eta * K))
    if m < 2:
        raise ValueError("eta*K must be at least 2")
    z = b / d
    total = 0.0
    j = 1
    zj = z
    while True:
        inner = float(digamma(m + j) - digamma(j + 1))
        total += zj * inner
        if zj * math.log(m + j) < 1e-12 * total:
            break
        j += 1
        zj *= z
        if j > 10_000_000:  # unreachable for z < 1, safety stop
            break
    return total / b


def fixation_time(y: float, x: float, scenario: Scenario, K: int | None = None) -> float:
    """Expected fixation time of an initially rare y (leading order in K)."""
    K = scenario.K if K is None else K
    params = scenario.two_trait(x, y)
    s_yx = fitness_S(params, invader="y")
    s_xy = fitness_S(params, invader="x")
    if not (s_yx > 0 and s_xy < 0):
        raise ValueError(
            f"fixation time needs S(y;x) > 0 > S(x;y); got {s_yx:.6g}, {s_xy:.6g}"
        )
    return math.log(K) * (1.0 / s_yx + 1.0 / abs(s_xy))


@dataclass(frozen=True)
class InvasionReport:
    S: float
    P: float
    T_fix_estimate: float | None
    branching_b: float
    branching_d: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def invasion_report(y: float, x: float, scenario: Scenario, K: int | None = None) -> InvasionReport:
    params = scenario.two_trait(x, y)
    s = fitness_S(params, invader="y")
    p = invasion_probability_params(params)
    bb, bd = branching_params(x, y, scenario)
    try:
        tfix = fixation_time(y, x, scenario, K)
    except ValueError:
        tfix = None
    return InvasionReport(S=s, P=p, T_fix_estimate=tfix, branching_b=bb, branching_d=bd)


# ---------------------------------------------------------------------------
# Monte Carlo validators


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    stderr: float
    successes: int
    replicates: int


def _two_species_scenario(y: float, x: float, scenario: Scenario, K: int) -> Scenario:
    """Mutation-free scenario with resident x at equilibrium and one
    y-invader, used by both Monte Carlo validators."""
    nbar = scenario.nbar(x)
    if nbar <= 0:
        raise ValueError("resident equilibrium must be positive")
    resident_count = max(1, int(round(K * nbar)))
    return scenario.replace(
        K=K,
        mutation=dataclasses.replace(scenario.mutation, p=0.0),
        initial=((x, resident_count), (y, 1)),
    )


def mc_invasion(
    y: float,
    x: float,
    scenario: Scenario,
    K: int | None = None,
    replicates: int = 10_000,
    eta: float = 0.1,
    base_seed: int = 0,
) -> McEstimate:
    """Fraction of engine runs in which the single y-mutant reaches eta*K
    individuals before dying out (binomial standard error)."""
    K = scenario.K if K is None else K
    if replicates < 1:
        raise ValueError("need at least one replicate")
    threshold = int(round(eta * K))
    if threshold < 1:
        raise ValueError("eta*K must be at least 1")
    run_sc = _two_species_scenario(y, x, scenario, K)
    pop0 = run_sc.initial_population()
    successes = 0
    for rep in range(replicates):
        state = make_state(run_sc, seeds.substream(base_seed, rep), population=pop0)
        while True:
            status = advance(
                state,
                run_sc,
                t_stop=math.inf,
                watch_trait=y,
                watch_high=threshold,
                stop_on_species_loss=True,
            )
            if status == "watch_high":
                successes += 1
                break
            if status in ("watch_zero", "extinct"):
                break
            if status == "species_loss":
                # the resident died out first; keep following the invader
                continue
            raise RuntimeError(f"unexpected engine status {status}")
    est = successes / replicates
    stderr = math.sqrt(max(est * (1.0 - est), 1e-300) / replicates)
    return McEstimate(est, stderr, successes, replicates)


def mc_fixation_times(
    y: float,
    x: float,
    scenario: Scenario,
    K: int | None = None,
    attempts: int = 200,
    base_seed: int = 0,
) -> np.ndarray:
    """Absorption times of runs in which y fixed (x lost), one engine run
    per attempt starting from a single y-mutant."""
    K = scenario.K if K is None else K
    run_sc = _two_species_scenario(y, x, scenario, K)
    pop0 = run_sc.initial_population()
    times = []
    for rep in range(attempts):
        state = make_state(run_sc, seeds.substream(base_seed, rep), population=pop0)
        while True:
            status = advance(
                state, run_sc, t_stop=math.inf, stop_on_species_loss=True
            )
            if status == "extinct":
                break
            if status == "species_loss":
                remaining = state.population
                if len(remaining) == 1 and remaining.traits[0] == y:
                    times.append(state.time)
                break
            raise RuntimeError(f"unexpected engine status {status}")
    return np.asarray(times)


# ---------------------------------------------------------------------------
# trait substitution sequence


@dataclass
class TssPath:
    """Piecewise-constant resident trait on the substitution time scale.

    times[0] = 0 with traits[0] the initial resident; each later entry is
    an accepted substitution.  The candidate log records every thinning
    proposal (epoch, candidate trait, acceptance probability, accepted)."""

    times: np.ndarray
    traits: np.ndarray
    candidate_times: np.ndarray
    candidate_traits: np.ndarray
    candidate_probs: np.ndarray
    candidate_accepted: np.ndarray
    t_end: float

    def trait_at(self, t: float) -> float:
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return float(self.traits[max(idx, 0)])

    def step_values(self, t_grid: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.times, t_grid, side="right") - 1
        return self.traits[np.clip(idx, 0, len(self.traits) - 1)]


def _mutate_block(
    rng: np.random.Generator, x: float, mutation: MutationKernel, space, size: int
) -> np.ndarray:
    """Vectorized mutant draws matching MutationKernel.sample semantics."""
    z = x + mutation.sigma * rng.standard_normal(size)
    if mutation.boundary_policy == "clamp":
        return np.clip(z, space.x_min, space.x_max)
    bad = (z < space.x_min) | (z > space.x_max)
    attempts = 1
    while np.any(bad):
        if attempts >= 100:
            z[bad] = np.clip(z[bad], space.x_min, space.x_max)
            break
        z[bad] = x + mutation.sigma * rng.standard_normal(int(bad.sum()))
        bad = (z < space.x_min) | (z > space.x_max)
        attempts += 1
    return z


def acceptance_probabilities(
    y: np.ndarray | float, x: float, scenario: Scenario
) -> np.ndarray | float:
    """[P(y;x)]_+ for candidate traits y (vectorized over y)."""
    r = scenario.rates
    y = np.asarray(y, dtype=float)
    rx = float(r.b(x)) - float(r.d(x))
    cxx = float(r.C(x, x))
    nbar = rx / cxx
    ry = np.asarray(r.b(y), dtype=float) - np.asarray(r.d(y), dtype=float)
    s = (
        ry
        - np.asarray(r.C(y, x), dtype=float) * rx / cxx
        + (np.asarray(r.tau(y, x), dtype=float) - np.asarray(r.tau(x, y), dtype=float))
        * rx
        / (r.beta * cxx + r.mu * rx)
    )
    denom = np.asarray(r.b(y), dtype=float) + np.asarray(r.tau(y, x), dtype=float) * nbar / (
        r.beta + r.mu * nbar
    )
    return np.clip(np.maximum(s, 0.0) / denom, 0.0, 1.0)


def tss_simulate(
    x0: float,
    scenario: Scenario,
    t_max_evo: float,
    seed: int = 0,
    max_jumps: int = 1_000_000,
    check_iif: bool = True,
    block: int = 256,
    log_candidates: bool = True,
) -> TssPath:
    """Simulate the substitution sequence by thinning.

    Candidate epochs arrive at rate b(x) nbar_x; each candidate is a
    Gaussian trait increment (boundary policy applied) accepted with
    probability [P(y;x)]_+.  If an accepted jump has both S(y;x) > 0 and
    S(x;y) > 0 the run aborts with IifViolationError: coexistence breaks
    the substitution picture.  The per-candidate log can be switched off
    for long ensemble runs.
    """
    scenario.space.require(x0)
    rng = np.random.default_rng(seed)
    x = float(x0)
    t = 0.0
    times = [0.0]
    path = [x]
    cand_t: list[np.ndarray] = []
    cand_y: list[np.ndarray] = []
    cand_p: list[np.ndarray] = []
    cand_a: list[np.ndarray] = []

    def log_block(upto: int, epochs, cands, probs, accepted):
        if log_candidates and upto > 0:
            cand_t.append(epochs[:upto])
            cand_y.append(cands[:upto])
            cand_p.append(probs[:upto])
            cand_a.append(accepted[:upto])

    while t < t_max_evo and len(path) - 1 < max_jumps:
        lam = float(scenario.rates.b(x)) * scenario.nbar(x)
        if lam <= 0:
            break  # no further substitutions possible; path stays constant
        gaps = rng.exponential(1.0 / lam, size=block)
        epochs = t + np.cumsum(gaps)
        cands = _mutate_block(rng, x, scenario.mutation, scenario.space, block)
        probs = np.asarray(acceptance_probabilities(cands, x, scenario))
        accepted = rng.random(block) < probs

        acc_indices = np.flatnonzero(accepted)
        acc_idx = int(acc_indices[0]) if acc_indices.size else -1
        in_window = int(np.searchsorted(epochs, t_max_evo, side="right"))

        if 0 <= acc_idx < in_window:
            # jump at the first accepted epoch inside the window
            log_block(acc_idx + 1, epochs, cands, probs, accepted)
            ynew = float(cands[acc_idx])
            if check_iif:
                params = scenario.two_trait(x, ynew)
                s_yx = fitness_S(params, invader="y")
                s_xy = fitness_S(params, invader="x")
                if s_yx > 0 and s_xy > 0:
                    raise IifViolationError(x, ynew, s_yx, s_xy)
            t = float(epochs[acc_idx])
            x = ynew
            times.append(t)
            path.append(x)
        elif in_window < block:
            # passed t_max before any acceptance
            log_block(in_window, epochs, cands, probs, accepted)
            t = t_max_evo
        else:
            # the whole block was rejected; advance past the last epoch
            log_block(block, epochs, cands, probs, accepted)
            t = float(epochs[-1])

    def cat(chunks, dtype=float):
        return (
            np.concatenate(chunks)
            if chunks
            else np.empty(0, dtype=dtype)
        )

    return TssPath(
        times=np.asarray(times),
        traits=np.asarray(path),
        candidate_times=cat(cand_t),
        candidate_traits=cat(cand_y),
        candidate_probs=cat(cand_p),
        candidate_accepted=cat(cand_a, dtype=bool).astype(bool),
        t_end=min(t, t_max_evo),
    )


# ---------------------------------------------------------------------------
# canonical equation


@dataclass
class CanonicalPath:
    times: np.ndarray
    x: np.ndarray

    def final(self) -> float:
        return float(self.x[-1])


def _fitness_gradient(x: float, scenario: Scenario) -> float:
    """dS(y;x)/dy at y = x by central differences (boundary-shifted)."""
    space = scenario.space
    h = 1e-5 * space.width
    y_hi = min(x + h, space.x_max)
    y_lo = max(x - h, space.x_min)
    if y_hi == y_lo:
        return 0.0
    s_hi = fitness_S(scenario.two_trait(x, y_hi), invader="y")
    s_lo = fitness_S(scenario.two_trait(x, y_lo), invader="y")
    return (s_hi - s_lo) / (y_hi - y_lo)


def canonical_rhs(x: float, scenario: Scenario) -> float:
    """Trait speed nbar(x) * dS/dy(x;x) * sigma**2, clamped to zero when
    it pushes out of the trait space at a boundary."""
    space = scenario.space
    x = float(x)
    if not space.contains(x):
        raise ValueError(f"trait {x} outside the trait space")
    nbar = scenario.nbar(x)
    if nbar <= 0:
        # nonviable trait: no resident population, the flow freezes
        return 0.0
    value = nbar * _fitness_gradient(x, scenario) * scenario.mutation.sigma**2
    if x <= space.x_min and value < 0:
        return 0.0
    if x >= space.x_max and value > 0:
        return 0.0
    return value


def canonical_integrate(
    x0: float,
    scenario: Scenario,
    t_max: float,
    t_eval: np.ndarray | None = None,
) -> CanonicalPath:
    """Integrate the canonical flow, holding the trait at a boundary once
    the flow pushes outward there."""
    space = scenario.space
    space.require(x0)

    def fun(_t, y):
        xx = min(max(float(y[0]), space.x_min), space.x_max)
        return [canonical_rhs(xx, scenario)]

    def hit_lo(_t, y):
        return y[0] - space.x_min

    def hit_hi(_t, y):
        return space.x_max - y[0]

    hit_lo.terminal = True
    hit_lo.direction = -1
    hit_hi.terminal = True
    hit_hi.direction = -1

    times: list[np.ndarray] = []
    values: list[np.ndarray] = []
    t0, x = 0.0, float(x0)
    for _segment in range(16):
        sol = solve_ivp(
            fun,
            (t0, float(t_max)),
            [x],
            method="RK45",
            rtol=RTOL,
            atol=ATOL,
            t_eval=None if t_eval is None else t_eval[(t_eval >= t0)],
            events=[hit_lo, hit_hi],
        )
        if not sol.success:
            raise RuntimeError(f"canonical integration failed: {sol.message}")
        times.append(sol.t)
        values.append(np.clip(sol.y[0], space.x_min, space.x_max))
        if sol.status != 1:
            break  # reached t_max
        # hit a boundary: hold there if the flow points outward, else go on
        t_hit = float(sol.t_events[0][0] if sol.t_events[0].size else sol.t_events[1][0])
        x = space.x_min if sol.t_events[0].size else space.x_max
        if canonical_rhs(x, scenario) == 0.0:
            tail = (
                np.array([t_hit, t_max])
                if t_eval is None
                else t_eval[t_eval > t_hit]
            )
            times.append(np.asarray(tail, dtype=float))
            values.append(np.full(len(np.atleast_1d(tail)), x))
            break
        t0 = t_hit
    t_all = np.concatenate([np.atleast_1d(t) for t in times])
    x_all = np.concatenate([np.atleast_1d(v) for v in values])
    keep = np.concatenate([[True], np.diff(t_all) > 0])
    return CanonicalPath(times=t_all[keep], x=x_all[keep])
