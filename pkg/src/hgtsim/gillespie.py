"""Exact stochastic simulation of the trait-structured jump process.

Event channels per species i (trait x_i, count N_i) in a population of
total count N at system size K:

    clonal birth       N_i * b(x_i) * (1 - p)
    mutant birth       N_i * b(x_i) * p
    natural death      N_i * d(x_i)
    competition death  N_i * sum_j C(x_i, x_j) * N_j / K
    transfer (i -> j)  N_i * N_j * tau(x_i, x_j) / (K*beta + mu*N),  x_i != x_j

A transfer converts the recipient to the donor's trait (replacement map),
so it conserves N.  Same-trait pairs are excluded from the transfer
channels: under replacement they would be null events.

``simulate`` is deterministic in (scenario, seed); ensemble replicate k
should use ``seeds.substream(base_seed, k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as _sci_integrate
from scipy import stats as _sci_stats

from . import _engine
from .expr import parse, to_python_source
from .model import Population, RateSet
from .scenario import Scenario

__all__ = [
    "SimulationError",
    "ChannelRates",
    "SimState",
    "Trajectory",
    "compile_rates",
    "make_state",
    "advance",
    "step",
    "simulate",
    "channel_rates",
    "drift_check",
]

_STATUS = _engine.STATUS


class SimulationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# rate-function compilation


_RATE_CACHE: dict = {}


def _compile_one(source: str | None, fn, nargs: int):
    """JIT-compile a rate function from expression text (preferred) or by
    direct nopython compilation of a plain Python callable."""
    from numba import njit, types

    sig = (
        types.float64(types.float64)
        if nargs == 1
        else types.float64(types.float64, types.float64)
    )
    if source is not None:
        key = (source, nargs)
        hit = _RATE_CACHE.get(key)
        if hit is not None:
            return hit
        args = ", ".join(("x", "y")[:nargs])
        body = to_python_source(parse(source, allowed_vars=("x", "y")[:nargs]))
        namespace = {"math": math}
        exec(compile(f"def _rate({args}):\n    return {body}\n", "<rate>", "exec"), namespace)
        jitted = njit(sig, cache=False)(namespace["_rate"])
        _RATE_CACHE[key] = jitted
        return jitted
    key = ("__callable__", id(fn), nargs)
    hit = _RATE_CACHE.get(key)
    if hit is not None:
        return hit
    try:
        jitted = njit(sig, cache=False)(fn)
        jitted(*(1.0,) * nargs)  # force compilation now, surface errors here
    except Exception as err:  # pragma: no cover - depends on user callable
        raise SimulationError(
            "rate function is not JIT-compilable; build the RateSet from "
            f"expression text instead ({err})"
        ) from err
    _RATE_CACHE[key] = jitted
    return jitted


def compile_rates(rates: RateSet):
    """(b, d, C, tau) as JIT dispatchers suitable for the engine kernel."""
    src = rates.sources
    return (
        _compile_one(src.get("b"), rates.b, 1),
        _compile_one(src.get("d"), rates.d, 1),
        _compile_one(src.get("C"), rates.C, 2),
        _compile_one(src.get("tau"), rates.tau, 2),
    )


# ---------------------------------------------------------------------------
# engine state


@dataclass
class SimState:
    """Mutable engine state: species arrays plus packed scalars.

    Confine each instance to one logical execution stream; use ``copy`` to
    branch explorations.
    """

    traits: np.ndarray
    counts: np.ndarray
    b_arr: np.ndarray
    d_arr: np.ndarray
    cmat: np.ndarray
    cmat_t: np.ndarray
    tmat: np.ndarray
    tmat_t: np.ndarray
    compsum: np.ndarray
    tausum: np.ndarray
    scratch: np.ndarray
    istate: np.ndarray  # [n_species, n_total, event_count, watch_index]
    fstate: np.ndarray  # [time]
    rstate: np.ndarray  # [rng_state]
    jit_rates: tuple = field(repr=False, default=())
    has_transfer: bool = True
    cconst: float = -1.0  # constant competition value, -1 when C varies

    @property
    def n_species(self) -> int:
        return int(self.istate[0])

    @property
    def n_total(self) -> int:
        return int(self.istate[1])

    @property
    def event_count(self) -> int:
        return int(self.istate[2])

    @property
    def time(self) -> float:
        return float(self.fstate[0])

    @property
    def capacity(self) -> int:
        return self.traits.shape[0]

    @property
    def population(self) -> Population:
        s = self.n_species
        return Population(self.traits[:s].copy(), self.counts[:s].copy())

    def species_index(self, trait: float) -> int:
        s = self.n_species
        for i in range(s):
            if self.traits[i] == trait:
                return i
        return -1

    def copy(self) -> "SimState":
        return SimState(
            traits=self.traits.copy(),
            counts=self.counts.copy(),
            b_arr=self.b_arr.copy(),
            d_arr=self.d_arr.copy(),
            cmat=self.cmat.copy(),
            cmat_t=self.cmat_t.copy(),
            tmat=self.tmat.copy(),
            tmat_t=self.tmat_t.copy(),
            compsum=self.compsum.copy(),
            tausum=self.tausum.copy(),
            scratch=self.scratch.copy(),
            istate=self.istate.copy(),
            fstate=self.fstate.copy(),
            rstate=self.rstate.copy(),
            jit_rates=self.jit_rates,
            has_transfer=self.has_transfer,
            cconst=self.cconst,
        )


def _rates_have_transfer(scenario: Scenario) -> bool:
    """False only when tau vanishes identically on a dense grid."""
    grid = scenario.space.grid(64)
    gx, gy = np.meshgrid(grid, grid, indexing="ij")
    tv = np.broadcast_to(
        np.asarray(scenario.rates.tau(gx, gy), dtype=float), gx.shape
    )
    return bool(np.any(tv != 0.0))


def _constant_c(scenario: Scenario) -> float:
    """The competition constant if the C expression is a literal, else -1.

    Only a literal number qualifies (exact, no risk of misreading a kernel
    that merely looks flat on a grid); it enables the engine's matrix-free
    competition path, which computes the identical rates.
    """
    source = scenario.rates.sources.get("C")
    if source is None:
        return -1.0
    node = parse(source, allowed_vars=("x", "y"))
    from .expr import Num

    if isinstance(node, Num) and node.value > 0:
        return float(node.value)
    return -1.0


def make_state(
    scenario: Scenario, seed: int, population: Population | None = None
) -> SimState:
    """Initial engine state for a scenario (optionally overriding the
    initial population)."""
    pop = scenario.initial_population() if population is None else population
    s = len(pop)
    cap = max(64, 2 * s + 8)
    traits = np.zeros(cap)
    counts = np.zeros(cap, dtype=np.int64)
    traits[:s] = pop.traits
    counts[:s] = pop.counts

    rates = scenario.rates
    b_arr = np.zeros(cap)
    d_arr = np.zeros(cap)
    b_arr[:s] = [float(rates.b(t)) for t in pop.traits]
    d_arr[:s] = [float(rates.d(t)) for t in pop.traits]

    has_transfer = _rates_have_transfer(scenario)
    cconst = _constant_c(scenario)
    compsum = np.zeros(cap)
    tausum = np.zeros(cap)
    cnt = counts[:s].astype(float)

    if cconst >= 0:
        cmat = np.zeros((1, 1))
        cmat_t = np.zeros((1, 1))
        compsum[:s] = cconst * pop.total
    else:
        cmat = np.zeros((cap, cap))
        for i in range(s):
            for j in range(s):
                cmat[i, j] = float(rates.C(pop.traits[i], pop.traits[j]))
        cmat_t = np.ascontiguousarray(cmat.T)
        compsum[:s] = cmat[:s, :s] @ cnt
    if has_transfer:
        tmat = np.zeros((cap, cap))
        for i in range(s):
            for j in range(s):
                tmat[i, j] = float(rates.tau(pop.traits[i], pop.traits[j]))
        tmat_t = np.ascontiguousarray(tmat.T)
        tausum[:s] = tmat[:s, :s] @ cnt - np.diag(tmat[:s, :s]) * cnt
    else:
        tmat = np.zeros((1, 1))
        tmat_t = np.zeros((1, 1))

    istate = np.array([s, pop.total, 0, -1], dtype=np.int64)
    fstate = np.array([0.0])
    rstate = np.array([np.uint64(int(seed) & ((1 << 64) - 1))], dtype=np.uint64)
    return SimState(
        traits=traits,
        counts=counts,
        b_arr=b_arr,
        d_arr=d_arr,
        cmat=cmat,
        cmat_t=cmat_t,
        tmat=tmat,
        tmat_t=tmat_t,
        compsum=compsum,
        tausum=tausum,
        scratch=np.zeros(cap),
        istate=istate,
        fstate=fstate,
        rstate=rstate,
        jit_rates=compile_rates(rates),
        has_transfer=has_transfer,
        cconst=cconst,
    )


def _grow(state: SimState) -> None:
    old = state.capacity
    cap = old * 2
    for name in ("traits", "b_arr", "d_arr", "compsum", "tausum", "scratch"):
        arr = np.zeros(cap)
        arr[:old] = getattr(state, name)
        setattr(state, name, arr)
    counts = np.zeros(cap, dtype=np.int64)
    counts[:old] = state.counts
    state.counts = counts
    for name in ("cmat", "cmat_t", "tmat", "tmat_t"):
        old_mat = getattr(state, name)
        if old_mat.shape[0] == 1:  # dummy for a disabled fast path
            continue
        mat = np.zeros((cap, cap))
        mat[:old, :old] = old_mat
        setattr(state, name, mat)


def advance(
    state: SimState,
    scenario: Scenario,
    t_stop: float,
    max_events: int | None = None,
    watch_trait: float | None = None,
    watch_high: int = 0,
    stop_on_species_loss: bool = False,
) -> str:
    """Drive the kernel until t_stop or a terminal condition; returns the
    status string (see _engine.STATUS values)."""
    if not state.jit_rates:
        state.jit_rates = compile_rates(scenario.rates)
    bfn, dfn, cfn, taufn = state.jit_rates
    if watch_trait is not None:
        idx = state.species_index(watch_trait)
        if idx < 0:
            raise SimulationError(f"watch trait {watch_trait} not present")
        state.istate[3] = idx
    mut = scenario.mutation
    remaining = 2**62 if max_events is None else int(max_events)
    while True:
        status = _engine.advance_kernel(
            bfn,
            dfn,
            cfn,
            taufn,
            state.traits,
            state.counts,
            state.b_arr,
            state.d_arr,
            state.cmat,
            state.cmat_t,
            state.tmat,
            state.tmat_t,
            state.compsum,
            state.tausum,
            state.scratch,
            state.istate,
            state.fstate,
            state.rstate,
            scenario.K,
            scenario.rates.beta,
            scenario.rates.mu,
            mut.p,
            mut.sigma,
            scenario.space.x_min,
            scenario.space.x_max,
            1 if mut.boundary_policy == "clamp" else 0,
            1 if state.has_transfer else 0,
            state.cconst,
            float(t_stop),
            scenario.event_limit,
            remaining,
            int(watch_high),
            1 if stop_on_species_loss else 0,
        )
        if status == _engine.STATUS_GROW:
            _grow(state)
            continue
        name = _STATUS[status]
        if name == "bad_rate":
            raise SimulationError(
                f"non-finite or non-positive total rate at t={state.time}"
            )
        return name


def step(state: SimState, scenario: Scenario) -> SimState:
    """Apply exactly one jump event in place (also returns the state)."""
    if state.n_total == 0:
        raise SimulationError("cannot step an extinct population")
    advance(state, scenario, t_stop=math.inf, max_events=1)
    return state


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    """Sampled history of one stochastic run."""

    times: np.ndarray
    snapshots: list[Population]
    status: str  # time_limit | extinction | event_limit
    events: int
    seed: int

    def population_sizes(self) -> np.ndarray:
        return np.array([p.total for p in self.snapshots], dtype=np.int64)

    def mean_traits(self) -> np.ndarray:
        """Per-snapshot mean trait; NaN once the population is empty."""
        return np.array(
            [p.mean_trait() if p.total > 0 else np.nan for p in self.snapshots]
        )

    def final(self) -> Population:
        return self.snapshots[-1]


def _sample_grid(t_max: float, cadence: float) -> np.ndarray:
    n = int(math.floor(t_max / cadence + 1e-9))
    grid = cadence * np.arange(n + 1)
    if grid[-1] < t_max - 1e-12:
        grid = np.append(grid, t_max)
    else:
        grid[-1] = t_max
    return grid


def simulate(
    scenario: Scenario,
    seed: int | None = None,
    t_max: float | None = None,
    cadence: float | None = None,
    population: Population | None = None,
) -> Trajectory:
    """Run the jump process, sampling snapshots on a fixed cadence.

    The run ends at t_max (status time_limit), at extinction, or when the
    scenario's event limit is exhausted (status event_limit); the terminal
    state is always included as the last snapshot.
    """
    seed = scenario.seed if seed is None else seed
    t_max = scenario.t_max if t_max is None else t_max
    cadence = scenario.cadence if cadence is None else cadence
    if t_max <= 0 or cadence <= 0:
        raise ValueError("t_max and cadence must be positive")

    state = make_state(scenario, seed, population=population)
    grid = _sample_grid(t_max, cadence)
    times = [0.0]
    snaps = [state.population.sorted()]
    status = "time_limit"
    for t_next in grid[1:]:
        outcome = advance(state, scenario, t_stop=float(t_next))
        if outcome == "extinct":
            times.append(state.time)
            snaps.append(state.population)
            status = "extinction"
            break
        if outcome == "event_limit":
            times.append(state.time)
            snaps.append(state.population.sorted())
            status = "event_limit"
            break
        times.append(float(t_next))
        snaps.append(state.population.sorted())
    return Trajectory(
        times=np.array(times),
        snapshots=snaps,
        status=status,
        events=state.event_count,
        seed=seed,
    )


def detect_resurgences(
    times: np.ndarray,
    mean_traits: np.ndarray,
    drop: float = 0.5,
    window: float = 10.0,
) -> list[tuple[float, float]]:
    """Times at which the mean trait falls by more than ``drop`` within
    ``window`` time units (abrupt takeovers by a small low-trait strain).

    Returns (t_start, achieved_drop) per detected event, skipping ahead
    past each event so a single collapse is reported once.
    """
    times = np.asarray(times, dtype=float)
    vals = np.asarray(mean_traits, dtype=float)
    events = []
    i = 0
    n = len(times)
    while i < n:
        if not np.isfinite(vals[i]):
            i += 1
            continue
        j_end = int(np.searchsorted(times, times[i] + window, side="right"))
        seg = vals[i + 1 : j_end]
        seg = seg[np.isfinite(seg)]
        if seg.size:
            fall = float(vals[i] - seg.min())
            if fall > drop:
                events.append((float(times[i]), fall))
                i = j_end
                continue
        i += 1
    return events


def run_ensemble(
    scenario: Scenario,
    replicates: int,
    base_seed: int | None = None,
    parallelism: int = 1,
    t_max: float | None = None,
    cadence: float | None = None,
) -> list[Trajectory]:
    """Run replicate simulations on derived substream seeds.

    Replicate k uses seeds.substream(base_seed, k); results are returned
    in replicate order regardless of the thread fan-out, so any derived
    statistics are independent of ``parallelism``.
    """
    from concurrent.futures import ThreadPoolExecutor

    from . import seeds as _seeds

    base = scenario.seed if base_seed is None else base_seed
    seed_list = [_seeds.substream(base, k) for k in range(replicates)]

    def one(seed):
        return simulate(scenario, seed=seed, t_max=t_max, cadence=cadence)

    if parallelism <= 1:
        return [one(s) for s in seed_list]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, seed_list))


# ---------------------------------------------------------------------------
# channel table and drift oracle


@dataclass
class ChannelRates:
    """Per-species channel rates plus the transfer pair matrix."""

    clonal_birth: np.ndarray
    mutant_birth: np.ndarray
    natural_death: np.ndarray
    competition_death: np.ndarray
    transfer: np.ndarray  # [donor, recipient], zero on the diagonal

    @property
    def total(self) -> float:
        return float(
            self.clonal_birth.sum()
            + self.mutant_birth.sum()
            + self.natural_death.sum()
            + self.competition_death.sum()
            + self.transfer.sum()
        )


def channel_rates(pop: Population, scenario: Scenario) -> ChannelRates:
    """Reference (pure numpy) computation of every channel's rate."""
    rates = scenario.rates
    K = scenario.K
    s = len(pop)
    if s == 0:
        z = np.zeros(0)
        return ChannelRates(z, z.copy(), z.copy(), z.copy(), np.zeros((0, 0)))
    traits = pop.traits
    cnt = pop.counts.astype(float)
    b = np.array([float(rates.b(t)) for t in traits])
    d = np.array([float(rates.d(t)) for t in traits])
    gx, gy = np.meshgrid(traits, traits, indexing="ij")
    cmat = np.broadcast_to(np.asarray(rates.C(gx, gy), dtype=float), gx.shape)
    tmat = np.broadcast_to(np.asarray(rates.tau(gx, gy), dtype=float), gx.shape)

    p = scenario.mutation.p
    clonal = cnt * b * (1.0 - p)
    mutant = cnt * b * p
    natural = cnt * d
    competition = cnt * (cmat @ cnt) / K
    denom = K * rates.beta + rates.mu * pop.total
    transfer = np.outer(cnt, cnt) * tmat / denom
    np.fill_diagonal(transfer, 0.0)

    out = ChannelRates(clonal, mutant, natural, competition, transfer)
    if not math.isfinite(out.total):
        raise SimulationError("total event rate is not finite")
    return out


def _mutation_integral(f, x: float, scenario: Scenario) -> float:
    """integral of f(z) against the mutant-trait law m(x, dz)."""
    mut = scenario.mutation
    lo, hi = scenario.space.x_min, scenario.space.x_max
    a, bnd = (lo - x) / mut.sigma, (hi - x) / mut.sigma
    if mut.boundary_policy == "resample":
        dist = _sci_stats.truncnorm(a, bnd, loc=x, scale=mut.sigma)
        val, _ = _sci_integrate.quad(lambda z: f(z) * dist.pdf(z), lo, hi, limit=200)
        return val
    # clamp: interior part plus boundary atoms
    dist = _sci_stats.norm(loc=x, scale=mut.sigma)
    val, _ = _sci_integrate.quad(lambda z: f(z) * dist.pdf(z), lo, hi, limit=200)
    return val + f(lo) * dist.cdf(lo) + f(hi) * (1.0 - dist.cdf(hi))


def drift_check(pop: Population, scenario: Scenario, f) -> float:
    """Generator drift of <nu, f> for the current population.

    Serves as a Monte Carlo oracle: over many short replicate steps the
    empirical mean of (<nu_{t+dt}, f> - <nu_t, f>)/dt must match this value
    within standard error.  Under replacement transfer each ordered donor/
    recipient pair contributes f(donor) - f(recipient).
    """
    if pop.total == 0:
        return 0.0
    ch = channel_rates(pop, scenario)
    K = scenario.K
    traits = pop.traits
    fx = np.array([float(f(t)) for t in traits])
    drift = float(
        np.dot(ch.clonal_birth - ch.natural_death - ch.competition_death, fx)
    )
    if scenario.mutation.p > 0:
        for i, t in enumerate(traits):
            if ch.mutant_birth[i] > 0:
                drift += ch.mutant_birth[i] * _mutation_integral(f, t, scenario)
    # transfer: recipient j switches to donor i's trait
    drift += float(np.sum(ch.transfer * (fx[:, None] - fx[None, :])))
    return drift / K
