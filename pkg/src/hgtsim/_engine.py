"""JIT-compiled core of the exact stochastic engine.

One species-aggregated direct-method step costs O(S) with S the number of
distinct living traits: competition and transfer row sums are maintained
incrementally on every count change and rebuilt from scratch every 2**14
events to bound floating-point drift.  The pair matrices are stored twice
(row-major and transposed) so every per-event loop walks contiguous
memory; the strided writes only happen on the rare species insertion and
removal events.  Two law-preserving fast paths cut the memory traffic
further: scenarios whose competition kernel is a literal constant skip the
competition matrix entirely (the row sum is C*N for every species), and
scenarios with no transfer skip the transfer bookkeeping.

All randomness comes from an in-kernel splitmix64 stream (inverse-
transform exponentials, Box-Muller normals), so a run is a pure function
of (scenario, seed).  Rate functions enter as first-class typed functions,
which keeps the kernel compiled once per process regardless of how many
different rate sets are simulated.

The kernel communicates through small mutable arrays:

    istate = [n_species, n_total, event_count, watch_index]
    fstate = [time]
    rstate = [rng_state]

and returns one of the STATUS_* codes below.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, types

__all__ = ["advance_kernel", "STATUS"]

STATUS_TSTOP = 0
STATUS_EXTINCT = 1
STATUS_EVENT_LIMIT = 2
STATUS_GROW = 3
STATUS_WATCH_HIGH = 4
STATUS_WATCH_ZERO = 5
STATUS_SPECIES_LOSS = 6
STATUS_BAD_RATE = 7
STATUS_CALL_BUDGET = 8

STATUS = {
    STATUS_TSTOP: "t_stop",
    STATUS_EXTINCT: "extinct",
    STATUS_EVENT_LIMIT: "event_limit",
    STATUS_GROW: "grow",
    STATUS_WATCH_HIGH: "watch_high",
    STATUS_WATCH_ZERO: "watch_zero",
    STATUS_SPECIES_LOSS: "species_loss",
    STATUS_BAD_RATE: "bad_rate",
    STATUS_CALL_BUDGET: "call_budget",
}

RECOMPUTE_MASK = (1 << 14) - 1  # full row-sum rebuild every 2**14 events

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0
_TWO_PI = 6.283185307179586

f8 = types.float64
i8 = types.int64
u8 = types.uint64
_F1 = types.FunctionType(f8(f8))
_F2 = types.FunctionType(f8(f8, f8))

# 'reassoc'/'contract'/'nsz' let LLVM vectorize the O(S) reductions without
# the nan-assuming parts of fastmath (the non-finite rate guard must work)
_FAST = {"reassoc", "contract", "nsz"}


@njit(types.Tuple((u8, f8))(u8), inline="always", cache=True)
def _uniform(state):
    state = state + _GOLD
    z = state
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return state, (z >> np.uint64(11)) * _INV53


_SIG = i8(
    _F1,  # birth rate b(x)
    _F1,  # death rate d(x)
    _F2,  # competition C(x, y)
    _F2,  # transfer tau(donor, recipient)
    f8[::1],  # traits
    i8[::1],  # counts
    f8[::1],  # b_arr
    f8[::1],  # d_arr
    f8[:, ::1],  # cmat[i, j]   = C(x_i, x_j)     (1x1 dummy when C constant)
    f8[:, ::1],  # cmat_t[i, j] = C(x_j, x_i)
    f8[:, ::1],  # tmat[i, j]   = tau(x_i, x_j)   (1x1 dummy when no transfer)
    f8[:, ::1],  # tmat_t[i, j] = tau(x_j, x_i)
    f8[::1],  # compsum[i] = sum_j cmat[i, j] * counts[j]
    f8[::1],  # tausum[i] = sum_{j != i} tmat[i, j] * counts[j]
    f8[::1],  # scratch (per-species total rates)
    i8[::1],  # istate
    f8[::1],  # fstate
    u8[::1],  # rstate
    i8,  # K
    f8,  # beta
    f8,  # mu
    f8,  # p (mutation probability per birth)
    f8,  # sigma
    f8,  # xmin
    f8,  # xmax
    i8,  # clamp_policy: 0 resample, 1 clamp
    i8,  # has_transfer: 0 skips all transfer bookkeeping
    f8,  # cconst: constant competition value, or -1.0 when C varies
    f8,  # t_stop
    i8,  # event_limit (global)
    i8,  # max_events for this call
    i8,  # watch_high threshold (0 disables)
    i8,  # stop_on_species_loss flag
)


@njit(_SIG, cache=True, nogil=True, fastmath=_FAST)
def advance_kernel(
    bfn,
    dfn,
    cfn,
    taufn,
    traits,
    counts,
    b_arr,
    d_arr,
    cmat,
    cmat_t,
    tmat,
    tmat_t,
    compsum,
    tausum,
    scratch,
    istate,
    fstate,
    rstate,
    K,
    beta,
    mu,
    p,
    sigma,
    xmin,
    xmax,
    clamp_policy,
    has_transfer,
    cconst,
    t_stop,
    event_limit,
    max_events,
    watch_high,
    stop_on_species_loss,
):
    S = istate[0]
    N = istate[1]
    events = istate[2]
    watch = istate[3]
    time = fstate[0]
    state = rstate[0]
    cap = traits.shape[0]
    inv_k = 1.0 / float(K)
    const_c = cconst >= 0.0
    done_this_call = 0

    while True:
        if N == 0:
            status = STATUS_EXTINCT
            break
        if S >= cap:
            # keep one free slot so a mutant insertion never overflows
            status = STATUS_GROW
            break
        if done_this_call >= max_events:
            status = STATUS_CALL_BUDGET
            break
        if events >= event_limit:
            status = STATUS_EVENT_LIMIT
            break

        if (events & RECOMPUTE_MASK) == 0:
            if not const_c:
                for i in range(S):
                    cs = 0.0
                    for j in range(S):
                        cs += cmat[i, j] * float(counts[j])
                    compsum[i] = cs
            if has_transfer != 0:
                for i in range(S):
                    ts = 0.0
                    for j in range(S):
                        ts += tmat[i, j] * float(counts[j])
                    tausum[i] = ts - tmat[i, i] * float(counts[i])

        invdenom = 1.0 / (float(K) * beta + mu * float(N))
        comp_const = cconst * float(N) * inv_k  # only meaningful when const_c
        total = 0.0
        if const_c:
            if has_transfer != 0:
                for i in range(S):
                    per_cap = b_arr[i] + d_arr[i] + comp_const + tausum[i] * invdenom
                    ri = float(counts[i]) * per_cap
                    scratch[i] = ri
                    total += ri
            else:
                for i in range(S):
                    per_cap = b_arr[i] + d_arr[i] + comp_const
                    ri = float(counts[i]) * per_cap
                    scratch[i] = ri
                    total += ri
        else:
            if has_transfer != 0:
                for i in range(S):
                    per_cap = (
                        b_arr[i]
                        + d_arr[i]
                        + compsum[i] * inv_k
                        + tausum[i] * invdenom
                    )
                    ri = float(counts[i]) * per_cap
                    scratch[i] = ri
                    total += ri
            else:
                for i in range(S):
                    per_cap = b_arr[i] + d_arr[i] + compsum[i] * inv_k
                    ri = float(counts[i]) * per_cap
                    scratch[i] = ri
                    total += ri
        if not math.isfinite(total) or total <= 0.0:
            status = STATUS_BAD_RATE
            break

        state, u1 = _uniform(state)
        dt = -math.log1p(-u1) / total
        if time + dt > t_stop:
            time = t_stop
            status = STATUS_TSTOP
            break
        time += dt
        events += 1
        done_this_call += 1

        state, u2 = _uniform(state)
        v = u2 * total
        src = S - 1
        acc = 0.0
        for i in range(S):
            nxt = acc + scratch[i]
            if v < nxt:
                src = i
                break
            acc = nxt

        # per-capita position inside the chosen species' channels
        w = (v - acc) / float(counts[src])
        bi = b_arr[src]
        if const_c:
            death_edge = bi + d_arr[src] + comp_const
        else:
            death_edge = bi + d_arr[src] + compsum[src] * inv_k

        lost_species = False
        watch_hit_zero = False

        if w < bi:
            if w < bi * (1.0 - p):
                # clonal birth
                grow_idx = src
            else:
                # mutant birth: Gaussian increment with boundary policy
                parent = traits[src]
                z = parent
                inside = False
                for _ in range(100):
                    state, ua = _uniform(state)
                    state, ub = _uniform(state)
                    g = math.sqrt(-2.0 * math.log1p(-ua)) * math.cos(_TWO_PI * ub)
                    z = parent + sigma * g
                    if clamp_policy == 1:
                        break
                    if xmin <= z <= xmax:
                        inside = True
                        break
                if not inside:
                    z = min(max(z, xmin), xmax)
                # merge with an existing species on exact trait equality
                grow_idx = -1
                for j in range(S):
                    if traits[j] == z:
                        grow_idx = j
                        break
                if grow_idx < 0:
                    idx = S
                    traits[idx] = z
                    b_arr[idx] = bfn(z)
                    d_arr[idx] = dfn(z)
                    counts[idx] = 0
                    if not const_c:
                        cs = 0.0
                        for j in range(S):
                            cz = cfn(z, traits[j])
                            czr = cfn(traits[j], z)
                            cmat[idx, j] = cz
                            cmat_t[j, idx] = cz
                            cmat[j, idx] = czr
                            cmat_t[idx, j] = czr
                            cs += cz * float(counts[j])
                        czz = cfn(z, z)
                        cmat[idx, idx] = czz
                        cmat_t[idx, idx] = czz
                        compsum[idx] = cs
                    if has_transfer != 0:
                        ts = 0.0
                        for j in range(S):
                            tz = taufn(z, traits[j])
                            tzr = taufn(traits[j], z)
                            tmat[idx, j] = tz
                            tmat_t[j, idx] = tz
                            tmat[j, idx] = tzr
                            tmat_t[idx, j] = tzr
                            ts += tz * float(counts[j])
                        tzz = taufn(z, z)
                        tmat[idx, idx] = tzz
                        tmat_t[idx, idx] = tzz
                        tausum[idx] = ts
                    S += 1
                    grow_idx = idx
            # apply the +1
            counts[grow_idx] += 1
            N += 1
            if not const_c:
                crow = cmat_t[grow_idx]
                for k in range(S):
                    compsum[k] += crow[k]
            if has_transfer != 0:
                trow = tmat_t[grow_idx]
                for k in range(S):
                    tausum[k] += trow[k]
                tausum[grow_idx] -= trow[grow_idx]
        else:
            is_transfer = False
            victim = src
            if w >= death_edge and tausum[src] > 0.0:
                # transfer: src donates, victim switches to src's trait
                target = (w - death_edge) / invdenom
                picked = -1
                tacc = 0.0
                trow_src = tmat[src]
                for j in range(S):
                    if j == src:
                        continue
                    tacc += trow_src[j] * float(counts[j])
                    if target < tacc:
                        picked = j
                        break
                if picked < 0:
                    # float-edge fallback: last recipient with positive weight
                    for j in range(S - 1, -1, -1):
                        if j != src and counts[j] > 0 and trow_src[j] > 0.0:
                            picked = j
                            break
                if picked >= 0:
                    victim = picked
                    is_transfer = True
                # else: stale tiny tausum, fold the event into a death of src
            if is_transfer:
                # recipient joins the donor species
                counts[src] += 1
                N += 1
                if not const_c:
                    crow = cmat_t[src]
                    for k in range(S):
                        compsum[k] += crow[k]
                trow = tmat_t[src]
                for k in range(S):
                    tausum[k] += trow[k]
                tausum[src] -= trow[src]
            # apply the -1 to victim (natural death, competition death, or
            # the recipient leaving its old species)
            counts[victim] -= 1
            N -= 1
            if not const_c:
                crow = cmat_t[victim]
                for k in range(S):
                    compsum[k] -= crow[k]
            if has_transfer != 0:
                trow = tmat_t[victim]
                for k in range(S):
                    tausum[k] -= trow[k]
                tausum[victim] += trow[victim]
            if counts[victim] == 0:
                lost_species = True
                if victim == watch:
                    watch_hit_zero = True
                last = S - 1
                if victim != last:
                    traits[victim] = traits[last]
                    counts[victim] = counts[last]
                    b_arr[victim] = b_arr[last]
                    d_arr[victim] = d_arr[last]
                    compsum[victim] = compsum[last]
                    tausum[victim] = tausum[last]
                    # row copies, then column copies: the column pass also
                    # fixes the diagonal to the moved species' self term
                    if not const_c:
                        for j in range(S):
                            cmat[victim, j] = cmat[last, j]
                            cmat_t[victim, j] = cmat_t[last, j]
                        for j in range(S - 1):
                            cmat[j, victim] = cmat[j, last]
                            cmat_t[j, victim] = cmat_t[j, last]
                    if has_transfer != 0:
                        for j in range(S):
                            tmat[victim, j] = tmat[last, j]
                            tmat_t[victim, j] = tmat_t[last, j]
                        for j in range(S - 1):
                            tmat[j, victim] = tmat[j, last]
                            tmat_t[j, victim] = tmat_t[j, last]
                    if watch == last:
                        watch = victim
                S -= 1

        if N == 0:
            status = STATUS_EXTINCT
            break
        if watch_hit_zero:
            status = STATUS_WATCH_ZERO
            break
        if watch >= 0 and watch_high > 0 and counts[watch] >= watch_high:
            status = STATUS_WATCH_HIGH
            break
        if lost_species and stop_on_species_loss != 0:
            status = STATUS_SPECIES_LOSS
            break

    istate[0] = S
    istate[1] = N
    istate[2] = events
    istate[3] = watch
    fstate[0] = time
    rstate[0] = state
    return status
