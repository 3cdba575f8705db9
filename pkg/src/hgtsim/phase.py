"""Fitness functions, fixed points and phase-diagram classification for
the two-trait system.

Invasion fitness of a rare y-individual against an x-resident at its
logistic equilibrium nbar(x) = r(x)/C(x,x):

    f(y;x) = r(y) - C(y,x) r(x) / C(x,x)                 (no transfer)
    S(y;x) = f(y;x) + alpha(y,x) r(x) / (beta C(x,x) + mu r(x))

The boundary equilibria are (0,0), (nbar_x, 0), (0, nbar_y); the
transverse eigenvalue at (nbar_x, 0) is exactly S(y;x) and the
along-boundary eigenvalue is -r(x).  Interior fixed points are the roots
in (0,1) of a polynomial-like bracket G(p) (p = fraction of trait x), with
at most 3 roots in the mixed (BDA) transfer regime, 2 in the frequency-
dependent regime and 1 in the density-dependent regime.

Diagram catalogue (ids match the classical eight-panel phase portrait
gallery for this system; anything else is "unclassified"):

    1  fixation of y: (nbar_x,0) unstable, (0,nbar_y) stable, no interior
    2  fixation of x: (nbar_x,0) stable, (0,nbar_y) unstable, no interior
    3  coexistence:   both boundaries unstable, one interior sink
    4  bistability:   both boundaries stable, one interior saddle
    5  mixed, stable x-boundary, interior sink + saddle
    6  mixed, stable y-boundary, interior sink + saddle
    7  both boundaries unstable, 2 sinks + 1 saddle inside
    8  both boundaries stable, 2 saddles + 1 sink inside

Ids 1-4 occur for every transfer regime, 5-6 require frequency-dependent
or mixed transfer, 7-8 only the mixed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import TwoTraitParams
from .odes import two_trait_rhs

__all__ = [
    "HYPERBOLICITY_TOL",
    "RESIDUAL_TOL",
    "FitnessReport",
    "FixedPoint",
    "PoincareReport",
    "ConstantCReport",
    "PhaseDiagramLabel",
    "DegenerateFixedLineError",
    "fitness_f",
    "fitness_S",
    "fitness_report",
    "interior_bracket",
    "boundary_fixed_points",
    "interior_fixed_points",
    "classify_fixed_point",
    "poincare_consistency",
    "classify_diagram",
    "constant_C_report",
]

HYPERBOLICITY_TOL = 1e-6
RESIDUAL_TOL = 1e-9
DET_TOL = 1e-8
SCAN_INTERVALS = 10_000
BISECT_XTOL = 1e-12

INTERIOR_CEILING = {"BDA": 3, "FD": 2, "DD": 1}


class DegenerateFixedLineError(RuntimeError):
    """The interior-root bracket vanished identically: a line of fixed
    points instead of isolated ones."""


def transfer_regime(params: TwoTraitParams) -> str:
    if params.beta == 0:
        return "FD"
    if params.mu == 0:
        return "DD"
    return "BDA"


def fitness_f(params: TwoTraitParams, invader: str = "y") -> float:
    """Transfer-free invasion fitness of ``invader`` against the other
    trait resident at its logistic equilibrium."""
    q = params if invader == "y" else params.swapped()
    return q.ry - q.cyx * q.rx / q.cxx


def fitness_S(params: TwoTraitParams, invader: str = "y") -> float:
    """Invasion fitness including the transfer gain of the rare invader."""
    q = params if invader == "y" else params.swapped()
    denom = q.beta * q.cxx + q.mu * q.rx
    if denom <= 0:
        raise ZeroDivisionError("beta*C(x,x) + mu*r(x) must be positive")
    return fitness_f(params, invader) + q.alpha_yx * q.rx / denom


@dataclass(frozen=True)
class FitnessReport:
    invader: str
    resident: str
    f: float
    S: float


def fitness_report(params: TwoTraitParams, invader: str = "y") -> FitnessReport:
    return FitnessReport(
        invader=invader,
        resident="x" if invader == "y" else "y",
        f=fitness_f(params, invader),
        S=fitness_S(params, invader),
    )


# ---------------------------------------------------------------------------
# fixed points


@dataclass(frozen=True)
class FixedPoint:
    location: tuple[float, float]
    kind: str  # origin | boundary_x | boundary_y | interior
    eigenvalues: tuple[complex, complex]
    classification: str  # stable_node_or_focus | saddle | unstable | nonhyperbolic
    poincare_index: int
    residual: float

    @property
    def stable(self) -> bool:
        return self.classification == "stable_node_or_focus"


def _classify_eigs(eigs) -> tuple[str, int]:
    re = np.real(np.asarray(eigs))
    if np.any(np.abs(re) < HYPERBOLICITY_TOL):
        return "nonhyperbolic", 0
    det = float(np.real(np.prod(eigs)))
    if abs(det) < DET_TOL:
        return "nonhyperbolic", 0
    index = 1 if det > 0 else -1
    if np.all(re < 0):
        return "stable_node_or_focus", index
    if np.all(re > 0):
        return "unstable", index
    return "saddle", index


def _jacobian(location, params: TwoTraitParams) -> np.ndarray:
    state = np.asarray(location, dtype=float)
    h = 1e-6 * (1.0 + float(np.linalg.norm(state)))
    jac = np.empty((2, 2))
    for col in range(2):
        bump = np.zeros(2)
        bump[col] = h
        jac[:, col] = (
            two_trait_rhs(state + bump, params) - two_trait_rhs(state - bump, params)
        ) / (2 * h)
    return jac


def classify_fixed_point(
    location, params: TwoTraitParams, kind: str = "interior"
) -> FixedPoint:
    """Eigenvalues (central-difference Jacobian), stability class and
    Poincare index at a candidate fixed point."""
    state = np.asarray(location, dtype=float)
    residual = float(np.linalg.norm(two_trait_rhs(state, params)))
    eigs = np.linalg.eigvals(_jacobian(state, params))
    classification, index = _classify_eigs(eigs)
    return FixedPoint(
        location=(float(state[0]), float(state[1])),
        kind=kind,
        eigenvalues=(complex(eigs[0]), complex(eigs[1])),
        classification=classification,
        poincare_index=index,
        residual=residual,
    )


def boundary_fixed_points(params: TwoTraitParams) -> list[FixedPoint]:
    """The three axis equilibria with exact eigenvalues.

    Origin: (r(x), r(y)), always unstable.  (nbar_x, 0): along-boundary
    eigenvalue -r(x), transverse eigenvalue S(y;x); symmetrically for
    (0, nbar_y).
    """
    out = []
    s_yx = fitness_S(params, invader="y")
    s_xy = fitness_S(params, invader="x")
    for kind, loc, eigs in (
        ("origin", (0.0, 0.0), (params.rx, params.ry)),
        ("boundary_x", (params.nbar_x, 0.0), (-params.rx, s_yx)),
        ("boundary_y", (0.0, params.nbar_y), (-params.ry, s_xy)),
    ):
        classification, index = _classify_eigs(np.asarray(eigs, dtype=complex))
        residual = float(np.linalg.norm(two_trait_rhs(loc, params)))
        out.append(
            FixedPoint(
                location=loc,
                kind=kind,
                eigenvalues=(complex(eigs[0]), complex(eigs[1])),
                classification=classification,
                poincare_index=index,
                residual=residual,
            )
        )
    return out


def _rq(params: TwoTraitParams, p):
    """R(p) = p r(x) + (1-p) r(y);  Q(p) = quadratic competition form."""
    r_mix = p * params.rx + (1 - p) * params.ry
    q_mix = (
        params.cxx * p**2
        + (params.cxy + params.cyx) * p * (1 - p)
        + params.cyy * (1 - p) ** 2
    )
    return r_mix, q_mix


def interior_bracket(params: TwoTraitParams, p):
    """G(p), whose roots in (0,1) are the interior fixed points.

    p is the fraction of trait x.  Derived by substituting
    n = R(p)/Q(p) into the fraction equation and clearing denominators:

        G = (r(x)-r(y)) Q (beta Q + mu R)
            + R (beta Q + mu R) (p (C(y,x)-C(x,x)) + (1-p) (C(y,y)-C(x,y)))
            + alpha(x,y) R Q
    """
    p = np.asarray(p, dtype=float)
    r_mix, q_mix = _rq(params, p)
    lin = p * (params.cyx - params.cxx) + (1 - p) * (params.cyy - params.cxy)
    bq_mur = params.beta * q_mix + params.mu * r_mix
    return (
        (params.rx - params.ry) * q_mix * bq_mur
        + r_mix * bq_mur * lin
        + params.alpha_xy * r_mix * q_mix
    )


def _bisect(fn, lo: float, hi: float, flo: float) -> float:
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo < BISECT_XTOL:
            return mid
        fm = fn(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo = mid
            flo = fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _bracket_scale(params: TwoTraitParams, grid: np.ndarray) -> float:
    r_mix, q_mix = _rq(params, grid)
    lin = grid * (params.cyx - params.cxx) + (1 - grid) * (params.cyy - params.cxy)
    bq_mur = params.beta * q_mix + params.mu * r_mix
    terms = (
        np.abs((params.rx - params.ry) * q_mix * bq_mur)
        + np.abs(r_mix * bq_mur * lin)
        + np.abs(params.alpha_xy * r_mix * q_mix)
    )
    return max(float(terms.max()), 1e-30)


def interior_fixed_points(params: TwoTraitParams) -> list[FixedPoint]:
    """Locate and classify every interior fixed point.

    Sign-scan of G over 10^4 subintervals of (0,1) plus bisection to
    1e-12 in p; each root maps to (n_x, n_y) = (p n, (1-p) n) with
    n = R(p)/Q(p).  Raises DegenerateFixedLineError when G is numerically
    identically zero, and asserts the per-regime count ceilings.
    """
    grid = np.linspace(0.0, 1.0, SCAN_INTERVALS + 1)[1:-1]
    vals = interior_bracket(params, grid)
    scale = _bracket_scale(params, grid)
    if np.all(np.abs(vals) < 1e-12 * scale):
        raise DegenerateFixedLineError(
            "interior bracket vanishes identically: line of fixed points"
        )

    def g(p):
        return float(interior_bracket(params, p))

    roots: list[float] = []
    for k in range(len(grid) - 1):
        a, fa = grid[k], vals[k]
        b, fb = grid[k + 1], vals[k + 1]
        if fa == 0.0:
            roots.append(float(a))
        elif fa * fb < 0:
            roots.append(_bisect(g, float(a), float(b), float(fa)))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))

    points = []
    for p in roots:
        r_mix, q_mix = _rq(params, p)
        n = r_mix / q_mix
        if n <= 0:
            continue
        loc = (p * n, (1 - p) * n)
        fp = classify_fixed_point(loc, params, kind="interior")
        if fp.residual > 1e-6:
            # spurious root of the cleared-denominator form
            continue
        points.append(fp)

    ceiling = INTERIOR_CEILING[transfer_regime(params)]
    if len(points) > ceiling:
        raise RuntimeError(
            f"{len(points)} interior fixed points exceed the "
            f"{transfer_regime(params)} ceiling of {ceiling}"
        )
    return points


@dataclass(frozen=True)
class PoincareReport:
    interior_index_sum: int
    expected_sum: int | None
    passed: bool
    skipped: bool
    reason: str = ""


def poincare_consistency(
    boundary: list[FixedPoint], interior: list[FixedPoint]
) -> PoincareReport:
    """Index bookkeeping for the positive quadrant.

    The interior indices must sum to +1 when both nontrivial boundary
    equilibria are unstable, -1 when both are stable, and 0 in the mixed
    case.  Skipped (with notice) when any point is nonhyperbolic.
    """
    all_points = list(boundary) + list(interior)
    if any(fp.classification == "nonhyperbolic" for fp in all_points):
        return PoincareReport(0, None, False, True, "nonhyperbolic point present")
    by_kind = {fp.kind: fp for fp in boundary}
    try:
        bx = by_kind["boundary_x"]
        by = by_kind["boundary_y"]
    except KeyError:
        return PoincareReport(0, None, False, True, "boundary points missing")
    n_stable = int(bx.stable) + int(by.stable)
    expected = {0: 1, 2: -1, 1: 0}[n_stable]
    total = sum(fp.poincare_index for fp in interior)
    return PoincareReport(total, expected, total == expected, False)


@dataclass(frozen=True)
class PhaseDiagramLabel:
    diagram_id: int | str  # 1..8 or "unclassified"
    boundary_x_stable: bool | None
    boundary_y_stable: bool | None
    interior_kinds: tuple[str, ...]
    detail: str = ""


def classify_diagram(params: TwoTraitParams) -> PhaseDiagramLabel:
    """Map the fixed-point configuration onto the eight-diagram catalogue."""
    boundary = boundary_fixed_points(params)
    try:
        interior = interior_fixed_points(params)
    except DegenerateFixedLineError:
        return PhaseDiagramLabel("unclassified", None, None, (), "line of fixed points")
    all_points = boundary + interior
    if any(fp.classification == "nonhyperbolic" for fp in all_points):
        return PhaseDiagramLabel(
            "unclassified", None, None, (), "nonhyperbolic point present"
        )
    by_kind = {fp.kind: fp for fp in boundary}
    bxs = by_kind["boundary_x"].stable
    bys = by_kind["boundary_y"].stable
    kinds = tuple(sorted(fp.classification for fp in interior))
    sinks = kinds.count("stable_node_or_focus")
    saddles = kinds.count("saddle")

    diagram: int | str = "unclassified"
    if not bxs and not bys:
        if sinks == 1 and saddles == 0:
            diagram = 3
        elif sinks == 2 and saddles == 1:
            diagram = 7
    elif bxs and bys:
        if sinks == 0 and saddles == 1:
            diagram = 4
        elif sinks == 1 and saddles == 2:
            diagram = 8
    else:
        if len(interior) == 0:
            diagram = 2 if bxs else 1
        elif sinks == 1 and saddles == 1:
            diagram = 5 if bxs else 6
    return PhaseDiagramLabel(
        diagram_id=diagram,
        boundary_x_stable=bxs,
        boundary_y_stable=bys,
        interior_kinds=kinds,
    )


@dataclass(frozen=True)
class ConstantCReport:
    """Polymorphism analysis for a constant competition kernel.

    phat is the equilibrium fraction of the *invading* trait y (the
    fraction equation carries r(y) - r(x)).  In the frequency-dependent
    regime no polymorphic point exists and invasion implies fixation;
    ``invader_fixes`` then reports the sign test S(y;x) > 0.
    """

    regime: str
    phat: float | None
    exists: bool
    stable: bool | None
    fixation: str | None  # 'x' | 'y' | None (coexistence / bistable)
    invader_fixes: bool | None = None


def constant_C_report(params: TwoTraitParams) -> ConstantCReport:
    if not params.is_constant_C():
        raise ValueError("competition kernel is not constant")
    regime = transfer_regime(params)
    f = fitness_f(params, invader="y")
    a = params.alpha_yx
    if regime == "FD":
        s = fitness_S(params, invader="y")
        return ConstantCReport(
            regime="FD",
            phat=None,
            exists=False,
            stable=None,
            fixation="y" if s > 0 else ("x" if s < 0 else None),
            invader_fixes=s > 0,
        )
    c = params.cxx
    denom = params.mu * f * f + a * f
    if denom == 0:
        return ConstantCReport(regime, None, False, None, _fixation_no_poly(f, a))
    phat = -(f * (params.beta * c + params.mu * params.rx) + a * params.rx) / denom
    exists = 0.0 < phat < 1.0
    stable = (params.mu * f + a > 0) if exists else None
    return ConstantCReport(
        regime=regime,
        phat=float(phat),
        exists=exists,
        stable=stable,
        fixation=None if exists else _fixation_no_poly(f, a),
    )


def _fixation_no_poly(f: float, a: float) -> str | None:
    """Fixation outcome under constant C when no interior point exists:
    both signs positive fix y, both negative fix x."""
    if f > 0 and a > 0:
        return "y"
    if f < 0 and a < 0:
        return "x"
    if f > 0 and a == 0:
        return "y"
    if f < 0 and a == 0:
        return "x"
    return None
