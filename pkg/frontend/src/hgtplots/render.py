"""Figure rendering from hgtsim CLI artifacts.

Four plot kinds, each a pure function of its input files (fixed style, no
timestamps embedded, deterministic ids):

* ``heatmap``        trait-vs-time density heatmap (100 trait bins) with a
                     population-size overlay, from ``trajectory.csv``
* ``hist``           terminal trait distribution, from ``trajectory.csv``
* ``portrait``       two-trait phase portrait (vector field, nullclines,
                     fixed points), from ``phase.json``
* ``invasion_bars``  closed-form invasion probability vs the Monte Carlo
                     estimate with its error bar, from ``invasion.json``

This package never calls the simulation engine: it consumes artifacts
only, so the primary test suite runs without it (and vice versa).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "hgtplots"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["PlotSpec", "SchemaError", "render"]

KINDS = ("heatmap", "hist", "portrait", "invasion_bars")

TRAIT_BINS = 100

EXPECTED_COLUMNS = {
    "heatmap": ["time", "trait", "count"],
    "hist": ["time", "trait", "count"],
}


class SchemaError(ValueError):
    """Input artifact does not match the expected schema."""


@dataclass
class PlotSpec:
    """What to render: input artifact(s), plot kind, ranges, output path."""

    kind: str
    inputs: list[str]
    output: str
    trait_min: float | None = None
    trait_max: float | None = None
    title: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown plot kind {self.kind!r}; expected one of {KINDS}")
        if not self.inputs:
            raise ValueError("at least one input file is required")


def _read_csv(path: str, expected: list[str]) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input file not found: {path}")
    with path.open() as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        if header != expected:
            missing = [c for c in expected if c not in header]
            extra = [c for c in header if c not in expected]
            raise SchemaError(
                f"{path}: column mismatch; expected {expected}, got {header} "
                f"(missing {missing or 'none'}, unexpected {extra or 'none'})"
            )
        rows = [row for row in reader if row]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    cols = np.array(rows, dtype=object)
    out = {}
    for j, name in enumerate(expected):
        out[name] = np.array([float(v) for v in cols[:, j]])
    return out


def _save(fig, output: str) -> Path:
    out = Path(output)
    out.parent.mkdir(parents=True, exist_ok=True)
    suffix = out.suffix.lower()
    if suffix not in (".png", ".svg"):
        raise ValueError(f"output must be .png or .svg, got {out.name}")
    # strip the writer metadata so the bytes depend only on the inputs
    metadata = {"Software": None} if suffix == ".png" else {"Date": None}
    fig.savefig(out, dpi=130, metadata=metadata)
    plt.close(fig)
    return out


def _render_heatmap(spec: PlotSpec) -> Path:
    data = _read_csv(spec.inputs[0], EXPECTED_COLUMNS["heatmap"])
    times = data["time"]
    traits = data["trait"]
    counts = data["count"]
    alive = counts > 0
    t_edges = np.unique(times)
    lo = spec.trait_min if spec.trait_min is not None else float(np.nanmin(traits[alive]))
    hi = spec.trait_max if spec.trait_max is not None else float(np.nanmax(traits[alive]))
    if not hi > lo:
        hi = lo + 1.0
    trait_edges = np.linspace(lo, hi, TRAIT_BINS + 1)

    # bin counts per (time, trait) cell
    t_index = np.searchsorted(t_edges, times)
    grid = np.zeros((TRAIT_BINS, len(t_edges)))
    tr_index = np.clip(
        np.searchsorted(trait_edges, traits, side="right") - 1, 0, TRAIT_BINS - 1
    )
    np.add.at(grid, (tr_index[alive], t_index[alive]), counts[alive])

    pop = np.zeros(len(t_edges))
    np.add.at(pop, t_index[alive], counts[alive])

    fig, ax = plt.subplots(figsize=(9.0, 5.0))
    masked = np.ma.masked_where(grid == 0, grid)
    trait_centers = 0.5 * (trait_edges[:-1] + trait_edges[1:])
    mesh = ax.pcolormesh(
        t_edges,
        trait_centers,
        masked,
        cmap="viridis",
        shading="nearest",
        norm=matplotlib.colors.LogNorm(vmin=1.0, vmax=max(grid.max(), 1.0)),
    )
    fig.colorbar(mesh, ax=ax, label="individuals per trait bin")
    ax.set_xlabel("time")
    ax.set_ylabel("trait")
    ax.set_title(spec.title or "trait distribution over time")

    twin = ax.twinx()
    twin.plot(t_edges, pop, color="crimson", lw=1.2, label="population size")
    twin.set_ylabel("population size", color="crimson")
    twin.tick_params(axis="y", colors="crimson")
    twin.set_ylim(bottom=0)
    return _save(fig, spec.output)


def _render_hist(spec: PlotSpec) -> Path:
    data = _read_csv(spec.inputs[0], EXPECTED_COLUMNS["hist"])
    t_final = data["time"].max()
    sel = (data["time"] == t_final) & (data["count"] > 0)
    if not np.any(sel):
        raise SchemaError(f"{spec.inputs[0]}: terminal snapshot is empty (extinct run)")
    traits = data["trait"][sel]
    weights = data["count"][sel]
    lo = spec.trait_min if spec.trait_min is not None else float(traits.min())
    hi = spec.trait_max if spec.trait_max is not None else float(traits.max())
    if not hi > lo:
        hi = lo + 1.0

    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.hist(traits, bins=40, range=(lo, hi), weights=weights, color="steelblue")
    ax.set_xlabel("trait")
    ax.set_ylabel("individuals")
    ax.set_title(spec.title or f"trait distribution at t = {t_final:g}")
    return _save(fig, spec.output)


def _render_portrait(spec: PlotSpec) -> Path:
    path = Path(spec.inputs[0])
    if not path.exists():
        raise SchemaError(f"input file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise SchemaError(f"{path}: not valid JSON ({err})") from None
    needed = ("fixed_points", "nullclines", "vector_field")
    missing = [k for k in needed if k not in doc]
    if missing:
        raise SchemaError(f"{path}: missing keys {missing}; expected a phase.json artifact")

    fig, ax = plt.subplots(figsize=(5.6, 5.2))
    field = np.asarray(doc["vector_field"], dtype=float)
    if field.size:
        norms = np.hypot(field[:, 2], field[:, 3])
        norms[norms == 0] = 1.0
        ax.quiver(
            field[:, 0], field[:, 1], field[:, 2] / norms, field[:, 3] / norms,
            color="0.75", scale=28, width=0.003,
        )
    for which, color in (("x", "seagreen"), ("y", "darkorange")):
        pts = np.asarray(doc["nullclines"].get(which, []), dtype=float)
        if pts.size:
            ax.plot(pts[:, 0], pts[:, 1], ".", ms=2.0, color=color,
                    label=f"d n_{which}/dt = 0")
    for fp in doc["fixed_points"]:
        stable = fp["classification"] == "stable_node_or_focus"
        ax.plot(
            fp["location"][0], fp["location"][1],
            marker="o" if stable else "*",
            ms=9 if stable else 12,
            mfc="black" if stable else "white",
            mec="black",
            ls="none",
        )
    ax.set_xlabel("resident density n_x")
    ax.set_ylabel("invader density n_y")
    diagram = doc.get("diagram_id", "?")
    ax.set_title(spec.title or f"phase portrait (diagram {diagram})")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_xlim(left=0)
    ax.set_ylim(bottom=0)
    return _save(fig, spec.output)


def _render_invasion_bars(spec: PlotSpec) -> Path:
    path = Path(spec.inputs[0])
    if not path.exists():
        raise SchemaError(f"input file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise SchemaError(f"{path}: not valid JSON ({err})") from None
    if "P" not in doc:
        raise SchemaError(f"{path}: missing key 'P'; expected an invasion.json artifact")

    labels = ["branching formula"]
    values = [doc["P"]]
    errors = [0.0]
    if "mc" in doc:
        labels.append(f"Monte Carlo ({doc['mc']['replicates']} runs)")
        values.append(doc["mc"]["estimate"])
        errors.append(doc["mc"]["stderr"])

    fig, ax = plt.subplots(figsize=(4.6, 3.8))
    xs = np.arange(len(labels))
    ax.bar(xs, values, yerr=errors, capsize=6, color=["slategray", "steelblue"][: len(xs)])
    ax.set_xticks(xs)
    ax.set_xticklabels(labels, fontsize=9)
    ax.set_ylabel("invasion probability")
    pair = doc.get("pair")
    ax.set_title(spec.title or (f"invasion of trait {pair[1]:g} into {pair[0]:g}" if pair else "invasion probability"))
    ax.set_ylim(bottom=0)
    return _save(fig, spec.output)


_RENDERERS = {
    "heatmap": _render_heatmap,
    "hist": _render_hist,
    "portrait": _render_portrait,
    "invasion_bars": _render_invasion_bars,
}


def render(spec: PlotSpec) -> Path:
    """Render one figure; returns the written path."""
    return _RENDERERS[spec.kind](spec)
