"""Offline figure rendering for hgtsim CLI artifacts."""

from .render import KINDS, PlotSpec, SchemaError, render

__version__ = "0.1.0"

__all__ = ["KINDS", "PlotSpec", "SchemaError", "render", "__version__"]
