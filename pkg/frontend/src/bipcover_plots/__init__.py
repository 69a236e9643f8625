"""Figure generation for bipcover CSV output.

Consumes the ``# schema=1`` CSV files written by ``bipcover sweep`` and
``bipcover simulate`` and renders them as PNG/SVG figures.  This package
never imports the core library; the CSV files are its whole interface.
"""

from .plots import FIGURE_KINDS, FigureSpec, PlotsError, SchemaError, build_figure, render

__all__ = [
    "FIGURE_KINDS",
    "FigureSpec",
    "PlotsError",
    "SchemaError",
    "build_figure",
    "render",
]
