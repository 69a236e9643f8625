"""Rendering of bipcover CSV output as figures.

Input is always a ``# schema=1`` CSV produced by ``bipcover sweep`` or
``bipcover simulate``.  A :class:`FigureSpec` names the input, one of four
figure kinds, an optional axes mapping overriding the kind's default column
choices, optional log-scale flags, and the output image path.  Rendering is
deterministic: fixed style, fixed SVG hash salt, no timestamps in output
metadata.  Input files are only ever read.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd
import seaborn as sns

SCHEMA_LINE = "# schema=1"
FIGURE_KINDS = ("bounds", "ratios", "overestimation", "yule-dist")

_RC = {
    "svg.hashsalt": "bipcover-plots",
    "figure.constrained_layout.use": True,
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.family": "DejaVu Sans",
    "axes.grid": True,
    "grid.alpha": 0.35,
    "legend.frameon": False,
}

# Per-kind default column mapping and default y-axis scale.  ``None`` values
# (e.g. yule-dist's y) mean "both ratio columns"; an axes override may also
# set a slot to None to disable it (e.g. no panel split).
_KIND_AXES = {
    "bounds": {"x": "k", "y": "m_b", "series": "t_min", "panel": "q"},
    "ratios": {"x": "k", "y": "ratio_b", "series": "t_min", "panel": "q"},
    "overestimation": {"x": "k", "y": "ratio_b", "series": "tree_kind", "panel": "q"},
    "yule-dist": {"row": "t_min", "col": "k", "y": None},
}
_KIND_LOG_Y = {"bounds": True, "ratios": False, "overestimation": False, "yule-dist": True}
_RATIO_COLUMNS = ("ratio_o", "ratio_b")


class PlotsError(Exception):
    """Any figure-generation failure with a human-readable message."""


class SchemaError(PlotsError):
    """The input CSV does not match schema=1 or lacks required data."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure: input CSV, kind, axes mapping, scales, output path."""

    csv_path: str | Path
    kind: str
    output: str | Path
    axes: Mapping[str, str | None] = field(default_factory=dict)
    log_x: bool | None = None
    log_y: bool | None = None


def load_schema1(path: str | Path) -> pd.DataFrame:
    """Read a schema=1 CSV, or raise SchemaError explaining why it is not one."""
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"input CSV not found: {path}")
    with path.open("r", encoding="utf-8") as handle:
        first = handle.readline().rstrip("\n")
    if first != SCHEMA_LINE:
        raise SchemaError(
            f"{path}: first line is {first!r}, expected {SCHEMA_LINE!r}"
        )
    frame = pd.read_csv(path, comment="#")
    if frame.empty:
        raise SchemaError(f"{path}: no data rows")
    return frame


def _usable_rows(frame: pd.DataFrame, path: str | Path) -> pd.DataFrame:
    if "error" in frame.columns:
        errors = frame["error"].fillna("")
        frame = frame[errors == ""]
        if frame.empty:
            raise SchemaError(f"{path}: every data row carries an error value")
    return frame


def _resolve_axes(spec: FigureSpec, frame: pd.DataFrame) -> dict:
    defaults = _KIND_AXES[spec.kind]
    unknown = set(spec.axes) - set(defaults)
    if unknown:
        raise SchemaError(
            f"axes mapping keys {sorted(unknown)} not valid for kind {spec.kind!r}; "
            f"allowed: {sorted(defaults)}"
        )
    axes = {**defaults, **dict(spec.axes)}
    for slot, column in axes.items():
        required = slot in ("x",) or (slot == "y" and spec.kind != "yule-dist")
        if column is None:
            if slot == "y" and spec.kind == "yule-dist":
                continue
            if required:
                raise SchemaError(f"axes slot {slot!r} cannot be empty for kind {spec.kind!r}")
            continue
        if column not in frame.columns:
            raise SchemaError(
                f"axes slot {slot!r} references column {column!r}, "
                f"not in CSV columns {list(frame.columns)}"
            )
    if spec.kind == "yule-dist" and axes["y"] is None:
        missing = [c for c in _RATIO_COLUMNS if c not in frame.columns]
        if missing:
            raise SchemaError(f"yule-dist needs columns {list(_RATIO_COLUMNS)}; missing {missing}")
    return axes


def _panel_values(frame: pd.DataFrame, column: str | None) -> list:
    if column is None:
        return [None]
    values = sorted(frame[column].dropna().unique().tolist())
    return values or [None]


def _line_panels(spec: FigureSpec, frame: pd.DataFrame, axes_map: dict) -> plt.Figure:
    panels = _panel_values(frame, axes_map["panel"])
    fig, grid = plt.subplots(
        1, len(panels), figsize=(3.8 * len(panels), 3.2), sharey=True, squeeze=False
    )
    log_y = spec.log_y if spec.log_y is not None else _KIND_LOG_Y[spec.kind]
    x_col, y_col, series_col = axes_map["x"], axes_map["y"], axes_map["series"]
    for ax, panel in zip(grid[0], panels):
        sub = frame if panel is None else frame[frame[axes_map["panel"]] == panel]
        series = _panel_values(sub, series_col) if series_col else [None]
        for value in series:
            rows = sub if value is None else sub[sub[series_col] == value]
            rows = rows.sort_values(x_col)
            label = None if value is None else f"{series_col} = {value:g}" if isinstance(
                value, float) else f"{series_col} = {value}"
            if rows[x_col].is_unique:
                ax.plot(rows[x_col], rows[y_col], marker="o", markersize=4, label=label)
            else:
                ax.scatter(rows[x_col], rows[y_col], s=18, label=label)
        if spec.log_x:
            ax.set_xscale("log")
        if log_y:
            ax.set_yscale("log")
        ax.set_xlabel(x_col)
        if panel is not None:
            ax.set_title(f"{axes_map['panel']} = {panel:g}" if isinstance(panel, float)
                         else f"{axes_map['panel']} = {panel}")
        if series_col:
            ax.legend()
    grid[0][0].set_ylabel(y_col)
    return fig


def _distribution_grid(spec: FigureSpec, frame: pd.DataFrame, axes_map: dict) -> plt.Figure:
    row_col, col_col = axes_map["row"], axes_map["col"]
    row_values = _panel_values(frame, row_col)
    col_values = _panel_values(frame, col_col)
    value_columns = [axes_map["y"]] if axes_map["y"] else list(_RATIO_COLUMNS)
    fig, grid = plt.subplots(
        len(row_values), len(col_values),
        figsize=(3.2 * len(col_values), 2.6 * len(row_values)),
        sharey=True, squeeze=False,
    )
    log_y = spec.log_y if spec.log_y is not None else _KIND_LOG_Y[spec.kind]
    for i, row_value in enumerate(row_values):
        for j, col_value in enumerate(col_values):
            ax = grid[i][j]
            sub = frame
            if row_value is not None:
                sub = sub[sub[row_col] == row_value]
            if col_value is not None:
                sub = sub[sub[col_col] == col_value]
            if sub.empty:
                ax.set_axis_off()
                continue
            melted = sub.melt(value_vars=value_columns, var_name="bound", value_name="ratio")
            sns.boxenplot(data=melted, x="bound", y="ratio", ax=ax,
                          color="#4c72b0", width=0.6)
            if log_y:
                ax.set_yscale("log")
            ax.set_xlabel("")
            ax.set_ylabel(f"{row_col} = {row_value:g}" if j == 0 and row_value is not None
                          else "")
            if i == 0 and col_value is not None:
                ax.set_title(f"{col_col} = {col_value:g}" if isinstance(col_value, float)
                             else f"{col_col} = {col_value}")
    return fig


def build_figure(spec: FigureSpec) -> plt.Figure:
    """Validate ``spec`` against the CSV and build the matplotlib figure."""
    if spec.kind not in FIGURE_KINDS:
        raise PlotsError(f"unknown figure kind {spec.kind!r}; expected one of {FIGURE_KINDS}")
    frame = _usable_rows(load_schema1(spec.csv_path), spec.csv_path)
    axes_map = _resolve_axes(spec, frame)
    with plt.rc_context(_RC):
        if spec.kind == "yule-dist":
            return _distribution_grid(spec, frame, axes_map)
        return _line_panels(spec, frame, axes_map)


def render(spec: FigureSpec) -> Path:
    """Render the figure to ``spec.output`` (.png or .svg) and return the path."""
    output = Path(spec.output)
    suffix = output.suffix.lower().lstrip(".")
    if suffix not in ("png", "svg"):
        raise PlotsError(f"unsupported output format {output.suffix!r}; use .png or .svg")
    fig = build_figure(spec)
    try:
        metadata = {"Software": "bipcover-plots"} if suffix == "png" else {"Date": None}
        with plt.rc_context(_RC):
            fig.savefig(output, format=suffix, metadata=metadata)
    finally:
        plt.close(fig)
    return output
