"""Figure rendering for benchmark CSVs produced by the tdeloc tool."""

from .figures import (
    FigureSpec,
    SchemaError,
    Table,
    axis_unit,
    boxplot_figure,
    boxplot_groups,
    read_table,
    render_boxplot,
    render_sweep,
    sweep_figure,
    sweep_series,
)

__version__ = "0.1.0"

__all__ = [
    "FigureSpec",
    "SchemaError",
    "Table",
    "axis_unit",
    "boxplot_figure",
    "boxplot_groups",
    "read_table",
    "render_boxplot",
    "render_sweep",
    "sweep_figure",
    "sweep_series",
    "__version__",
]
