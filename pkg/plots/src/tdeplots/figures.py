"""Figure builders over tdeloc run CSVs.

The CSVs carry ``#`` comment headers (schema id, units) above an
RFC-4180 body. Sweep tables turn into one error line per method over the
swept parameter; measured-data tables turn into box plots grouped by
event. Rendering is read-only and deterministic: the same input file
yields byte-identical image output.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

#: rc overrides applied around every figure, pinning output determinism
_RC = {
    "svg.hashsalt": "tdeplots",
    "figure.figsize": (7.0, 4.5),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


class SchemaError(Exception):
    """The CSV does not carry the columns or header the figure needs."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure request.

    Attributes
    ----------
    csv_path : path
        Input table.
    out_path : path
        Image file to write; the suffix picks the format (png, svg).
    x_column : str
        Swept-parameter column (line charts) or categorical grouping
        column (box plots).
    group_column : str
        Column whose distinct values become separate series or boxes.
    scale : str
        "linear" or "log" y axis.
    value_column : str or None
        Error column to plot; None picks the schema's mean TDOA column.
    error_column : str or None
        Optional spread column drawn as error bars on line charts.
    """

    csv_path: str
    out_path: str
    x_column: str
    group_column: str = "method"
    scale: str = "linear"
    value_column: str | None = None
    error_column: str | None = None

    def __post_init__(self) -> None:
        if self.scale not in ("linear", "log"):
            raise ValueError(f"scale must be linear or log, got {self.scale!r}")


class Table(NamedTuple):
    """Parsed run CSV: comment metadata plus the tabular body."""

    schema: str
    units: str
    header: list
    rows: list


def read_table(csv_path) -> Table:
    """Load a run CSV, splitting comment metadata from the body.

    Raises
    ------
    SchemaError
        If the file is missing, has no schema comment, or has no header.
    """
    path = Path(csv_path)
    if not path.is_file():
        raise SchemaError(f"input CSV not found: {path}")
    schema = None
    units = ""
    body = []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            comment = line[1:].strip()
            if comment.startswith("schema:"):
                schema = comment.split(":", 1)[1].strip()
            elif comment.startswith("units:"):
                units = comment.split(":", 1)[1].strip()
        elif line:
            body.append(line)
    if schema is None:
        raise SchemaError(f"{path} has no '# schema:' comment line")
    rows = list(csv.reader(body))
    if not rows:
        raise SchemaError(f"{path} has no header row")
    return Table(schema, units, rows[0], rows[1:])


def _column(table: Table, name: str) -> int:
    if name not in table.header:
        raise SchemaError(
            f"column {name!r} not in {table.schema} header {table.header}"
        )
    return table.header.index(name)


def _resolve_value_column(table: Table, spec: FigureSpec) -> str:
    if spec.value_column is not None:
        _column(table, spec.value_column)
        return spec.value_column
    for name in ("tdoa_mean_s", "tdoa_error_s"):
        if name in table.header:
            return name
    raise SchemaError(
        f"no value column given and neither tdoa_mean_s nor tdoa_error_s "
        f"is in {table.header}"
    )


def axis_unit(units: str, column: str) -> str:
    """Unit of a column from the header's units comment, or ''.

    The comment is a ';'-separated list of "<name> <unit words>" segments
    where the name may bundle several prefixes, e.g. "toa_/tdoa_ columns".
    """
    for segment in units.split(";"):
        tokens = segment.strip().split()
        if not tokens:
            continue
        name, rest = tokens[0], tokens[1:]
        if rest and rest[0] == "columns":
            rest = rest[1:]
        if name == column:
            return " ".join(rest)
        if name.endswith("_") or "/" in name:
            prefixes = [p if p.endswith("_") else p + "_"
                        for p in name.split("/")]
            if any(column.startswith(p) for p in prefixes):
                return " ".join(rest)
    return ""


def _label(units: str, column: str) -> str:
    unit = axis_unit(units, column)
    return f"{column} ({unit})" if unit else column


class SweepSeries(NamedTuple):
    """One line of a sweep chart."""

    label: str
    x: list
    y: list
    yerr: list


def sweep_series(table: Table, spec: FigureSpec) -> list:
    """Split a sweep table into one (x, y) series per group value."""
    value_col = _resolve_value_column(table, spec)
    ix = _column(table, spec.x_column)
    ig = _column(table, spec.group_column)
    iy = _column(table, value_col)
    ie = _column(table, spec.error_column) if spec.error_column else None
    series: dict = {}
    order = []
    for row in table.rows:
        key = row[ig]
        if key not in series:
            series[key] = SweepSeries(key, [], [], [])
            order.append(key)
        series[key].x.append(float(row[ix]))
        series[key].y.append(float(row[iy]))
        if ie is not None:
            series[key].yerr.append(float(row[ie]))
    return [series[k] for k in order]


def sweep_figure(spec: FigureSpec):
    """Line chart of the value column over the swept parameter."""
    table = read_table(spec.csv_path)
    value_col = _resolve_value_column(table, spec)
    lines = sweep_series(table, spec)
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots()
        for s in lines:
            if s.yerr:
                ax.errorbar(s.x, s.y, yerr=s.yerr, marker="o",
                            capsize=3, label=s.label)
            else:
                ax.plot(s.x, s.y, marker="o", label=s.label)
        ax.set_xlabel(_label(table.units, spec.x_column))
        ax.set_ylabel(_label(table.units, value_col))
        ax.set_yscale(spec.scale)
        ax.legend()
        fig.tight_layout()
    return fig


def _save(fig, out: Path) -> None:
    # vector backends stamp the wall clock into the file; a None entry
    # tells them to omit it, keeping repeated renders byte-identical
    metadata = None
    suffix = out.suffix.lower()
    if suffix == ".svg":
        metadata = {"Date": None}
    elif suffix in (".pdf", ".ps", ".eps"):
        metadata = {"CreationDate": None}
    # the svg writer reads svg.hashsalt at write time, not figure time,
    # so element ids only repeat across processes under the same context
    with matplotlib.rc_context(_RC):
        fig.savefig(out, metadata=metadata)


def render_sweep(spec: FigureSpec) -> Path:
    """Write the sweep line chart and return the image path."""
    fig = sweep_figure(spec)
    out = Path(spec.out_path)
    try:
        _save(fig, out)
    finally:
        plt.close(fig)
    return out


def boxplot_groups(table: Table, spec: FigureSpec) -> dict:
    """Finite value samples per (x value, group value), in file order.

    Groups that end up empty (no rows, or nothing finite) are dropped
    with a warning rather than drawn as blank boxes.
    """
    value_col = _resolve_value_column(table, spec)
    ix = _column(table, spec.x_column)
    ig = _column(table, spec.group_column)
    iy = _column(table, value_col)
    groups: dict = {}
    for row in table.rows:
        key = (row[ix], row[ig])
        groups.setdefault(key, [])
        value = float(row[iy])
        if math.isfinite(value):
            groups[key].append(value)
    kept = {}
    for key, values in groups.items():
        if values:
            kept[key] = values
        else:
            warnings.warn(
                f"omitting empty group {key} from {spec.csv_path}",
                stacklevel=2,
            )
    return kept


def boxplot_figure(spec: FigureSpec):
    """Box plot of the value column, boxes grouped along the x column.

    Boxes show the median and quartiles with whiskers; points beyond the
    whiskers are not drawn.
    """
    table = read_table(spec.csv_path)
    value_col = _resolve_value_column(table, spec)
    groups = boxplot_groups(table, spec)
    if not groups:
        raise SchemaError(f"no plottable groups in {spec.csv_path}")
    x_values = list(dict.fromkeys(k for k, _ in groups))
    members = list(dict.fromkeys(g for _, g in groups))
    width = 0.8 / len(members)
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots()
        colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
        for j, member in enumerate(members):
            data = []
            positions = []
            for i, x in enumerate(x_values):
                if (x, member) in groups:
                    data.append(groups[(x, member)])
                    positions.append(i + (j - (len(members) - 1) / 2) * width)
            if not data:
                continue
            color = colors[j % len(colors)]
            parts = ax.boxplot(
                data, positions=positions, widths=width * 0.9,
                showfliers=False, patch_artist=True, manage_ticks=False,
                medianprops={"color": "black"},
            )
            for patch in parts["boxes"]:
                patch.set_facecolor(color)
                patch.set_alpha(0.7)
            ax.plot([], [], color=color, linewidth=6, alpha=0.7,
                    label=member)
        ax.set_xticks(range(len(x_values)))
        ax.set_xticklabels(x_values)
        ax.set_xlabel(spec.x_column)
        ax.set_ylabel(_label(table.units, value_col))
        ax.set_yscale(spec.scale)
        ax.legend()
        fig.tight_layout()
    return fig


def render_boxplot(spec: FigureSpec) -> Path:
    """Write the box plot and return the image path."""
    fig = boxplot_figure(spec)
    out = Path(spec.out_path)
    try:
        _save(fig, out)
    finally:
        plt.close(fig)
    return out
