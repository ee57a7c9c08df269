"""Render bound-versus-drive figures from jumpbounds sweep CSVs.

The input schema is the fixed sweep.csv column set (sweep_value, lhs_det,
lhs_se, k12, k12_se, half_k1k2, corr_coeff, A1, A2, Q1, Q2, F12, phi1, phi2,
flags).  Parsing is header-driven, so column order is irrelevant.

Besides raw columns, three derived series reconstruct the bound inequality
in its pre-rearranged form, which is how saturation becomes visible:

    lhs_product        = lhs_det / (1 - corr_coeff^2)
    k12_plus_cov       = k12 + lhs_product * corr_coeff^2
    half_k1k2_plus_cov = half_k1k2 + 0.5 * lhs_product * corr_coeff^2

(lhs_product is Var1 Var2 / (mean1 mean2)^2; the covariance contribution is
moved back to the bound side.)
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

SWEEP_COLUMNS = (
    "sweep_value",
    "lhs_det",
    "lhs_se",
    "k12",
    "k12_se",
    "half_k1k2",
    "corr_coeff",
    "A1",
    "A2",
    "Q1",
    "Q2",
    "F12",
    "phi1",
    "phi2",
    "flags",
)

DERIVED = ("lhs_product", "k12_plus_cov", "half_k1k2_plus_cov", "lhs_product_se")

SERIES_COLORS = {
    "lhs_det": "#333333",
    "lhs_product": "#333333",
    "k12": "#d62728",
    "k12_plus_cov": "#d62728",
    "half_k1k2": "#1f77b4",
    "half_k1k2_plus_cov": "#1f77b4",
}


class ColumnMismatchError(ValueError):
    """The CSV header does not provide the columns a figure needs."""


@dataclass(frozen=True)
class FigureSpec:
    """What to plot: an x column, point/curve series, axis flags, output path."""

    input_csv: Path
    x_column: str
    point_series: tuple[tuple[str, str], ...]  # (expression, label), drawn with error bars
    curve_series: tuple[tuple[str, str], ...]  # (expression, label), drawn as lines
    output: Path
    log_x: bool = False
    log_y: bool = False
    title: str = ""
    y_label: str = "relative fluctuation product"


def read_sweep_table(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ColumnMismatchError(f"{path}: empty CSV")
        rows = list(reader)
    table: dict[str, np.ndarray] = {}
    for name in reader.fieldnames:
        if name == "flags":
            table[name] = np.array([r[name] for r in rows])
        else:
            table[name] = np.array([float(r[name]) for r in rows])
    return table


def _series_value(table: dict[str, np.ndarray], expr: str) -> np.ndarray:
    if expr in table:
        return table[expr]
    if expr not in DERIVED:
        raise ColumnMismatchError(f"unknown series {expr!r}")
    needed = {"lhs_det", "corr_coeff", "k12", "half_k1k2", "lhs_se"}
    missing = sorted(needed - set(table))
    if missing:
        raise ColumnMismatchError(f"derived series {expr!r} needs missing columns {missing}")
    corr2 = np.clip(table["corr_coeff"] ** 2, 0.0, 1.0 - 1e-12)
    product = table["lhs_det"] / (1.0 - corr2)
    if expr == "lhs_product":
        return product
    if expr == "lhs_product_se":
        return table["lhs_se"] / (1.0 - corr2)
    if expr == "k12_plus_cov":
        return table["k12"] + product * corr2
    return table["half_k1k2"] + 0.5 * product * corr2


def validate_columns(table: dict[str, np.ndarray], spec: FigureSpec) -> None:
    raw = {spec.x_column}
    for expr, _ in spec.point_series + spec.curve_series:
        if expr in DERIVED:
            raw |= {"lhs_det", "corr_coeff", "k12", "half_k1k2", "lhs_se"}
        else:
            raw.add(expr)
    missing = sorted(raw - set(table))
    if missing:
        present = sorted(table)
        raise ColumnMismatchError(f"missing columns {missing}; CSV provides {present}")


def render_figure(spec: FigureSpec) -> Path:
    """Draw the figure and write a deterministic image file."""
    table = read_sweep_table(spec.input_csv)
    validate_columns(table, spec)
    x = table[spec.x_column]

    fig, ax = plt.subplots(figsize=(5.2, 3.6), dpi=150)
    for expr, label in spec.point_series:
        y = _series_value(table, expr)
        err_name = {"lhs_product": "lhs_product_se", "lhs_det": "lhs_se"}.get(expr, expr + "_se")
        err = _series_value(table, err_name) if (err_name in table or err_name in DERIVED) else None
        ax.errorbar(
            x,
            y,
            yerr=err,
            fmt="o",
            ms=4,
            capsize=2,
            color=SERIES_COLORS.get(expr, "#333333"),
            label=label,
        )
    for expr, label in spec.curve_series:
        y = _series_value(table, expr)
        ax.plot(x, y, "-", lw=1.6, color=SERIES_COLORS.get(expr, None), label=label)

    if spec.log_x:
        ax.set_xscale("log")
    if spec.log_y:
        ax.set_yscale("log")
    ax.set_xlabel("drive strength (units of the decay rate)")
    ax.set_ylabel(spec.y_label)
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    # strip software/date metadata so identical inputs give identical bytes
    fig.savefig(out, metadata={"Software": None})
    plt.close(fig)
    return out


def preset(kind: str, csv_path, output) -> FigureSpec:
    """Built-in figure kinds: fig2, fig3a, fig3b."""
    titles = {
        "fig2": "driven qubit: jump-count fluctuations vs bounds",
        "fig3a": "three-level maser: heat-current fluctuations vs bounds",
        "fig3b": "three-level maser: jump-count fluctuations vs bounds",
    }
    if kind not in titles:
        raise ValueError(f"unknown figure kind {kind!r} (use fig2, fig3a or fig3b)")
    return FigureSpec(
        input_csv=Path(csv_path),
        x_column="sweep_value",
        point_series=(("lhs_product", "fluctuation product"),),
        curve_series=(
            ("k12_plus_cov", "k12 + covariance term"),
            ("half_k1k2_plus_cov", "half k1 k2 + covariance term"),
        ),
        output=Path(output),
        log_y=True,
        title=titles[kind],
    )
