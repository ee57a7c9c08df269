"""Figure rendering for jumpbounds sweep CSVs."""

__version__ = "0.1.0"

from .render import ColumnMismatchError, FigureSpec, preset, read_sweep_table, render_figure
