"""Figure rendering for gmlab experiment sweeps (consumes results.csv only)."""

from gmlab_figures.render import (
    FIGURE_KINDS,
    FigureSpec,
    SchemaError,
    layout_descriptor,
    load_spec,
    read_rows,
    render,
)

__version__ = "0.1.0"
