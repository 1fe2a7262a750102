"""Figure rendering for auctionsim CSV outputs."""

from .figures import (
    KIND_COLUMNS,
    KIND_FACETS,
    KINDS,
    FigureSpec,
    ReportError,
    build_figure,
    load_rows,
    render,
)

__all__ = [
    "FigureSpec",
    "KINDS",
    "KIND_COLUMNS",
    "KIND_FACETS",
    "ReportError",
    "build_figure",
    "load_rows",
    "render",
]
