from .core import (
    ALGORITHM_COLORS,
    CSV_VERSION_LINE,
    Figure,
    Panel,
    Row,
    SchemaError,
    Series,
    build_figure,
    load_rows,
    render,
)

__all__ = [
    "ALGORITHM_COLORS",
    "CSV_VERSION_LINE",
    "Figure",
    "Panel",
    "Row",
    "SchemaError",
    "Series",
    "build_figure",
    "load_rows",
    "render",
]
