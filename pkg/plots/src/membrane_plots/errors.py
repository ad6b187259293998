"""Errors raised while reading experiment tables."""


class PlotError(Exception):
    """Base class for figure-rendering errors."""


class MissingColumn(PlotError):
    """The input CSV lacks a column required by the figure kind."""

    def __init__(self, column, path=None):
        self.column = column
        where = f" in {path}" if path else ""
        super().__init__(f"missing column {column!r}{where}")


class EmptyInput(PlotError):
    """The input CSV holds no data rows."""
