"""Figures for membrane-logistic experiment outputs."""

from .errors import EmptyInput, MissingColumn, PlotError
from .render import BASE_STYLE, KINDS, FigureJob, render

__all__ = ["BASE_STYLE", "EmptyInput", "FigureJob", "KINDS",
           "MissingColumn", "PlotError", "render"]
__version__ = "0.1.0"
