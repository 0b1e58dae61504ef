"""Spectrum figures from obsmatch result CSVs.

Consumes only the documented CSV schema; all numbers come from the
simulation package, nothing is recomputed or rescaled here.
"""

from .plot import FigureSpec, FigureSpecError, load_rows, plot_spectrum

__version__ = "0.1.0"

__all__ = ["FigureSpec", "FigureSpecError", "load_rows", "plot_spectrum"]
