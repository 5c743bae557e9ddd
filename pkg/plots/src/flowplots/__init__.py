"""flowplots: paper-style figures from vorflow output files."""

from .figures import FIGURE_KINDS, FigureSpec, MissingInput, SchemaMismatch, render

__all__ = ["FIGURE_KINDS", "FigureSpec", "MissingInput", "SchemaMismatch", "render"]

__version__ = "0.1.0"
