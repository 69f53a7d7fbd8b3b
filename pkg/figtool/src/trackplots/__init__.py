"""Figure rendering for tracking experiment CSV outputs."""

from .render import KINDS, FigureSpec, RenderError, RenderResult, render

__all__ = ["KINDS", "FigureSpec", "RenderError", "RenderResult", "render"]

__version__ = "0.1.0"
