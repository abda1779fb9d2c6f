"""Static figure rendering for sco-lab experiment artifacts."""

__version__ = "0.1.0"

from .render import FigureSpec, RenderReport, render  # noqa: F401
