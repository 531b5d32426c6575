"""sliceplot: figures for slicesteer trace files (ECCDF, reward convergence)."""

__version__ = "0.1.0"

from .figures import PlotSpec, plot_convergence, plot_eccdf  # noqa: F401
