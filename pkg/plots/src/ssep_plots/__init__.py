"""Read-only plotting for ssep run directories; consumes the fixed CSV/JSON
contract and never recomputes statistics."""

__version__ = "0.1.0"

from .figures import (plot_convergence, plot_corr_heatmap, plot_dual_stats,
                      plot_profiles)
from .readers import SchemaError, read_summary, read_table

__all__ = ["SchemaError", "plot_convergence", "plot_corr_heatmap",
           "plot_dual_stats", "plot_profiles", "read_summary", "read_table",
           "__version__"]
