"""Figure rendering for exported probe and B-H CSV files."""

from .plotting import PlotJob, build_bh_figure, build_series_figure, plot_bh, plot_timeseries

__version__ = "0.1.0"
