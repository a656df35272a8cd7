from .report import correlation_report, emit_figure_data, read_records_csv, summarize
from .sanity import SanityReport, sanity_suite
from .sweep import WITH_DS, WITHOUT_DS, SweepConfig, SweepRecord, default_grid, grid_means, run_sweep

__all__ = [
    "SanityReport", "SweepConfig", "SweepRecord", "WITHOUT_DS", "WITH_DS", "correlation_report",
    "default_grid", "emit_figure_data", "grid_means", "read_records_csv", "run_sweep",
    "sanity_suite", "summarize",
]
