"""Figure generation from homogmc sweep outputs (CSV + JSONL manifest)."""

__version__ = "0.1.0"

from .report import ReportError, SchemaError, SweepData, load_sweep, make_report

__all__ = ["ReportError", "SchemaError", "SweepData", "load_sweep", "make_report", "__version__"]
