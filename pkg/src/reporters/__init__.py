"""Result file writers."""

from src.reporters.report_generator import ReportGenerator, metrics_text, summary_table_rows

__all__ = ["ReportGenerator", "metrics_text", "summary_table_rows"]
