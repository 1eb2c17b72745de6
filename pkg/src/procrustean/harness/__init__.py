"""Monte-Carlo experiments, reports and the command line interface."""

from .config import ExperimentSpec
from .report import plot_medians, report, summarize, write_summary
from .runner import CSV_HEADER, ExperimentResult, ResultRow, read_csv, run_cell, run_experiment, write_csv
