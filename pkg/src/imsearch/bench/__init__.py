from .harness import BenchmarkCase, MetricReport, load_cases, run_benchmark, validate_cases, write_reports
from .metrics import average_precision_at_k, hits_at_k, recall_at_k, recall_subset_at_k

__all__ = [
    "BenchmarkCase",
    "MetricReport",
    "average_precision_at_k",
    "hits_at_k",
    "load_cases",
    "recall_at_k",
    "recall_subset_at_k",
    "run_benchmark",
    "validate_cases",
    "write_reports",
]
