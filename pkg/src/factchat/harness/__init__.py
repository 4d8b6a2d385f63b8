"""Simulation-based evaluation: user simulator, benchmark runner,
conversationality judge, factuality bookkeeping, and report rendering."""

from .annotations import (
    AnnotationTask,
    ClaimRecord,
    FactualityLedger,
    export_annotation_tasks,
    extract_claim_records,
    import_labels,
    majority_label,
    write_tasks_csv,
)
from .judge import Judge, JudgeError, JudgeScores
from .metrics import ClaimExtractor, bleu, bleu_tokenize, mean
from .report import build_report, render_figures, write_report
from .simulator import (
    BenchmarkRun,
    SimulatedDialogue,
    SimulatorError,
    UserSimulator,
    run_benchmark,
)

__all__ = [
    "AnnotationTask",
    "BenchmarkRun",
    "ClaimExtractor",
    "ClaimRecord",
    "FactualityLedger",
    "Judge",
    "JudgeError",
    "JudgeScores",
    "SimulatedDialogue",
    "SimulatorError",
    "UserSimulator",
    "bleu",
    "bleu_tokenize",
    "build_report",
    "export_annotation_tasks",
    "extract_claim_records",
    "import_labels",
    "majority_label",
    "mean",
    "render_figures",
    "run_benchmark",
    "write_report",
    "write_tasks_csv",
]
