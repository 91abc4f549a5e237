"""Regression test generation for machine learning notebooks.

Pipeline: analyze a notebook for tracked value properties, execute it
repeatedly under varied seeds to collect traces, synthesize tolerance-aware
assertions, and inject them back as a runnable test notebook. Mutation and
version tools grade how much the generated suite actually catches.
"""

from .catalog import ApiCatalog, ApiEntry, CatalogSchemaError, load_catalog
from .finder import AnalysisReport, TrackedProperty, find_properties
from .harness import (
    ExecutorUnavailable,
    ProtocolViolation,
    RunConfig,
    TraceSample,
    TraceSet,
    execute_runs,
)
from .instrument import InstrumentationConflict, InstrumentedNotebook, instrument
from .mutation import (
    ALL_OPERATORS,
    CODE_OPERATORS,
    DATA_OPERATORS,
    MutantSpec,
    OperatorInapplicable,
    apply_mutant,
    enumerate_mutants,
    mutate_dataframe,
    mutation_score,
    score_mutant,
)
from .notebook import (
    Cell,
    MalformedNotebook,
    Notebook,
    NotebookError,
    UnsupportedVersion,
    parse_notebook,
    read_notebook,
    serialize_notebook,
    strip_generated,
    write_notebook,
)
from .runner import RunReport, run_tests, scan_assertions
from .synthesis import (
    AssertionSpec,
    DomainError,
    NoSamples,
    chebyshev_k,
    inject,
    synthesize,
)
from .versions import (
    KillMetrics,
    TransferResult,
    evaluate_versions,
    kill_metrics,
    match_cells,
    transfer_assertions,
)

__version__ = "0.1.0"

__all__ = [
    "ApiCatalog",
    "ApiEntry",
    "CatalogSchemaError",
    "load_catalog",
    "AnalysisReport",
    "TrackedProperty",
    "find_properties",
    "ExecutorUnavailable",
    "ProtocolViolation",
    "RunConfig",
    "TraceSample",
    "TraceSet",
    "execute_runs",
    "InstrumentationConflict",
    "InstrumentedNotebook",
    "instrument",
    "ALL_OPERATORS",
    "CODE_OPERATORS",
    "DATA_OPERATORS",
    "MutantSpec",
    "OperatorInapplicable",
    "apply_mutant",
    "enumerate_mutants",
    "mutate_dataframe",
    "mutation_score",
    "score_mutant",
    "Cell",
    "MalformedNotebook",
    "Notebook",
    "NotebookError",
    "UnsupportedVersion",
    "parse_notebook",
    "read_notebook",
    "serialize_notebook",
    "strip_generated",
    "write_notebook",
    "RunReport",
    "run_tests",
    "scan_assertions",
    "AssertionSpec",
    "DomainError",
    "NoSamples",
    "chebyshev_k",
    "inject",
    "synthesize",
    "KillMetrics",
    "TransferResult",
    "evaluate_versions",
    "kill_metrics",
    "match_cells",
    "transfer_assertions",
    "__version__",
]
