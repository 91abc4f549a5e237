"""Turn collected traces into assertion statements.

Numeric expectations get a Chebyshev tolerance around the sample mean so a
bounded fraction of honest reruns can land outside. Everything structural
(shapes, column names, dtypes, layer stacks) must be identical across runs
or the assertion is dropped with a warning.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field

from .finder import AnalysisReport, TrackedProperty
from .harness import TraceSet
from .notebook import GENERATED_MARKER, Notebook, insert_statements

# assertion kinds
ALLCLOSE = "AllClose"
EQUAL = "Equal"
TRUE = "True"
FALSE = "False"
COLUMN_NAMES = "ColumnNames"
COLUMN_TYPES = "ColumnTypes"
SHAPE = "Shape"
DF_MEAN = "DfMean"
DF_VAR = "DfVar"
MODEL_LAYERS = "ModelLayers"

ASSERT_FN = {
    ALLCLOSE: "assert_allclose",
    EQUAL: "assert_equal",
    TRUE: "assert_true",
    FALSE: "assert_false",
    COLUMN_NAMES: "assert_column_names",
    COLUMN_TYPES: "assert_column_types",
    SHAPE: "assert_shape",
    DF_MEAN: "assert_df_mean",
    DF_VAR: "assert_df_var",
    MODEL_LAYERS: "assert_model_layers",
}


class DomainError(ValueError):
    pass


class NoSamples(Exception):
    def __init__(self, property_id: str):
        self.property_id = property_id
        super().__init__(f"property {property_id} has no samples from any successful run")


def chebyshev_k(confidence: float) -> float:
    """Width multiplier k with P(|X - mu| >= k*sigma) <= 1 - confidence."""
    if not 0.0 < confidence < 1.0:
        raise DomainError(f"confidence must be in (0, 1), got {confidence!r}")
    return (1.0 - confidence) ** -0.5


@dataclass(frozen=True)
class AssertionSpec:
    test_id: str
    property_id: str
    property_kind: str  # Dataset / ModelArch / ModelPerf
    kind: str  # assertion kind above
    cell_index: int
    anchor_line: int
    target: str
    expected_repr: str = ""
    atol: float | None = None

    def render(self) -> str:
        fn = ASSERT_FN[self.kind]
        args = [self.target]
        if self.kind not in (TRUE, FALSE):
            args.append(self.expected_repr)
        if self.atol is not None:
            args.append(f"atol={self.atol!r}")
        args.append(f"test_id='{self.test_id}'")
        return f"nbtest.{fn}({', '.join(args)})  {GENERATED_MARKER}"


@dataclass
class SynthesisResult:
    specs: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def manifest(self) -> dict:
        """test_id -> property kind, for kill attribution."""
        return {s.test_id: s.property_kind for s in self.specs}


def _numeric_bound(values: list, k: float):
    """(expected, atol) for a list of int/float samples."""
    if all(v == values[0] for v in values):
        return values[0], 0.0
    mean = statistics.fmean(values)
    std = statistics.stdev(values)  # ddof=1
    return mean, k * std


def _all_identical(values: list) -> bool:
    return all(v == values[0] for v in values)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


class _Synth:
    def __init__(self, report: AnalysisReport, traces: TraceSet, confidence: float):
        self.report = report
        self.traces = traces
        self.k = chebyshev_k(confidence)
        self.specs: list[AssertionSpec] = []
        self.warnings: list[str] = []
        self.counters: dict[int, int] = {}

    def warn(self, msg: str) -> None:
        self.warnings.append(msg)

    def emit(self, p: TrackedProperty, kind: str, expected_repr: str = "", atol=None):
        n = self.counters.get(p.cell_index, 0)
        self.counters[p.cell_index] = n + 1
        self.specs.append(
            AssertionSpec(
                test_id=f"{p.cell_index}_{n}",
                property_id=p.property_id,
                property_kind=p.kind,
                kind=kind,
                cell_index=p.cell_index,
                anchor_line=p.anchor_line,
                target=p.target,
                expected_repr=expected_repr,
                atol=atol,
            )
        )

    def exact(self, p: TrackedProperty, kind: str, values: list, label: str) -> None:
        if not _all_identical(values):
            self.warn(f"{p.property_id}: {label} varies across runs, dropping {kind}")
            return
        self.emit(p, kind, repr(values[0]))

    def bounded(self, p: TrackedProperty, kind: str, values: list, label: str) -> None:
        if any(v is None for v in values):
            self.warn(f"{p.property_id}: {label} unavailable in some runs, dropping {kind}")
            return
        if not all(_is_number(v) for v in values):
            self.exact(p, kind, values, label)
            return
        expected, atol = _numeric_bound(values, self.k)
        self.emit(p, kind, repr(expected), atol)

    def scalar(self, p: TrackedProperty, payloads: list[dict]) -> None:
        values = [pl.get("value") for pl in payloads]
        if all(isinstance(v, bool) for v in values) and _all_identical(values):
            self.emit(p, TRUE if values[0] else FALSE)
        elif all(_is_number(v) for v in values):
            expected, atol = _numeric_bound(values, self.k)
            self.emit(p, ALLCLOSE, repr(expected), atol)
        else:
            self.exact(p, EQUAL, values, "value")

    def table(self, p: TrackedProperty, payloads: list[dict]) -> None:
        self.exact(p, SHAPE, [tuple(pl.get("shape", [])) for pl in payloads], "shape")
        self.exact(p, COLUMN_NAMES, [pl.get("column_names") for pl in payloads], "columns")
        self.exact(p, COLUMN_TYPES, [pl.get("column_types") for pl in payloads], "dtypes")
        self.bounded(p, DF_MEAN, [pl.get("numeric_mean") for pl in payloads], "numeric mean")
        self.bounded(
            p, DF_VAR, [pl.get("numeric_variance") for pl in payloads], "numeric variance"
        )

    def array(self, p: TrackedProperty, payloads: list[dict]) -> None:
        self.exact(p, SHAPE, [tuple(pl.get("shape", [])) for pl in payloads], "shape")
        self.bounded(p, DF_MEAN, [pl.get("mean") for pl in payloads], "mean")
        self.bounded(p, DF_VAR, [pl.get("variance") for pl in payloads], "variance")

    def model(self, p: TrackedProperty, payloads: list[dict]) -> None:
        self.exact(p, MODEL_LAYERS, [pl.get("layers") for pl in payloads], "layer stack")

    def property_specs(self, p: TrackedProperty) -> None:
        samples = self.traces.samples.get(p.property_id)
        if not samples:
            raise NoSamples(p.property_id)
        usable = [s for s in samples if s.kind != "error"]
        if not usable:
            msgs = {s.payload.get("message", "") for s in samples}
            self.warn(f"{p.property_id}: probe errored in every run ({'; '.join(sorted(msgs))})")
            return
        if len(usable) < len(samples):
            self.warn(f"{p.property_id}: probe errored in {len(samples) - len(usable)} run(s)")
        variants = {s.kind for s in usable}
        if len(variants) > 1:
            self.warn(
                f"{p.property_id}: value shape changed across runs "
                f"({', '.join(sorted(variants))}), skipping"
            )
            return
        variant = usable[0].kind
        payloads = [s.payload for s in usable]
        getattr(self, variant)(p, payloads)


def synthesize(
    report: AnalysisReport, traces: TraceSet, confidence: float = 0.99
) -> SynthesisResult:
    synth = _Synth(report, traces, confidence)
    for p in report.properties:
        synth.property_specs(p)
    return SynthesisResult(specs=synth.specs, warnings=synth.warnings)


INJECT_PREAMBLE = f"import nbtest  {GENERATED_MARKER}"


def inject(nb: Notebook, specs: list[AssertionSpec]) -> Notebook:
    """Insert rendered assertions after their anchors.

    Anchors are processed bottom-up so earlier insertions never shift later
    ones; specs sharing an anchor stack newest-first under the statement.
    """
    out = nb
    for spec in sorted(specs, key=lambda s: -s.anchor_line):
        out = insert_statements(out, spec.cell_index, spec.anchor_line, [spec.render()])
    return out.prepend_code_cell(INJECT_PREAMBLE)
