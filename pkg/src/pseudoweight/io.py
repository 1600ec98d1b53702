"""Delimited-file ingestion, estimation jobs, and report emission.

File format: comma-separated, UTF-8, mandatory header row, ``.`` decimal
separator, no thousands separators.  Rows with an empty value in a declared
column are skipped (their row numbers are reported through a warning);
non-numeric content in a declared column is a hard :class:`ParseError`.

Reports are emitted deterministically: same results, byte-identical file.
"""

from __future__ import annotations

import csv
import json
import warnings as _warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyFileError,
    IoError,
    MissingColumnError,
    ParseError,
    ValidationError,
)
from .estimators import Method, MethodSpec, estimate, hajek_mean
from .samples import (
    CohortSample,
    DesignInfo,
    DesignKind,
    SurveySample,
    validate_paired_samples,
)
from .simulation import SimulationReport
from .solvers import SolverConfig


def _fmt(value) -> str:
    """Shortest round-trip decimal for floats; empty string for missing."""
    if value is None:
        return ""
    if isinstance(value, float):
        if value != value:  # NaN
            return "nan"
        return repr(value)
    return str(value)


def _read_rows(path, needed):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyFileError(f"{path} has no header row")
        header = [h.strip() for h in reader.fieldnames]
        missing = [c for c in needed if c not in header]
        if missing:
            raise MissingColumnError(
                f"{path} lacks declared column(s): {', '.join(missing)}"
            )
        rows = list(reader)
    if not rows:
        raise EmptyFileError(f"{path} has a header but no data rows")
    return rows


def _parse_columns(path, rows, needed, label_cols=()):
    """Parse the declared numeric columns; rows with an empty value in any
    declared column (numeric or label) are skipped and reported."""
    parsed = {c: [] for c in needed}
    skipped = []
    for i, row in enumerate(rows, start=2):  # data starts on line 2
        cells = {c: (row.get(c) or "").strip() for c in needed}
        label_cells = {c: (row.get(c) or "").strip() for c in label_cols}
        if any(v == "" for v in cells.values()) or any(
            v == "" for v in label_cells.values()
        ):
            skipped.append(i)
            continue
        for c, raw in cells.items():
            try:
                parsed[c].append(float(raw))
            except ValueError:
                raise ParseError(
                    f"{path}: row {i}, column {c!r}: cannot parse {raw!r} as a number"
                ) from None
    if skipped:
        _warnings.warn(
            f"{path}: skipped {len(skipped)} row(s) with missing declared "
            f"fields (rows {', '.join(map(str, skipped[:10]))}"
            + (", ..." if len(skipped) > 10 else "")
            + ")",
            stacklevel=3,
        )
    if not parsed[needed[0]]:
        raise EmptyFileError(f"{path}: every data row was missing a declared field")
    return {c: np.array(v) for c, v in parsed.items()}, skipped


def ingest_delimited(
    path,
    covariates,
    outcome: str | None = None,
    weight: str | None = None,
    stratum: str | None = None,
    psu: str | None = None,
    design: DesignKind = DesignKind.POISSON,
):
    """Load a cohort or survey sample from a delimited file.

    A ``weight`` column makes the result a :class:`SurveySample`; otherwise
    a :class:`CohortSample` is built and ``outcome`` is required.  An
    intercept column of ones is prepended to the declared covariates.
    """
    covariates = list(covariates)
    needed = list(covariates)
    if outcome:
        needed.append(outcome)
    if weight:
        needed.append(weight)
    label_cols = [c for c in (stratum, psu) if c]
    rows = _read_rows(path, needed + label_cols)

    data, skipped = _parse_columns(path, rows, needed, label_cols)
    X = np.column_stack(
        [np.ones(len(data[covariates[0]]))] + [data[c] for c in covariates]
    )

    labels = {}
    if label_cols:
        keep = [i for i, row in enumerate(rows, start=2) if i not in set(skipped)]
        for c in label_cols:
            labels[c] = np.array(
                [(rows[i - 2].get(c) or "").strip() for i in keep], dtype=object
            )

    if weight:
        return SurveySample(
            X=X,
            d=data[weight],
            y=data[outcome] if outcome else None,
            design=DesignInfo(
                kind=DesignKind(design),
                stratum=labels.get(stratum) if stratum else None,
                psu=labels.get(psu) if psu else None,
            ),
        )
    if not outcome:
        raise MissingColumnError("a cohort file needs an outcome column")
    return CohortSample(y=data[outcome], X=X)


def _header(path):
    with open(path, newline="", encoding="utf-8") as fh:
        first = next(csv.reader(fh), None)
    if first is None:
        raise EmptyFileError(f"{path} has no header row")
    return [h.strip() for h in first]


@dataclass(frozen=True)
class EstimationJob:
    """Everything needed to run the generic two-file estimation path."""

    cohort_path: str
    survey_path: str
    outcome_column: str
    covariate_columns: tuple
    weight_column: str
    design_kind: DesignKind = DesignKind.POISSON
    stratum_column: str | None = None
    psu_column: str | None = None
    methods: tuple = (Method.ALP,)
    truncate_pi: bool = False
    output_path: str | None = None
    dump_weights_path: str | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)


def _weight_summary(w: np.ndarray):
    mean = float(np.mean(w))
    cv = float(np.std(w, ddof=1) / mean) if w.size > 1 and mean != 0 else 0.0
    return float(np.min(w)), float(np.max(w)), cv


def run_estimation_job(job: EstimationJob):
    """Ingest both files, run every requested method, and build report rows.

    When the survey file carries the outcome column, each row also gets the
    design-weighted reference estimate, the relative difference from it, and
    the estimated squared error against it.  Warnings raised anywhere in the
    pipeline surface in the row's ``warnings`` field.
    """
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always")
        cohort = ingest_delimited(
            job.cohort_path,
            covariates=job.covariate_columns,
            outcome=job.outcome_column,
        )
        survey_has_outcome = job.outcome_column in _header(job.survey_path)
        survey = ingest_delimited(
            job.survey_path,
            covariates=job.covariate_columns,
            outcome=job.outcome_column if survey_has_outcome else None,
            weight=job.weight_column,
            stratum=job.stratum_column,
            psu=job.psu_column,
            design=job.design_kind,
        )
    ingest_warnings = tuple(str(w.message) for w in caught)

    report = validate_paired_samples(cohort, survey)
    if not report.ok:
        raise ValidationError(report.violations)

    mu_ref = None
    if survey.y is not None:
        mu_ref = hajek_mean(survey.y, survey.d)

    rows = []
    weight_dump = {}
    for m in job.methods:
        spec = MethodSpec(method=Method(m), truncate_pi_at_one=job.truncate_pi)
        result = estimate(spec, cohort, survey, config=job.solver)
        w_min, w_max, w_cv = _weight_summary(result.weights)
        row = {
            "method": result.method,
            "estimate": result.mu_hat,
            "variance": result.var_hat,
            "ci_low": result.ci_low,
            "ci_high": result.ci_high,
        }
        if mu_ref is not None:
            row["pct_rd"] = (result.mu_hat - mu_ref) / mu_ref * 100.0
            row["mse"] = (
                (result.mu_hat - mu_ref) ** 2 + result.var_hat
                if result.var_hat is not None
                else None
            )
        row["w_min"] = w_min
        row["w_max"] = w_max
        row["w_cv"] = w_cv
        row["warnings"] = "; ".join(result.warnings + ingest_warnings)
        rows.append(row)
        weight_dump[result.method] = result.weights

    if job.dump_weights_path:
        _dump_weights(weight_dump, job.dump_weights_path)
    return rows


def _dump_weights(weight_dump, path):
    methods = list(weight_dump)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["unit"] + methods)
        n = len(next(iter(weight_dump.values())))
        for i in range(n):
            writer.writerow([i] + [_fmt(float(weight_dump[m][i])) for m in methods])


_COLUMN_ORDER = (
    "method",
    "estimate",
    "variance",
    "ci_low",
    "ci_high",
    "pct_rd",
    "mse",
    "w_min",
    "w_max",
    "w_cv",
    "warnings",
)


def emit_report(results, path, fmt: str | None = None):
    """Write estimation results as a delimited table or structured document.

    ``fmt`` is ``"csv"`` or ``"json"``; when omitted it is inferred from the
    path suffix (JSON for ``.json``, delimited otherwise).  Column order is
    fixed; optional columns appear only when present in the rows.  Refuses
    to write an empty report.
    """
    results = list(results)
    if not results:
        raise IoError("refusing to write an empty report")
    if fmt is None:
        fmt = "json" if str(path).endswith(".json") else "csv"
    columns = [c for c in _COLUMN_ORDER if any(c in r for r in results)]
    try:
        if fmt == "json":
            doc = [{c: r.get(c) for c in columns} for r in results]
            payload = json.dumps(doc, indent=2, allow_nan=True, sort_keys=False)
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(payload + "\n")
        else:
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(columns)
                for r in results:
                    writer.writerow([_fmt(r.get(c)) for c in columns])
    except OSError as exc:
        raise IoError(f"cannot write report to {path}: {exc}") from exc


_SIM_COLUMNS = (
    "scenario",
    "f_c",
    "method",
    "pct_rb",
    "v_emp",
    "vr",
    "mse",
    "cp",
    "n_replicates",
    "n_excluded",
    "mean_cohort_size",
    "warnings",
)


def emit_simulation_report(report: SimulationReport, path):
    """Write the Monte Carlo summary as a delimited table.

    One row per (scenario, participation rate, method); columns mirror the
    study's metric set.  Deterministic byte-for-byte for identical reports.
    """
    if not report.cells:
        raise IoError("refusing to write an empty simulation report")
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(_SIM_COLUMNS)
            for cell in report.cells:
                warn = "; ".join(f"{k}: {v}" for k, v in cell.warning_counts)
                writer.writerow(
                    [
                        cell.scenario,
                        _fmt(cell.f_c),
                        cell.method,
                        _fmt(cell.pct_rb),
                        _fmt(cell.v_emp),
                        _fmt(cell.vr),
                        _fmt(cell.mse),
                        _fmt(cell.cp),
                        cell.n_replicates,
                        cell.n_excluded,
                        _fmt(cell.mean_cohort_size),
                        warn,
                    ]
                )
    except OSError as exc:
        raise IoError(f"cannot write report to {path}: {exc}") from exc
