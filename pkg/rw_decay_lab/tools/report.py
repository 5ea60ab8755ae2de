"""Experiment results and the files they are written to"""

import csv
import logging
import math
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, Field

__all__ = [
    'Provenance',
    'Row',
    'Number',
    'Check',
    'Series',
    'ExperimentResult',
    'ReportSummary',
    'ReportFiles',
    'CSV_COLUMNS',
    'emit_report',
    'report_schema',
]

logger = logging.getLogger("rw_decay_lab.report")

# derived: a target worked out here rather than quoted (exact identities, rescaled rates, config thresholds)
Provenance = Literal["computed", "paper-reference", "fitted-constant", "derived"]
Axis = Literal["E", "t", "x", "hbar", "k", "ell"]

CSV_COLUMNS = ("run_id", "quantity", "ell", "j", "axis", "coordinate", "value", "provenance")


class Row(BaseModel):
    """One sample in the long-format table"""
    quantity: str
    value: float
    ell: Optional[int] = None
    j: Optional[int] = None
    axis: Optional[Axis] = None
    coordinate: Optional[float] = None
    provenance: Provenance = "computed"


class Number(BaseModel):
    value: float
    provenance: Provenance


class Check(BaseModel):
    """A measured value against a reference within a tolerance"""
    name: str
    measured: Number
    reference: Number
    tolerance: float
    rule: Literal["within", "at_most", "at_least", "ratio_within"]
    passed: bool

    @classmethod
    def evaluate(cls, name: str, measured: float, reference: float, tolerance: float,
                 rule: str = "within", *, reference_provenance: Provenance,
                 provenance: Provenance = "computed") -> "Check":
        """within: |m - r| <= tol; at_most: m <= r + tol; at_least: m >= r - tol;
        ratio_within: r / tol <= m <= r * tol.

        reference_provenance is required: the caller states where the target comes from.
        """
        measured, reference = float(measured), float(reference)
        if not math.isfinite(measured):
            passed = False
        elif rule == "within":
            passed = abs(measured - reference) <= tolerance
        elif rule == "at_most":
            passed = measured <= reference + tolerance
        elif rule == "at_least":
            passed = measured >= reference - tolerance
        else:
            passed = reference / tolerance <= measured <= reference * tolerance
        return cls(name=name, measured=Number(value=measured, provenance=provenance),
                   reference=Number(value=reference, provenance=reference_provenance),
                   tolerance=tolerance, rule=rule, passed=passed)


class Series(BaseModel):
    """Two-column plot data"""
    name: str
    x: list[float]
    y: list[float]


class ExperimentResult(BaseModel):
    run_id: str
    kind: str
    rows: list[Row] = []
    checks: list[Check] = []
    fits: dict[str, Number] = {}
    series: list[Series] = []
    config: dict = {}

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def add(self, quantity: str, value: float, **fields) -> None:
        self.rows.append(Row(quantity=quantity, value=float(value), **fields))

    def add_series(self, name: str, x, y) -> None:
        self.series.append(Series(name=name, x=[float(v) for v in np.ravel(x)], y=[float(v) for v in np.ravel(y)]))


class ReportSummary(BaseModel):
    """Content of <run_id>.json"""
    run_id: str
    kind: str
    passed: bool
    checks: list[Check]
    fits: dict[str, Number]
    tolerances: dict[str, float] = {}
    rows: int = Field(ge=0)
    series: list[str]
    config: dict


class ReportFiles(BaseModel):
    table: Path
    summary: Path
    series: list[Path]


def report_schema() -> dict:
    """JSON schema of <run_id>.json"""
    return ReportSummary.model_json_schema()


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_report(result: ExperimentResult, directory: Union[str, Path]) -> ReportFiles:
    """Write <run_id>.csv, <run_id>.json and one <run_id>_<series>.dat per plot series.

    Output depends only on the result, so emitting twice gives identical files.

    Raises:
        OSError: the directory cannot be created or written
    """
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
        table = out / f"{result.run_id}.csv"
        with table.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for row in result.rows:
                writer.writerow([result.run_id, row.quantity, _cell(row.ell), _cell(row.j), _cell(row.axis),
                                 _cell(row.coordinate), _cell(row.value), row.provenance])

        series_paths = []
        for series in result.series:
            path = out / f"{result.run_id}_{series.name}.dat"
            np.savetxt(path, np.column_stack([series.x, series.y]), fmt="%.17g")
            series_paths.append(path)

        summary = ReportSummary(run_id=result.run_id, kind=result.kind, passed=result.passed, checks=result.checks,
                                fits=result.fits, tolerances=result.config.get("tolerances", {}),
                                rows=len(result.rows), series=[s.name for s in result.series], config=result.config)
        summary_path = out / f"{result.run_id}.json"
        summary_path.write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise OSError(f"Failed to write report for {result.run_id} to {out}: {str(e)}") from e
    logger.info(f"wrote {len(result.rows)} rows, {len(series_paths)} series and the summary to {out}")
    return ReportFiles(table=table, summary=summary_path, series=series_paths)
