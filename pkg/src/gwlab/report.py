from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Literal

OutputFormat = Literal["csv", "json"]

CSV_COLUMNS = ["study", "N", "statistic", "mean", "stderr", "p50", "p90", "p99", "envelope", "pass"]
_FLOAT_FIELDS = ("mean", "stderr", "p50", "p90", "p99", "envelope")


@dataclass(frozen=True)
class Record:
    study: str
    n: int
    statistic: str
    mean: float
    stderr: float
    p50: float
    p90: float
    p99: float
    envelope: float
    passed: bool
    failed: bool = False
    error: str = ""


@dataclass(frozen=True)
class Provenance:
    config_hash: str
    seed: int
    code_version: str


@dataclass(frozen=True)
class RunResult:
    study: str
    records: tuple[Record, ...] = field(default_factory=tuple)
    provenance: Provenance | None = None

    @property
    def all_passed(self) -> bool:
        return all(record.passed for record in self.records)

    @property
    def any_failed(self) -> bool:
        return any(record.failed for record in self.records)


def format_number(value: float) -> str:
    """Render a float with 17 significant digits."""
    return f"{value:.17g}"


def _csv_row(record: Record) -> dict[str, str]:
    row = {
        "study": record.study,
        "N": str(record.n),
        "statistic": record.statistic,
        "pass": "true" if record.passed else "false",
    }
    for name in _FLOAT_FIELDS:
        row[name] = format_number(getattr(record, name))
    return row


def write_csv(result: RunResult, csv_path: Path) -> None:
    """Write records to the canonical CSV schema.

    Args:
        result: Aggregated run result.
        csv_path: Destination CSV path.
    """
    with csv_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for record in result.records:
            writer.writerow(_csv_row(record))


def _json_number(value: float) -> str:
    if math.isnan(value):
        return "null"
    if math.isinf(value):
        return '"inf"' if value > 0 else '"-inf"'
    return format_number(value)


def _json_record(record: Record) -> str:
    fields = []
    for key, value in asdict(record).items():
        token = _json_number(value) if key in _FLOAT_FIELDS else json.dumps(value, ensure_ascii=False)
        fields.append(f"{json.dumps(key)}: {token}")
    return "{" + ", ".join(fields) + "}"


def result_to_json(result: RunResult) -> str:
    """Serialize a run result to standard JSON text.

    Floats carry 17 significant digits. NaN becomes `null` and infinities
    become the strings `"inf"` and `"-inf"`, so the text never holds the
    non-standard `NaN` or `Infinity` tokens.

    Args:
        result: Aggregated run result.

    Returns:
        Indented JSON document with one record per line.
    """
    provenance = json.dumps(asdict(result.provenance), ensure_ascii=False) if result.provenance else "null"
    records = ",\n".join(f"    {_json_record(record)}" for record in result.records)
    body = f"[\n{records}\n  ]" if records else "[]"
    return "\n".join(
        [
            "{",
            f'  "study": {json.dumps(result.study, ensure_ascii=False)},',
            f'  "provenance": {provenance},',
            f'  "records": {body}',
            "}",
        ]
    )


def write_json(result: RunResult, json_path: Path) -> None:
    """Write records and provenance as JSON ending with a newline."""
    json_path.write_text(result_to_json(result) + "\n", encoding="utf-8")


def emit(result: RunResult, output_format: OutputFormat, path: Path) -> None:
    """Persist a run result.

    Args:
        result: Aggregated run result.
        output_format: `csv` or `json`.
        path: Destination file; parent directories are created.

    Raises:
        ValueError: If the format is unknown.
        OSError: If the file cannot be written, with the path in the message.
    """
    if output_format not in ("csv", "json"):
        raise ValueError(f"Unknown output format {output_format!r}; expected csv or json.")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if output_format == "csv":
            write_csv(result, path)
        else:
            write_json(result, path)
    except OSError as exc:
        raise OSError(f"Could not write results to {path}: {exc}") from exc


def _float_value(raw: Any, key: str, where: str) -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float, str)):
        raise ValueError(f"Expected numeric '{key}' in {where}.")
    try:
        return float(raw)
    except ValueError as exc:
        raise ValueError(f"Expected numeric '{key}' in {where}, got {raw!r}.") from exc


def _record_from_json(raw: Any, index: int, json_path: Path) -> Record:
    where = f"record #{index} in {json_path}"
    if not isinstance(raw, dict):
        raise ValueError(f"Expected {where} to be an object.")
    study, statistic, n = raw.get("study"), raw.get("statistic"), raw.get("n")
    if not isinstance(study, str) or not isinstance(statistic, str):
        raise ValueError(f"Expected string 'study' and 'statistic' in {where}.")
    if isinstance(n, bool) or not isinstance(n, int):
        raise ValueError(f"Expected integer 'n' in {where}.")
    missing = [name for name in _FLOAT_FIELDS if name not in raw]
    if missing:
        raise ValueError(f"Missing {', '.join(missing)} in {where}.")
    floats = {
        name: float("nan") if raw[name] is None else _float_value(raw[name], name, where) for name in _FLOAT_FIELDS
    }
    return Record(
        study=study,
        n=n,
        statistic=statistic,
        passed=bool(raw.get("passed", False)),
        failed=bool(raw.get("failed", False)),
        error=str(raw.get("error", "")),
        **floats,
    )


def load_json(json_path: Path) -> RunResult:
    """Load a run result written by `emit(..., "json", ...)`.

    Raises:
        ValueError: If the JSON is malformed or does not match the expected shape.
    """
    try:
        raw = json.loads(json_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"Invalid JSON file: {json_path} ({exc})") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("records"), list):
        raise ValueError(f"Expected object with a 'records' array in {json_path}.")
    records = tuple(_record_from_json(item, index, json_path) for index, item in enumerate(raw["records"], start=1))
    provenance = raw.get("provenance")
    if provenance is not None:
        if not isinstance(provenance, dict):
            raise ValueError(f"Expected 'provenance' object in {json_path}.")
        provenance = Provenance(
            config_hash=str(provenance.get("config_hash", "")),
            seed=int(provenance.get("seed", 0)),
            code_version=str(provenance.get("code_version", "")),
        )
    return RunResult(study=str(raw.get("study", "")), records=records, provenance=provenance)


def load_csv(csv_path: Path) -> RunResult:
    """Read records back from the canonical CSV schema; provenance is not stored there."""
    with csv_path.open("r", encoding="utf-8", newline="") as handle:
        rows = list(csv.DictReader(handle))
    records = []
    for index, row in enumerate(rows, start=1):
        where = f"row #{index} in {csv_path}"
        try:
            n = int(row.get("N", ""))
        except ValueError as exc:
            raise ValueError(f"Expected integer 'N' in {where}.") from exc
        floats = {name: _float_value(row.get(name), name, where) for name in _FLOAT_FIELDS}
        records.append(
            Record(
                study=row.get("study", ""),
                n=n,
                statistic=row.get("statistic", ""),
                passed=row.get("pass", "").strip().lower() == "true",
                **floats,
            )
        )
    study = records[0].study if records else ""
    return RunResult(study=study, records=tuple(records))


def load_results(path: Path) -> RunResult:
    """Load results from `.json` or CSV depending on the file suffix."""
    if not path.exists():
        raise ValueError(f"Results file does not exist: {path}")
    if path.suffix.lower() == ".json":
        return load_json(path)
    return load_csv(path)
