"""
Run outputs: diagnostics CSV, per-curve CSVs, one JSON per report and the JSON summary
Files are written in a fixed order with fixed formatting so equal runs give equal bytes
"""

import csv
import json
import math
from dataclasses import astuple
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from harness.config import ExperimentConfig
from harness.ensemble import COLUMNS, DiagnosticsRow
from harness.scenarios import RunResult
from skdv.errors import OutputError
from skdv.utils.log import logger

DIAGNOSTICS_FILE = "diagnostics.csv"
SUMMARY_FILE = "summary.json"


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _json_safe(value: Any) -> Any:
    """Non-finite floats become null so the summary stays strict JSON"""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {str(key): _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    return value


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(value) for value in row])


def write_diagnostics(path: Path, rows: List[DiagnosticsRow]) -> None:
    _write_csv(path, COLUMNS, (astuple(row) for row in rows))


def write_curve(path: Path, curve: List[Dict[str, Any]]) -> None:
    header: List[str] = []
    for entry in curve:
        header.extend(key for key in entry if key not in header)
    _write_csv(path, header, ([entry.get(key) for key in header] for entry in curve))


def build_summary(result: RunResult, cfg: ExperimentConfig) -> Dict[str, Any]:
    return {
        "scenario": result.scenario.value,
        "master_seed": cfg.seed,
        "paths_recorded": len({row.path_id for row in result.rows}),
        "rows": len(result.rows),
        "passed": result.passed,
        "verdicts": result.verdicts,
        "summary": _json_safe(result.summary),
        "config": cfg.model_dump(mode="json"),
    }


def emit_outputs(result: RunResult, cfg: ExperimentConfig, out_dir: Optional[Path] = None) -> List[Path]:
    """
    Write every output of a run below `out_dir`

    Args:
        result: a completed run, or a failed one with partial rows
        cfg: the configuration the run used; echoed in full in the summary
        out_dir: defaults to the config's output directory

    Returns:
        The written files, diagnostics first and summary last
    """
    out_dir = Path(out_dir or cfg.output_dir or ".")
    written: List[Path] = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / DIAGNOSTICS_FILE
        write_diagnostics(path, result.rows)
        written.append(path)
        for name in sorted(result.curves):
            path = out_dir / f"curve_{name}.csv"
            write_curve(path, result.curves[name])
            written.append(path)
        for report in result.reports:
            path = out_dir / f"report_{getattr(report, 'lemma', type(report).__name__)}.json"
            path.write_text(json.dumps(_json_safe(report.model_dump(mode="json")), indent=2) + "\n", encoding="utf-8")
            written.append(path)
        path = out_dir / SUMMARY_FILE
        path.write_text(json.dumps(build_summary(result, cfg), indent=2) + "\n", encoding="utf-8")
        written.append(path)
    except OSError as exc:
        raise OutputError(f"Cannot write outputs to {out_dir}: {exc}") from exc
    logger.info(f"Wrote {len(written)} file(s) to {out_dir}")
    return written
