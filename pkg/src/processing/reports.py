"""CSV reports and the run manifest."""

import csv
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from ..config.defaults import CSV_FLOAT_FORMAT
from ..core.period_engine import CalibrationProfile, PeriodReport, ScanRow
from ..core.period_solver import SolveTrace
from ..core.sequences import ExtractionScore
from .diagnostics import CurvatureReport, FluxClass, RidgeSegment

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return CSV_FLOAT_FORMAT.format(float(value))
    if isinstance(value, FluxClass):
        return value.value
    return str(value)


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
            count += 1
    logger.debug("wrote %d rows to %s", count, path)
    return path


def read_csv(path: PathLike) -> List[Dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def write_periods(path: PathLike, report: PeriodReport) -> Path:
    header = ["i", "p", "q", "F", "handle_size", "half_loop_check", "closedness_bound"]
    return write_csv(path, header, report.rows())


def write_scan(path: PathLike, rows: Sequence[ScanRow]) -> Path:
    return write_csv(path, ["q", "F", "handle_size"], ((r.q, r.F, r.handle_size) for r in rows))


def write_trace(path: PathLike, trace: SolveTrace) -> Path:
    return write_csv(path, ["sweep", "i", "q", "F", "bracket_width"], trace.rows())


def write_calibration(path: PathLike, profile: CalibrationProfile) -> Path:
    return write_csv(path, ["q", "F_single", "F_with_neighbours"], profile.rows())


def write_sequence_scores(path: PathLike, scores: Sequence[ExtractionScore]) -> Path:
    return write_csv(path, ["n", "score", "total", "perfect"],
                     ((s.n, s.score, s.total, s.perfect) for s in scores))


def write_sequence(path: PathLike, indices: Sequence[int], values: Sequence[int],
                   gaps: Optional[Sequence[int]] = None) -> Path:
    if gaps is None:
        return write_csv(path, ["i", "p"], zip(indices, values))
    return write_csv(path, ["i", "p", "gap"], zip(indices, values, gaps))


def write_field_diagnostics(path: PathLike, points: np.ndarray, slope: np.ndarray,
                            curvature: CurvatureReport) -> Path:
    """Per-node (x, y, |grad v|, K); K is empty outside the probe region."""
    rows = []
    K = curvature.K.reshape(-1)
    probe = curvature.probe.reshape(-1)
    for (x, y), s, k, inside in zip(points, slope, K, probe):
        rows.append((float(x), float(y), float(s), float(k) if inside else ""))
    return write_csv(path, ["x", "y", "grad_v", "K"], rows)


def write_ridges(path: PathLike, ridges: Sequence[RidgeSegment]) -> Path:
    return write_csv(path, ["x0", "y0", "x1", "y1", "cells", "max_gradient"],
                     ((r.start[0], r.start[1], r.end[0], r.end[1], r.cells, r.max_gradient) for r in ridges))


def write_flux(path: PathLike, pattern: Sequence) -> Path:
    return write_csv(path, ["x0", "x1", "class"], pattern)


def write_summary(path: PathLike, sections: Dict[str, Dict[str, Any]]) -> Path:
    """summary.txt: one `[section]` block per stage with `key = value` lines."""
    lines: List[str] = []
    for section, values in sections.items():
        lines.append(f"[{section}]")
        for key, value in values.items():
            if isinstance(value, (list, tuple)):
                value = ", ".join(_cell(v) for v in value)
            else:
                value = _cell(value)
            lines.append(f"{key} = {value}")
        lines.append("")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines), encoding="utf-8")
    return path
