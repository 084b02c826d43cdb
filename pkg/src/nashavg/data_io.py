"""Reading evaluation data and writing reports.

File formats:

* matches: CSV with header ``player_i,player_j,outcome``; outcome 1 means
  ``player_i`` won, fractions record draws or aggregated results.
* probabilities / scores: dense CSV framed by labels; the first row holds
  column labels (its first cell is ignored) and the first column row labels.
  Blank probability cells mark unobserved pairs.
* report: a single JSON document with keys ``mode``, ``labels``, ``elo``,
  ``melo``, ``hodge``, ``nash`` and ``diagnostics``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .hodge import ScoreMatrix
from .ratings import EmpiricalProbs, PairwiseCounts

MATCH_HEADER = ("player_i", "player_j", "outcome")
SIG_DIGITS = 12
COMPLEMENT_REPAIR_TOL = 1e-3


class DataError(ValueError):
    """Malformed input; the message names the offending line or cell."""


class ConstantColumnWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MatchRecord:
    player_i: str
    player_j: str
    outcome: float

    def __post_init__(self):
        if not self.player_i or not self.player_j:
            raise ValueError("player names must be nonempty")
        if self.player_i == self.player_j:
            raise ValueError(f"self-play record for {self.player_i!r}")
        if not 0.0 <= self.outcome <= 1.0:
            raise ValueError(f"outcome {self.outcome} outside [0, 1]")


def fmt(x: float) -> str:
    return format(float(x), f".{SIG_DIGITS}g")


def _rows(text: str) -> list[tuple[int, list[str]]]:
    reader = csv.reader(io.StringIO(text))
    out = []
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        out.append((lineno, [cell.strip() for cell in row]))
    return out


def _number(cell: str, where: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"{where}: {cell!r} is not a number") from None
    if not math.isfinite(value):
        raise DataError(f"{where}: {cell!r} is not finite")
    return value


def is_match_file(text: str) -> bool:
    rows = _rows(text)
    return bool(rows) and tuple(rows[0][1]) == MATCH_HEADER


def parse_matches(text: str) -> list[MatchRecord]:
    rows = _rows(text)
    if not rows or tuple(rows[0][1]) != MATCH_HEADER:
        raise DataError("line 1: expected header 'player_i,player_j,outcome'")
    records = []
    for lineno, row in rows[1:]:
        if len(row) != 3:
            raise DataError(f"line {lineno}: expected 3 fields, got {len(row)}")
        outcome = _number(row[2], f"line {lineno}")
        try:
            records.append(MatchRecord(row[0], row[1], outcome))
        except ValueError as exc:
            raise DataError(f"line {lineno}: {exc}") from None
    return records


def matches_to_counts(records) -> PairwiseCounts:
    index: dict[str, int] = {}
    for rec in records:
        for name in (rec.player_i, rec.player_j):
            index.setdefault(name, len(index))
    wins = np.zeros((len(index), len(index)))
    for rec in records:
        i, j = index[rec.player_i], index[rec.player_j]
        wins[i, j] += rec.outcome
        wins[j, i] += 1.0 - rec.outcome
    return PairwiseCounts(wins, tuple(index))


def _framed(text: str, what: str) -> tuple[list[str], list[str], list[list[str]], list[int]]:
    rows = _rows(text)
    if len(rows) < 2:
        raise DataError(f"{what}: need a header row and at least one data row")
    header = rows[0][1]
    cols = header[1:]
    if not cols:
        raise DataError(f"line {rows[0][0]}: header has no column labels")
    labels, body, lines = [], [], []
    for lineno, row in rows[1:]:
        if len(row) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        labels.append(row[0])
        body.append(row[1:])
        lines.append(lineno)
    for axis, names in (("row", labels), ("column", cols)):
        if len(set(names)) != len(names) or any(not x for x in names):
            raise DataError(f"{what}: {axis} labels must be nonempty and distinct")
    return labels, cols, body, lines


def parse_prob_matrix(text: str) -> EmpiricalProbs:
    labels, cols, body, lines = _framed(text, "probability matrix")
    n = len(labels)
    if len(cols) != n:
        raise DataError(f"probability matrix must be square, got {n} rows and {len(cols)} columns")
    if cols != labels:
        raise DataError("column labels must match row labels in the same order")
    p = np.full((n, n), np.nan)
    for i, (row, lineno) in enumerate(zip(body, lines)):
        for j, cell in enumerate(row):
            where = f"line {lineno}, column {cols[j]!r}"
            if cell == "" or cell == "-":
                continue
            value = _number(cell, where)
            if not 0.0 <= value <= 1.0:
                raise DataError(f"{where}: probability {value} outside [0, 1]")
            if i == j and abs(value - 0.5) > 1e-12:
                raise DataError(f"{where}: diagonal entries must be blank or 0.5")
            p[i, j] = value
    mask = np.zeros((n, n), dtype=bool)
    out = np.full((n, n), 0.5)
    for i in range(n):
        for j in range(i + 1, n):
            a, b = p[i, j], p[j, i]
            if np.isnan(a) and np.isnan(b):
                continue
            if np.isnan(a) or np.isnan(b):
                raise DataError(f"pair ({labels[i]!r}, {labels[j]!r}): only one direction given")
            gap = abs(a + b - 1.0)
            if gap > COMPLEMENT_REPAIR_TOL:
                raise DataError(
                    f"pair ({labels[i]!r}, {labels[j]!r}): p_ij + p_ji = {a + b:.6g}, expected 1"
                )
            # print-precision noise is not worth averaging; it would only
            # move the last digit and break text round trips
            value = a if gap <= 1e-12 else 0.5 * (a + 1.0 - b)
            out[i, j], out[j, i] = value, 1.0 - value
            mask[i, j] = mask[j, i] = True
    return EmpiricalProbs(out, mask, tuple(labels))


def parse_score_matrix(text: str) -> ScoreMatrix:
    labels, cols, body, lines = _framed(text, "score matrix")
    s = np.empty((len(labels), len(cols)))
    for i, (row, lineno) in enumerate(zip(body, lines)):
        for j, cell in enumerate(row):
            where = f"line {lineno}, column {cols[j]!r}"
            if cell == "":
                raise DataError(f"{where}: missing score")
            s[i, j] = _number(cell, where)
    return ScoreMatrix(s, tuple(labels), tuple(cols))


def _write_framed(corner: str, rows, cols, cells) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([corner, *cols])
    for label, row in zip(rows, cells):
        writer.writerow([label, *row])
    return buf.getvalue()


def format_prob_matrix(probs: EmpiricalProbs) -> str:
    n = probs.n
    cells = [[""] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if probs.support_mask[i, j]:
                upper = fmt(probs.probs[i, j])
                cells[i][j] = upper
                cells[j][i] = fmt(1.0 - float(upper))
    return _write_framed("", probs.labels, probs.labels, cells)


def format_score_matrix(s: ScoreMatrix) -> str:
    cells = [[fmt(x) for x in row] for row in s.scores]
    return _write_framed("", s.agent_labels, s.task_labels, cells)


def standardize_scores(s: ScoreMatrix) -> ScoreMatrix:
    """Map each task column affinely onto [0, 1] (min to 0, max to 1).

    Constant columns carry no comparative signal and become zeros, with a
    ``ConstantColumnWarning``.
    """
    x = s.scores
    lo, hi = x.min(axis=0), x.max(axis=0)
    span = hi - lo
    flat = span == 0
    if flat.any():
        names = [s.task_labels[j] for j in np.flatnonzero(flat)]
        warnings.warn(f"constant task columns mapped to 0: {names}", ConstantColumnWarning, stacklevel=2)
    out = np.zeros_like(x)
    keep = ~flat
    out[:, keep] = (x[:, keep] - lo[keep]) / span[keep]
    return s.with_scores(out)


def center_scores(s: ScoreMatrix) -> ScoreMatrix:
    return s.with_scores(s.scores - s.scores.mean())


def matrix_digest(m) -> str:
    text = "\n".join(",".join(fmt(x) for x in row) for row in np.atleast_2d(np.asarray(m, dtype=float)))
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class EvaluationReport:
    """Analysis results for one dataset; sections left empty are omitted analyses.

    ``labels`` is a list of player names for ``ava`` reports and a mapping
    with ``agents`` and ``tasks`` lists for ``avt`` reports.
    """

    mode: str
    labels: Any
    elo: dict = field(default_factory=dict)
    melo: dict = field(default_factory=dict)
    hodge: dict = field(default_factory=dict)
    nash: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("ava", "avt"):
            raise ValueError(f"mode must be 'ava' or 'avt', got {self.mode!r}")
        validate_report(self)


_DISTRIBUTION_KEYS = ("distribution", "agent_distribution", "task_distribution")


def validate_report(report: EvaluationReport) -> None:
    for key in _DISTRIBUTION_KEYS:
        if key in report.nash:
            p = np.asarray(report.nash[key], dtype=float)
            if p.ndim != 1 or p.size == 0 or p.min() < -1e-9 or abs(p.sum() - 1.0) > 1e-9:
                raise ValueError(f"nash.{key} is not a probability vector")
    if report.mode == "ava":
        n = len(report.labels)
        for section in (report.elo, report.melo, report.hodge, report.nash):
            for key, value in section.items():
                if key in ("ratings", "ratings_display", "distribution", "nash_average", "uniform_average"):
                    if len(value) != n:
                        raise ValueError(f"{key} is not aligned with labels")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return x
        x = float(fmt(x))
        return 0.0 if x == 0 else x
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def serialize_report(report: EvaluationReport) -> str:
    doc = {
        "mode": report.mode,
        "labels": report.labels,
        "elo": report.elo,
        "melo": report.melo,
        "hodge": report.hodge,
        "nash": report.nash,
        "diagnostics": report.diagnostics,
    }
    return json.dumps(_plain(doc), sort_keys=True, indent=2) + "\n"


def parse_report(text: str) -> EvaluationReport:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"line {exc.lineno}: invalid report JSON ({exc.msg})") from None
    missing = {"mode", "labels", "elo", "melo", "hodge", "nash", "diagnostics"} - set(doc)
    if missing:
        raise DataError(f"report is missing keys {sorted(missing)}")
    return EvaluationReport(**{k: doc[k] for k in ("mode", "labels", "elo", "melo", "hodge", "nash", "diagnostics")})
