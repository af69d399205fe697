"""Score predictions against acceptable ranges and aggregate the results.

A numeric prediction is correct when it lands inside the question's range,
bounds inclusive; a categorical prediction must match exactly after
trimming and case folding.  Predictions that never produced a value
(unparseable generations, execution errors) and questions with no prediction
at all count as incorrect rather than being dropped, so accuracy always has
the full question set as its denominator.

Range sensitivity rescales every numeric range about its stored answer by a
multiplier >= 1 and re-scores, showing how close wrong answers were; the
curve can only go up as ranges widen.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .calib import RANGE_EXACT
from .errors import DomainError
from .questions import ALL_TYPES, QuestionRecord

STATUSES = ("answered", "unparseable", "execution_error")


@dataclass(frozen=True)
class Prediction:
    question_id: str
    value: Optional[float | int | str] = None
    status: str = "answered"
    trace: Optional[str] = None

    def __post_init__(self):
        if self.status not in STATUSES:
            raise DomainError(f"unknown prediction status {self.status!r}")
        if self.status == "answered" and self.value is None:
            raise DomainError("answered predictions must carry a value")


@dataclass(frozen=True)
class Cell:
    """One accuracy cell as exact integers; accuracy derives from them."""

    correct: int = 0
    total: int = 0

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0


@dataclass(frozen=True)
class QuestionOutcome:
    question_id: str
    tier: int
    type: str
    status: str
    correct: bool


@dataclass(frozen=True)
class ResultTable:
    rows: list[QuestionOutcome]
    tiers: dict[int, Cell]
    types: dict[str, Cell]
    overall: Cell


def score_prediction(pred: Prediction, question: QuestionRecord) -> bool:
    """True when the prediction answers the question within tolerance."""
    if pred.question_id != question.id:
        raise DomainError(f"prediction {pred.question_id!r} scored against {question.id!r}")
    if pred.status != "answered":
        return False
    value = pred.value
    if question.acceptable_range == RANGE_EXACT:
        if not isinstance(value, str):
            return False  # numeric reply to a categorical question
        return value.strip().casefold() == str(question.answer).strip().casefold()
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return False  # categorical reply to a numeric question
    if not math.isfinite(float(value)):
        return False
    lo, hi = question.acceptable_range
    return lo <= float(value) <= hi


def aggregate(
    predictions: Sequence[Prediction], questions: Sequence[QuestionRecord]
) -> ResultTable:
    """Roll per-question correctness up by tier and type.

    Every prediction must match a question (orphans are an error listing
    their ids); every question appears exactly once, predicted or not.
    """
    by_id = {q.id: q for q in questions}
    orphans = sorted({p.question_id for p in predictions} - set(by_id))
    if orphans:
        raise DomainError(f"predictions reference unknown questions: {orphans}")
    pred_map = {p.question_id: p for p in predictions}

    rows = []
    for q in questions:
        pred = pred_map.get(q.id)
        if pred is None:
            rows.append(QuestionOutcome(q.id, q.tier, q.type, "missing", False))
        else:
            rows.append(
                QuestionOutcome(q.id, q.tier, q.type, pred.status, score_prediction(pred, q))
            )

    def tally(selected: list[QuestionOutcome]) -> Cell:
        return Cell(sum(r.correct for r in selected), len(selected))

    tiers = {t: tally([r for r in rows if r.tier == t]) for t in (1, 2, 3)}
    types = {t: tally([r for r in rows if r.type == t]) for t in ALL_TYPES}
    return ResultTable(rows, tiers, types, tally(rows))


# ---------------------------------------------------------------------------
# Range sensitivity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SensitivityPoint:
    multiplier: float
    accuracy: float
    delta: float  # versus the 1.0x baseline, in accuracy points


def _scaled_question(q: QuestionRecord, factor: float) -> QuestionRecord:
    if q.acceptable_range == RANGE_EXACT:
        return q
    lo, hi = q.acceptable_range
    a = float(q.answer)
    scaled = (a - factor * (a - lo), a + factor * (hi - a))
    return QuestionRecord(
        id=q.id, image=q.image, question=q.question, answer=q.answer,
        type=q.type, tier=q.tier, gsd=q.gsd, acceptable_range=scaled, source=q.source,
    )


def range_sensitivity(
    predictions: Sequence[Prediction],
    questions: Sequence[QuestionRecord],
    multipliers: Sequence[float],
) -> list[SensitivityPoint]:
    """Accuracy as numeric ranges widen about their answers.

    Categorical questions keep exact matching at every multiplier.  The
    deltas are measured against the 1.0x baseline whether or not 1.0 is in
    the multiplier grid.
    """
    if any(f < 1.0 for f in multipliers):
        raise DomainError("range multipliers must be >= 1.0")
    if list(multipliers) != sorted(multipliers):
        raise DomainError("range multipliers must be sorted ascending")

    def accuracy(factor: float) -> float:
        scaled = [_scaled_question(q, factor) for q in questions]
        return aggregate(predictions, scaled).overall.accuracy

    baseline = accuracy(1.0)
    return [
        SensitivityPoint(f, accuracy(f), accuracy(f) - baseline) for f in multipliers
    ]


# ---------------------------------------------------------------------------
# Files: predictions, reports
# ---------------------------------------------------------------------------

def save_predictions(predictions: Sequence[Prediction], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for p in predictions:
            entry = {"question_id": p.question_id, "value": p.value, "status": p.status}
            if p.trace is not None:
                entry["trace"] = p.trace
            fh.write(json.dumps(entry) + "\n")


def load_predictions(path: str | Path) -> list[Prediction]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            out.append(
                Prediction(
                    question_id=d["question_id"],
                    value=d.get("value"),
                    status=d.get("status", "answered"),
                    trace=d.get("trace"),
                )
            )
    return out


def emit_report(table: ResultTable, out_dir: str | Path) -> dict[str, Path]:
    """Write the delimited tables and a text summary; returns file paths.

    ``results.csv`` holds one row per question (the full information, from
    which the table reconstructs); ``report.csv`` the rollup cells; and
    ``summary.txt`` a short human-readable digest.  Plot data stays in the
    CSV columns; rendering is the caller's business.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "results": out_dir / "results.csv",
        "report": out_dir / "report.csv",
        "summary": out_dir / "summary.txt",
    }

    with open(paths["results"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["question_id", "tier", "type", "status", "correct"])
        for r in table.rows:
            w.writerow([r.question_id, r.tier, r.type, r.status, int(r.correct)])

    with open(paths["report"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scope", "key", "correct", "total", "accuracy"])
        w.writerow(["overall", "", table.overall.correct, table.overall.total,
                    f"{table.overall.accuracy:.6f}"])
        for t in sorted(table.tiers):
            cell = table.tiers[t]
            w.writerow(["tier", t, cell.correct, cell.total, f"{cell.accuracy:.6f}"])
        for name in ALL_TYPES:
            cell = table.types[name]
            w.writerow(["type", name, cell.correct, cell.total, f"{cell.accuracy:.6f}"])

    lines = [
        f"questions: {table.overall.total}",
        f"correct:   {table.overall.correct}",
        f"accuracy:  {100 * table.overall.accuracy:.2f}%",
        "",
    ]
    for t in sorted(table.tiers):
        cell = table.tiers[t]
        lines.append(f"tier {t}: {cell.correct}/{cell.total} ({100 * cell.accuracy:.2f}%)")
    lines.append("")
    for name in ALL_TYPES:
        cell = table.types[name]
        lines.append(f"{name}: {cell.correct}/{cell.total} ({100 * cell.accuracy:.2f}%)")
    paths["summary"].write_text("\n".join(lines) + "\n")
    return paths


def load_report(out_dir: str | Path) -> ResultTable:
    """Rebuild a ResultTable from an emitted report directory."""
    rows = []
    with open(Path(out_dir) / "results.csv", newline="") as fh:
        for entry in csv.DictReader(fh):
            rows.append(
                QuestionOutcome(
                    question_id=entry["question_id"],
                    tier=int(entry["tier"]),
                    type=entry["type"],
                    status=entry["status"],
                    correct=bool(int(entry["correct"])),
                )
            )

    def tally(selected: list[QuestionOutcome]) -> Cell:
        return Cell(sum(r.correct for r in selected), len(selected))

    tiers = {t: tally([r for r in rows if r.tier == t]) for t in (1, 2, 3)}
    types = {t: tally([r for r in rows if r.type == t]) for t in ALL_TYPES}
    return ResultTable(rows, tiers, types, tally(rows))


def emit_sensitivity(points: Sequence[SensitivityPoint], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["multiplier", "accuracy", "delta"])
        for p in points:
            w.writerow([p.multiplier, f"{p.accuracy:.6f}", f"{p.delta:.6f}"])
