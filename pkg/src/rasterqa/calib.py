"""Human-variability statistics and acceptable-range construction.

Numeric questions are scored against ranges rather than point answers,
because annotators looking at the same image legitimately disagree a
little.  The range half-widths come from the median absolute deviation
(MAD) of pooled human annotations: an absolute half-width for percentage
estimates, a wider one for proximity estimates, a relative half-width for
counts (MAD normalized by the median, so bigger counts get bigger ranges),
and a relative half-width for continuous measurements.  Categorical answers
have no range; they require an exact match.

Also here: chance-corrected inter-rater agreement (Krippendorff's alpha,
interval metric, tolerant of missing cells) and the two-way random-effects
intraclass correlation for mean-of-k raters, both used to sanity-check an
annotation campaign before trusting its ranges.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import DegenerateStatisticError, DomainError

RANGE_EXACT = "exact"

GRID_MIN, GRID_MAX = 10, 320

# Question-type buckets deciding which range rule applies.
PERCENT_TYPES = frozenset({"percentage", "size"})
PROXIMITY_PCT_TYPES = frozenset({"proximity_percentage"})
COUNT_TYPES = frozenset(
    {"count", "connectivity", "building_proximity", "building_fire_risk", "building_flood_risk"}
)
CATEGORICAL_TYPES = frozenset(
    {
        "binary_comparison",
        "binary_threshold",
        "binary_presence",
        "binary_multiple",
        "binary_proximity",
        "fragmentation",
    }
)
CONTINUOUS_TYPES = frozenset(
    {
        "total_area",
        "proximity_area",
        "power_calculation",
        "complex_multi_condition",
        "complex_agriculture_water_access",
        "complex_vegetation_water_access",
        "complex_urban_fire_risk",
        "complex_urban_flood_risk",
        "complex_average",
        "complex_size_filter",
    }
)


@dataclass(frozen=True)
class CalibrationConstants:
    """Half-width parameters learned from annotation campaigns.

    Defaults are the values derived from the 500-annotation calibration set:
    +/-1.735 percentage points, +/-2.250 for proximity estimates, a relative
    0.19 for counts, and a relative 0.0225 for continuous measurements.
    """

    mad_percentage: float = 1.735
    mad_proximity: float = 2.250
    madc_count: float = 0.19
    rel_area: float = 0.0225

    def __post_init__(self):
        for name in ("mad_percentage", "mad_proximity", "madc_count", "rel_area"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")


# ---------------------------------------------------------------------------
# Robust spread statistics
# ---------------------------------------------------------------------------

def mad(values: Sequence[float]) -> float:
    """Median absolute deviation: median(|x_i - median(x)|).

    The median of an even-length list is the mean of the central pair.  MAD
    has a 50% breakdown point, so up to half the annotations can be wild
    outliers without destabilizing the spread estimate.
    """
    if len(values) == 0:
        raise DomainError("mad of an empty list is undefined")
    arr = np.asarray(values, dtype=float)
    return float(np.median(np.abs(arr - np.median(arr))))


def madc(values: Sequence[float]) -> float:
    """MAD normalized by the median, so spread scales with magnitude."""
    med = float(np.median(np.asarray(values, dtype=float)))
    if med == 0:
        raise DomainError("madc is undefined when the median is zero")
    return mad(values) / med


def majority_vote(values: Sequence[str]) -> str:
    """Most frequent category; ties broken lexicographically for determinism."""
    if not values:
        raise DomainError("majority vote of an empty list is undefined")
    counts = Counter(values)
    best = max(counts.values())
    return min(v for v, c in counts.items() if c == best)


# ---------------------------------------------------------------------------
# Acceptable ranges
# ---------------------------------------------------------------------------

def _round2(x: float) -> float:
    return round(x, 2)


def acceptable_range(
    answer: float | str,
    qtype: str,
    consts: CalibrationConstants = CalibrationConstants(),
) -> tuple[float, float] | str:
    """Range a prediction must land in to count as correct.

    Percentage answers get +/-mad_percentage, proximity percentages
    +/-mad_proximity, both rounded to 2 decimals and clamped to [0, 100].
    Counts get outward-rounded integer bounds [floor(C - C*m), ceil(C + C*m)]
    with the zero count special-cased to [0, 1].  Continuous measurements
    (hectares, megawatts, averages) get a relative +/-rel_area, rounded to
    2 decimals.  Categorical answers return the exact-match marker.  Lower
    bounds never go below zero.
    """
    if qtype in CATEGORICAL_TYPES:
        return RANGE_EXACT
    if isinstance(answer, str):
        raise DomainError(f"type {qtype!r} expects a numeric answer, got {answer!r}")
    if answer < 0:
        raise DomainError(f"negative answer {answer} has no physical range")

    if qtype in PERCENT_TYPES or qtype in PROXIMITY_PCT_TYPES:
        half = consts.mad_percentage if qtype in PERCENT_TYPES else consts.mad_proximity
        lo = _round2(max(answer - half, 0.0))
        hi = _round2(min(answer + half, 100.0))
        return (lo, hi)
    if qtype in COUNT_TYPES:
        if answer != int(answer):
            raise DomainError(f"count answer must be integral, got {answer}")
        c = int(answer)
        if c == 0:
            return (0, 1)
        lo = max(math.floor(c - c * consts.madc_count), 0)
        hi = math.ceil(c + c * consts.madc_count)
        return (lo, hi)
    if qtype in CONTINUOUS_TYPES:
        half = answer * consts.rel_area
        lo = _round2(max(answer - half, 0.0))
        hi = _round2(answer + half)
        return (lo, hi)
    raise DomainError(f"unknown question type {qtype!r}")


# ---------------------------------------------------------------------------
# Inter-rater reliability
# ---------------------------------------------------------------------------

def krippendorff_alpha(responses, metric: str = "interval") -> float:
    """Krippendorff's alpha over a question x annotator matrix.

    ``responses`` is a 2-D array-like with NaN marking missing cells.  Only
    the interval difference metric is implemented (squared differences).
    alpha = 1 - D_observed / D_expected, computed over units with at least
    two values; perfect agreement gives exactly 1.0.  A matrix without any
    variance has no expected disagreement and is reported as degenerate.
    """
    if metric != "interval":
        raise DomainError(f"only the interval metric is supported, got {metric!r}")
    arr = np.asarray(responses, dtype=float)
    if arr.ndim != 2:
        raise DomainError("responses must be a 2-D matrix")

    units = []
    for row in arr:
        vals = row[~np.isnan(row)]
        if len(vals) >= 2:
            units.append(vals)
    n = sum(len(u) for u in units)
    if n < 2:
        raise DomainError("need at least two pairable values")

    # sum_{i != j} (x_i - x_j)^2 = 2m*sum(x^2) - 2*(sum x)^2 over m values.
    d_obs = 0.0
    for u in units:
        m = len(u)
        d_obs += (2 * m * float(np.dot(u, u)) - 2 * float(u.sum()) ** 2) / (m - 1)
    d_obs /= n

    pooled = np.concatenate(units)
    d_exp = (2 * n * float(np.dot(pooled, pooled)) - 2 * float(pooled.sum()) ** 2) / (
        n * (n - 1)
    )
    if d_exp == 0:
        raise DegenerateStatisticError("no variance in pairable values; alpha undefined")
    return 1.0 - d_obs / d_exp


def icc2k(responses) -> float:
    """ICC(2,k): two-way random effects, mean of k raters, from mean squares.

    Requires a complete items x raters matrix with at least two of each.
    The estimate can exceed 1.0 when rater variance is smaller than
    residual noise; that is expected behaviour, not an error.
    """
    arr = np.asarray(responses, dtype=float)
    if arr.ndim != 2:
        raise DomainError("responses must be a 2-D matrix")
    if np.isnan(arr).any():
        raise DomainError("icc2k needs a complete matrix")
    n, k = arr.shape
    if n < 2 or k < 2:
        raise DomainError("icc2k needs at least 2 items and 2 raters")

    grand = arr.mean()
    row_means = arr.mean(axis=1)
    col_means = arr.mean(axis=0)
    ss_rows = k * float(((row_means - grand) ** 2).sum())
    ss_cols = n * float(((col_means - grand) ** 2).sum())
    ss_total = float(((arr - grand) ** 2).sum())
    ss_err = ss_total - ss_rows - ss_cols

    ms_rows = ss_rows / (n - 1)
    ms_cols = ss_cols / (k - 1)
    ms_err = ss_err / ((n - 1) * (k - 1))

    denom = ms_rows + (ms_cols - ms_err) / n
    if denom == 0 or (ms_rows == 0 and ms_cols == 0 and abs(ms_err) < 1e-15):
        raise DegenerateStatisticError("matrix has no variance; ICC undefined")
    return (ms_rows - ms_err) / denom


# ---------------------------------------------------------------------------
# Annotation records and store
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnnotationRecord:
    """One human response to one question.

    ``kind`` selects the payload: a numeric ``value`` for counts, a string
    ``value`` for categories, a grid-cell selection (``cells`` within a
    ``grid_size`` x ``grid_size`` grid) for percentage tasks, or a measured
    ``distance_m``.  Grid selections are stored raw; the percentage is
    derived at calibration time, never by the client.
    """

    question_id: str
    annotator_id: str
    kind: str  # count | category | grid | distance
    value: Optional[float | str] = None
    cells: Optional[list[tuple[int, int]]] = None
    grid_size: Optional[int] = None
    distance_m: Optional[float] = None

    def __post_init__(self):
        if not self.question_id or not self.annotator_id:
            raise DomainError("question_id and annotator_id are required")
        if self.kind == "count":
            if not isinstance(self.value, (int, float)) or not math.isfinite(self.value):
                raise DomainError("count annotation needs a finite numeric value")
        elif self.kind == "category":
            if not isinstance(self.value, str) or not self.value:
                raise DomainError("category annotation needs a nonempty label")
        elif self.kind == "grid":
            n = self.grid_size
            if n is None or not (GRID_MIN <= n <= GRID_MAX):
                raise DomainError(
                    f"grid resolution must be within [{GRID_MIN}, {GRID_MAX}], got {n}"
                )
            if self.cells is None:
                raise DomainError("grid annotation needs a cell list")
            for r, c in self.cells:
                if not (0 <= r < n and 0 <= c < n):
                    raise DomainError(f"cell ({r}, {c}) outside {n}x{n} grid")
        elif self.kind == "distance":
            if (
                self.distance_m is None
                or not math.isfinite(self.distance_m)
                or self.distance_m < 0
            ):
                raise DomainError("distance annotation needs a finite distance_m >= 0")
        else:
            raise DomainError(f"unknown annotation kind {self.kind!r}")

    def numeric_value(self) -> Optional[float]:
        """The value used for numeric calibration; None for categories."""
        if self.kind == "count":
            return float(self.value)
        if self.kind == "grid":
            n = self.grid_size
            return 100.0 * len({(r, c) for r, c in self.cells}) / (n * n)
        if self.kind == "distance":
            return float(self.distance_m)
        return None

    def to_dict(self) -> dict:
        d = {
            "question_id": self.question_id,
            "annotator_id": self.annotator_id,
            "kind": self.kind,
        }
        if self.value is not None:
            d["value"] = self.value
        if self.cells is not None:
            d["cells"] = [[int(r), int(c)] for r, c in self.cells]
        if self.grid_size is not None:
            d["grid_size"] = self.grid_size
        if self.distance_m is not None:
            d["distance_m"] = self.distance_m
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "AnnotationRecord":
        return cls(
            question_id=d["question_id"],
            annotator_id=d["annotator_id"],
            kind=d["kind"],
            value=d.get("value"),
            cells=[(int(r), int(c)) for r, c in d["cells"]] if "cells" in d else None,
            grid_size=d.get("grid_size"),
            distance_m=d.get("distance_m"),
        )


class AnnotationStore:
    """Append-only annotation log, one JSON record per line.

    A resubmission by the same (question, annotator) pair appends a new line
    flagged ``replaces: true``; reads surface the latest record per pair, so
    the full history stays on disk as the audit trail.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def append(self, record: AnnotationRecord) -> bool:
        """Store a record; returns True when it replaced an earlier one."""
        replaced = (record.question_id, record.annotator_id) in {
            (r.question_id, r.annotator_id) for r in self.load_all()
        }
        entry = record.to_dict()
        if replaced:
            entry["replaces"] = True
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
        return replaced

    def load_all(self) -> list[AnnotationRecord]:
        """Every record in append order, including superseded ones."""
        if not self.path.exists():
            return []
        records = []
        with open(self.path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(AnnotationRecord.from_dict(json.loads(line)))
        return records

    def current(self) -> list[AnnotationRecord]:
        """Latest record per (question, annotator), in first-seen order."""
        latest: dict[tuple[str, str], AnnotationRecord] = {}
        for rec in self.load_all():
            latest[(rec.question_id, rec.annotator_id)] = rec
        return list(latest.values())


def recompute_constants(
    records: Iterable[AnnotationRecord],
    question_types: Mapping[str, str],
    defaults: CalibrationConstants = CalibrationConstants(),
) -> CalibrationConstants:
    """Recompute range constants from an annotation campaign.

    Per-question MADs are averaged within each bucket; buckets without data
    keep their default constants.  Count questions with a zero median are
    skipped (their MADc is undefined).  The continuous relative half-width
    tracks the proximity MAD expressed as a fraction.
    """
    by_question: dict[str, list[float]] = {}
    for rec in records:
        v = rec.numeric_value()
        if v is not None:
            by_question.setdefault(rec.question_id, []).append(v)

    pct_mads, prox_mads, count_madcs = [], [], []
    for qid, values in by_question.items():
        qtype = question_types.get(qid)
        if qtype is None or len(values) < 2:
            continue
        if qtype in PERCENT_TYPES:
            pct_mads.append(mad(values))
        elif qtype in PROXIMITY_PCT_TYPES or qtype == "proximity_area":
            prox_mads.append(mad(values))
        elif qtype in COUNT_TYPES:
            try:
                count_madcs.append(madc(values))
            except DomainError:
                continue

    mad_percentage = float(np.mean(pct_mads)) if pct_mads else defaults.mad_percentage
    mad_proximity = float(np.mean(prox_mads)) if prox_mads else defaults.mad_proximity
    madc_count = float(np.mean(count_madcs)) if count_madcs else defaults.madc_count
    rel_area = mad_proximity / 100.0 if prox_mads else defaults.rel_area
    return CalibrationConstants(mad_percentage, mad_proximity, madc_count, rel_area)
