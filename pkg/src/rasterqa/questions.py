"""Benchmark generation: questions, ground truths, and the dataset format.

Questions come in 24 types across three tiers: basic quantification
(coverage, counting, sizes, presence), spatial relationships (proximity,
connectivity, fragmentation, building risk, power), and complex
multi-condition queries (size filter + buffer + area).  Every question text
states the ground-sampling distance, and every count or area question states
the minimum-area threshold it applies, so an answerer never has to guess.

Ground-truth answers are computed from the class masks with the same
geometry operations the query plans use, which is what makes the benchmark
self-consistent: executing a question's canonical plan on the ground-truth
masks reproduces the stored answer exactly.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol

from .calib import CalibrationConstants, RANGE_EXACT, acceptable_range
from .distance import find_shapes_within_distance
from .errors import DomainError, StoreError
from .plans import Plan, Step, serialize_plan
from .raster import BinaryMask, Shape, connected_components, coverage_percentage, filter_by_area

# ---------------------------------------------------------------------------
# Class metadata
# ---------------------------------------------------------------------------

# Minimum-area thresholds (hectares) below which components are treated as
# segmentation artifacts rather than objects.
DEFAULT_THRESHOLDS: dict[str, float] = {
    "roof": 0.01,
    "solar": 0.01,
    "urban": 0.1,
    "water": 0.1,
    "agric": 0.125,
    "forest": 0.125,
    "barren": 0.125,
    "grass": 0.125,
    "vegetation": 0.125,
}

# How each class reads inside question text.
CLASS_PHRASES: dict[str, str] = {
    "urban": "urban area",
    "forest": "forest area",
    "agric": "agricultural land",
    "grass": "grassland",
    "barren": "barren land",
    "water": "water bodies",
    "solar": "solar panels",
    "vegetation": "vegetation",
    "roof": "buildings",
}

# Composite classes assembled by mask union before analysis.
DERIVED_CLASSES: dict[str, tuple[str, ...]] = {
    "vegetation": ("agric", "grass", "forest"),
}

SEMANTIC_CLASSES = ("urban", "forest", "agric", "grass", "barren", "water", "solar")

SOLAR_POWER_W_PER_M2 = 200.0
FRAGMENTATION_PATCHES = 5  # more than this many patches means "fragmented"
UTILITY_SCALE_HA = 5.0


@dataclass(frozen=True)
class ClassThreshold:
    """Minimum countable area for one class, tied to its source resolution."""

    class_name: str
    min_ha: float
    gsd: Optional[float] = None

    def __post_init__(self):
        if self.min_ha <= 0:
            raise DomainError(f"threshold for {self.class_name!r} must be > 0")


# Paper-mix question counts per type; generation scales these proportions.
TYPE_MIX: dict[str, int] = {
    "count": 178,
    "binary_comparison": 172,
    "size": 166,
    "percentage": 157,
    "binary_threshold": 11,
    "binary_presence": 10,
    "binary_multiple": 10,
    "total_area": 6,
    "proximity_percentage": 123,
    "binary_proximity": 122,
    "proximity_area": 107,
    "connectivity": 104,
    "fragmentation": 98,
    "building_proximity": 35,
    "power_calculation": 14,
    "building_fire_risk": 9,
    "building_flood_risk": 4,
    "complex_multi_condition": 490,
    "complex_agriculture_water_access": 81,
    "complex_vegetation_water_access": 32,
    "complex_urban_fire_risk": 32,
    "complex_urban_flood_risk": 18,
    "complex_average": 15,
    "complex_size_filter": 6,
}

TYPE_TIERS: dict[str, int] = {
    "count": 1,
    "binary_comparison": 1,
    "size": 1,
    "percentage": 1,
    "binary_threshold": 1,
    "binary_presence": 1,
    "binary_multiple": 1,
    "total_area": 1,
    "proximity_percentage": 2,
    "binary_proximity": 2,
    "proximity_area": 2,
    "connectivity": 2,
    "fragmentation": 2,
    "building_proximity": 2,
    "power_calculation": 2,
    "building_fire_risk": 2,
    "building_flood_risk": 2,
    "complex_multi_condition": 3,
    "complex_agriculture_water_access": 3,
    "complex_vegetation_water_access": 3,
    "complex_urban_fire_risk": 3,
    "complex_urban_flood_risk": 3,
    "complex_average": 3,
    "complex_size_filter": 3,
}

ALL_TYPES = tuple(TYPE_MIX)

PROXIMITY_DISTANCES_M = (50.0, 100.0, 200.0, 500.0)
BUILDING_PROXIMITY_DISTANCES_M = (200.0, 500.0)
COMPLEX_MIN_HA = (1.0, 2.0)
CONNECTIVITY_MAX_HA = 10.0


@dataclass(frozen=True)
class QuestionRecord:
    """One benchmark entry; ``params`` keeps the generator's internals."""

    id: str
    image: str
    question: str
    answer: float | int | str
    type: str
    tier: int
    gsd: float
    acceptable_range: tuple | str
    source: str = "synthetic"
    params: dict = field(default_factory=dict, compare=False, repr=False)

    def is_categorical(self) -> bool:
        return self.acceptable_range == RANGE_EXACT


class GroundTruthCorpus(Protocol):
    """Mask source the generator reads; the backend store satisfies this."""

    def image_ids(self) -> list[str]: ...

    def gsd(self, image_id: str) -> float: ...

    def available_classes(self, image_id: str) -> list[str]: ...

    def class_mask(self, image_id: str, class_name: str) -> BinaryMask: ...


@dataclass
class SimpleCorpus:
    """In-memory corpus: {image_id: (gsd, {class: boolean array})}."""

    images: dict[str, tuple[float, dict]]

    def image_ids(self) -> list[str]:
        return sorted(self.images)

    def gsd(self, image_id: str) -> float:
        return self.images[image_id][0]

    def available_classes(self, image_id: str) -> list[str]:
        base = set(self.images[image_id][1])
        for name, parts in DERIVED_CLASSES.items():
            if any(p in base for p in parts):
                base.add(name)
        return sorted(base)

    def class_mask(self, image_id: str, class_name: str) -> BinaryMask:
        masks = self.images[image_id][1]
        if class_name in masks:
            return BinaryMask(class_name, masks[class_name])
        if class_name in DERIVED_CLASSES:
            parts = [masks[p] for p in DERIVED_CLASSES[class_name] if p in masks]
            if parts:
                union = parts[0].copy()
                for p in parts[1:]:
                    union |= p
                return BinaryMask(class_name, union)
        raise StoreError(f"image {image_id!r} has no mask for class {class_name!r}")


# ---------------------------------------------------------------------------
# Per-image analysis cache
# ---------------------------------------------------------------------------

class ImageAnalysis:
    """Lazily extracts and caches per-class components for one image."""

    def __init__(self, corpus: GroundTruthCorpus, image_id: str):
        self.corpus = corpus
        self.image_id = image_id
        self.gsd = corpus.gsd(image_id)
        self._shapes: dict[str, list[Shape]] = {}
        self._dims: Optional[tuple[int, int]] = None

    def shapes(self, class_name: str) -> list[Shape]:
        if class_name not in self._shapes:
            mask = self.corpus.class_mask(self.image_id, class_name)
            self._dims = (mask.height, mask.width)
            self._shapes[class_name] = connected_components(mask, 8, 0, self.gsd)
        return self._shapes[class_name]

    @property
    def total_pixels(self) -> int:
        if self._dims is None:
            any_class = self.corpus.available_classes(self.image_id)[0]
            self.shapes(any_class)
        h, w = self._dims
        return h * w


class GenerationSkip(Exception):
    """This (type, params, image) combination cannot produce a question."""


# ---------------------------------------------------------------------------
# Ground truth
# ---------------------------------------------------------------------------

def _clip(analysis: ImageAnalysis, targets: list[Shape], ref_class: str, d: float) -> list[Shape]:
    return find_shapes_within_distance(targets, analysis.shapes(ref_class), d, analysis.gsd)


def compute_ground_truth(qtype: str, params: dict, analysis: ImageAnalysis) -> float | int | str:
    """Answer for one question, straight from mask geometry.

    Counting questions count connected components above the stated
    threshold; proximity questions buffer the reference class and clip;
    complex questions filter by size first.  An absent feature gives a zero
    answer, not an error; only an undefined statistic (average over nothing)
    skips the question.
    """
    gsd = analysis.gsd
    total = analysis.total_pixels

    if qtype == "percentage":
        return coverage_percentage(analysis.shapes(params["class"]), total)
    if qtype == "count":
        return len(filter_by_area(analysis.shapes(params["class"]), params["min_ha"]))
    if qtype == "size":
        kept = filter_by_area(analysis.shapes(params["class"]), params["min_ha"])
        largest = max((s.area_pixels for s in kept), default=0)
        return 100.0 * largest / total
    if qtype == "total_area":
        kept = filter_by_area(analysis.shapes(params["class"]), params["min_ha"])
        return sum(s.area_hectares for s in kept)
    if qtype == "binary_comparison":
        cov_a = coverage_percentage(analysis.shapes(params["class_a"]), total)
        cov_b = coverage_percentage(analysis.shapes(params["class_b"]), total)
        return "yes" if cov_a > cov_b else "no"
    if qtype == "binary_threshold":
        kept = filter_by_area(analysis.shapes(params["class"]), params["min_ha"])
        return "yes" if sum(s.area_hectares for s in kept) > params["threshold_ha"] else "no"
    if qtype == "binary_presence":
        kept = filter_by_area(analysis.shapes(params["class"]), params["min_ha"])
        return "yes" if kept else "no"
    if qtype == "binary_multiple":
        kept = filter_by_area(analysis.shapes(params["class"]), params["min_ha"])
        return "yes" if len(kept) > 1 else "no"
    if qtype == "proximity_percentage":
        clips = _clip(analysis, analysis.shapes(params["class_a"]), params["class_b"], params["distance_m"])
        return 100.0 * sum(s.area_pixels for s in clips) / total
    if qtype == "proximity_area":
        clips = _clip(analysis, analysis.shapes(params["class_a"]), params["class_b"], params["distance_m"])
        return sum(s.area_hectares for s in clips)
    if qtype == "connectivity":
        return len(filter_by_area(analysis.shapes(params["class"]), params["min_ha"], params["max_ha"]))
    if qtype == "fragmentation":
        n = len(filter_by_area(analysis.shapes(params["class"]), params["min_ha"]))
        return "fragmented" if n > FRAGMENTATION_PATCHES else "connected"
    if qtype == "binary_proximity":
        clips = _clip(analysis, analysis.shapes(params["class_a"]), params["class_b"], params["distance_m"])
        return "yes" if clips else "no"
    if qtype in ("building_proximity", "building_fire_risk", "building_flood_risk"):
        roofs = filter_by_area(analysis.shapes("roof"), params["min_ha"])
        return len(_clip(analysis, roofs, params["ref_class"], params["distance_m"]))
    if qtype == "power_calculation":
        px = sum(s.area_pixels for s in analysis.shapes("solar"))
        return px * gsd * gsd * params["w_per_m2"] / 1e6
    if qtype in (
        "complex_multi_condition",
        "complex_agriculture_water_access",
        "complex_vegetation_water_access",
        "complex_urban_fire_risk",
        "complex_urban_flood_risk",
    ):
        kept = filter_by_area(analysis.shapes(params["class_a"]), params["min_ha"])
        clips = _clip(analysis, kept, params["class_b"], params["distance_m"])
        return sum(s.area_hectares for s in clips)
    if qtype == "complex_average":
        kept = filter_by_area(analysis.shapes(params["class"]), params["min_ha"])
        if not kept:
            raise GenerationSkip("average over zero shapes")
        return sum(s.area_hectares for s in kept) / len(kept)
    if qtype == "complex_size_filter":
        kept = filter_by_area(analysis.shapes(params["class"]), params["min_ha"])
        return sum(s.area_hectares for s in kept)
    raise DomainError(f"unknown question type {qtype!r}")


# ---------------------------------------------------------------------------
# Question text
# ---------------------------------------------------------------------------

def _num(x: float) -> str:
    return str(int(x)) if float(x) == int(x) else repr(float(x))


def _unit_noun(class_name: str) -> str:
    return "installations" if class_name == "solar" else "patches"


def render_question(qtype: str, params: dict, gsd: float) -> str:
    """Question text for one record; every template states the GSD."""
    suffix = f" (GSD: {gsd}m)"
    p = {k: CLASS_PHRASES.get(v, v) if isinstance(v, str) else v for k, v in params.items()}

    if qtype == "percentage":
        return f"What percentage of the image is covered by {p['class']}?{suffix}"
    if qtype == "count":
        return (
            f"How many separate {p['class']} regions are there? When counting, "
            f"ignore patches smaller than {_num(params['min_ha'])} hectares.{suffix}"
        )
    if qtype == "size":
        return (
            f"What percentage of the image is covered by the largest {p['class']} region "
            f"(among regions larger than {_num(params['min_ha'])} hectares)?{suffix}"
        )
    if qtype == "total_area":
        noun = _unit_noun(params["class"])
        phrase = "solar panel" if params["class"] == "solar" else p["class"]
        return (
            f"What is the total {phrase} area in hectares (excluding {noun} "
            f"smaller than {_num(params['min_ha'])} hectares)?{suffix}"
        )
    if qtype == "binary_comparison":
        return f"Is there more {p['class_a']} than {p['class_b']} in this image?{suffix}"
    if qtype == "binary_threshold":
        t = params["threshold_ha"]
        unit = "hectare" if t == 1 else "hectares"
        noun = _unit_noun(params["class"])
        return (
            f"Is there more than {_num(t)} {unit} of {p['class']} (excluding {noun} "
            f"smaller than {_num(params['min_ha'])} hectares)?{suffix}"
        )
    if qtype == "binary_presence":
        return (
            f"Are there any {p['class']} larger than {_num(params['min_ha'])} "
            f"hectares in this image?{suffix}"
        )
    if qtype == "binary_multiple":
        noun = "solar installations" if params["class"] == "solar" else f"{p['class']} patches"
        return (
            f"Are there multiple separate {noun} larger than "
            f"{_num(params['min_ha'])} hectares?{suffix}"
        )
    if qtype == "proximity_percentage":
        return (
            f"What percentage of the image is {p['class_a']} within "
            f"{_num(params['distance_m'])}m of {p['class_b']}?{suffix}"
        )
    if qtype == "proximity_area":
        return (
            f"What is the total {p['class_a']} area (in hectares) within "
            f"{_num(params['distance_m'])}m of {p['class_b']}?{suffix}"
        )
    if qtype == "connectivity":
        return (
            f"How many separate {p['class']} patches between {_num(params['min_ha'])} "
            f"and {_num(params['max_ha'])} hectares are there?{suffix}"
        )
    if qtype == "fragmentation":
        return (
            f"Is the {p['class']} connected or fragmented (more than "
            f"{FRAGMENTATION_PATCHES} separate patches larger than "
            f"{_num(params['min_ha'])} hectares)?{suffix}"
        )
    if qtype == "binary_proximity":
        return (
            f"Is there any {p['class_a']} within {_num(params['distance_m'])}m "
            f"of {p['class_b']}?{suffix}"
        )
    if qtype == "building_proximity":
        return (
            f"How many buildings (larger than {_num(params['min_ha'])} hectares) are "
            f"within {_num(params['distance_m'])}m of {p['ref_class']}?{suffix}"
        )
    if qtype == "building_flood_risk":
        return (
            f"How many buildings (larger than {_num(params['min_ha'])} hectares) are located "
            f"within {_num(params['distance_m'])}m of water bodies (flood risk assessment)?{suffix}"
        )
    if qtype == "building_fire_risk":
        return (
            f"How many buildings (larger than {_num(params['min_ha'])} hectares) are located "
            f"within {_num(params['distance_m'])}m of forest area (fire risk assessment)?{suffix}"
        )
    if qtype == "power_calculation":
        return (
            f"Calculate the solar potential MW output assuming "
            f"{_num(params['w_per_m2'])}W/m² efficiency.{suffix}"
        )
    if qtype in ("complex_multi_condition", "complex_agriculture_water_access",
                 "complex_vegetation_water_access"):
        return (
            f"Find {p['class_a']} patches larger than {_num(params['min_ha'])} hectares, "
            f"then calculate how much of their area (in hectares) falls within "
            f"{_num(params['distance_m'])}m of {p['class_b']}{suffix}"
        )
    if qtype == "complex_urban_fire_risk":
        return (
            f"Find urban patches larger than {_num(params['min_ha'])} hectare, "
            f"then calculate how much of their area (in hectares) falls within "
            f"{_num(params['distance_m'])}m of vegetation (fire risk assessment){suffix}"
        )
    if qtype == "complex_urban_flood_risk":
        return (
            f"Find urban patches larger than {_num(params['min_ha'])} hectare, "
            f"then calculate how much of their area (in hectares) falls within "
            f"{_num(params['distance_m'])}m of water bodies (flood risk assessment){suffix}"
        )
    if qtype == "complex_size_filter":
        noun = "solar installations" if params["class"] == "solar" else f"{p['class']} patches"
        return (
            f"What is the total area (in hectares) of {noun} larger than "
            f"{_num(params['min_ha'])} hectares (utility-scale)?{suffix}"
        )
    if qtype == "complex_average":
        noun = "solar installations" if params["class"] == "solar" else f"{p['class']} patches"
        excl = _unit_noun(params["class"])
        return (
            f"What is the average size of {noun} in hectares (excluding {excl} "
            f"smaller than {_num(params['min_ha'])} hectares)?{suffix}"
        )
    raise DomainError(f"unknown question type {qtype!r}")


# ---------------------------------------------------------------------------
# Canonical plans
# ---------------------------------------------------------------------------

def canonical_plan(qtype: str, params: dict) -> Plan:
    """The straightforward plan that answers a question of this type."""

    def seg(topics, bind="seg"):
        return Step("segment", {"topics": list(topics)}, bind)

    def pick(cls, bind, src="seg", min_ha=None, max_ha=None):
        args = {"src": src, "class": cls}
        if min_ha is not None:
            args["min_ha"] = min_ha
        if max_ha is not None:
            args["max_ha"] = max_ha
        return Step("filter_area", args, bind)

    def agg(kind, src, bind="result", **extra):
        return Step("aggregate", {"src": src, "kind": kind, **extra}, bind)

    def classify(src, threshold, above, below, bind="verdict"):
        return Step(
            "classify",
            {"src": src, "threshold": threshold, "above_label": above, "below_label": below},
            bind,
        )

    if qtype == "percentage":
        return Plan("number", [seg([params["class"]]), agg("percent_of_image", "seg")])
    if qtype == "count":
        return Plan(
            "number",
            [seg([params["class"]]),
             pick(params["class"], "kept", min_ha=params["min_ha"]),
             agg("count", "kept")],
        )
    if qtype == "size":
        return Plan(
            "number",
            [seg([params["class"]]),
             pick(params["class"], "kept", min_ha=params["min_ha"]),
             agg("largest_percent", "kept")],
        )
    if qtype in ("total_area", "complex_size_filter"):
        return Plan(
            "number",
            [seg([params["class"]]),
             pick(params["class"], "kept", min_ha=params["min_ha"]),
             agg("sum_area_ha", "kept")],
        )
    if qtype == "binary_comparison":
        a, b = params["class_a"], params["class_b"]
        return Plan(
            "category",
            [seg([a, b]),
             pick(a, "a_shapes"), agg("percent_of_image", "a_shapes", "cov_a"),
             pick(b, "b_shapes"), agg("percent_of_image", "b_shapes", "cov_b"),
             Step("compare",
                  {"lhs": "cov_a", "rhs": "cov_b", "op": "gt",
                   "yes_label": "yes", "no_label": "no"},
                  "verdict")],
        )
    if qtype == "binary_threshold":
        return Plan(
            "category",
            [seg([params["class"]]),
             pick(params["class"], "kept", min_ha=params["min_ha"]),
             agg("sum_area_ha", "kept", "total"),
             classify("total", params["threshold_ha"], "yes", "no")],
        )
    if qtype == "binary_presence":
        return Plan(
            "category",
            [seg([params["class"]]),
             pick(params["class"], "kept", min_ha=params["min_ha"]),
             agg("count", "kept", "n"),
             classify("n", 0, "yes", "no")],
        )
    if qtype == "binary_multiple":
        return Plan(
            "category",
            [seg([params["class"]]),
             pick(params["class"], "kept", min_ha=params["min_ha"]),
             agg("count", "kept", "n"),
             classify("n", 1, "yes", "no")],
        )
    if qtype in ("proximity_percentage", "proximity_area"):
        a, b = params["class_a"], params["class_b"]
        kind = "percent_of_image" if qtype == "proximity_percentage" else "sum_area_ha"
        return Plan(
            "number",
            [seg([a, b]),
             pick(a, "targets"), pick(b, "references"),
             Step("within_distance",
                  {"targets": "targets", "references": "references",
                   "distance_m": params["distance_m"]},
                  "clipped"),
             agg(kind, "clipped")],
        )
    if qtype == "connectivity":
        return Plan(
            "number",
            [seg([params["class"]]),
             pick(params["class"], "kept", min_ha=params["min_ha"], max_ha=params["max_ha"]),
             agg("count", "kept")],
        )
    if qtype == "fragmentation":
        return Plan(
            "category",
            [seg([params["class"]]),
             pick(params["class"], "kept", min_ha=params["min_ha"]),
             agg("count", "kept", "n"),
             classify("n", FRAGMENTATION_PATCHES, "fragmented", "connected")],
        )
    if qtype == "binary_proximity":
        a, b = params["class_a"], params["class_b"]
        return Plan(
            "category",
            [seg([a, b]),
             pick(a, "targets"), pick(b, "references"),
             Step("within_distance",
                  {"targets": "targets", "references": "references",
                   "distance_m": params["distance_m"]},
                  "clipped"),
             agg("count", "clipped", "n"),
             classify("n", 0, "yes", "no")],
        )
    if qtype in ("building_proximity", "building_fire_risk", "building_flood_risk"):
        ref = params["ref_class"]
        return Plan(
            "number",
            [seg(["roof", ref]),
             pick(ref, "references"),
             pick("roof", "large_roofs", min_ha=params["min_ha"]),
             Step("within_distance",
                  {"targets": "large_roofs", "references": "references",
                   "distance_m": params["distance_m"]},
                  "clipped"),
             agg("count", "clipped")],
        )
    if qtype == "power_calculation":
        return Plan(
            "number",
            [seg(["solar"]),
             agg("power_mw", "seg", w_per_m2=params["w_per_m2"])],
        )
    if qtype in ("complex_multi_condition", "complex_agriculture_water_access",
                 "complex_vegetation_water_access", "complex_urban_fire_risk",
                 "complex_urban_flood_risk"):
        a, b = params["class_a"], params["class_b"]
        return Plan(
            "number",
            [seg([a, b]),
             pick(b, "references"),
             pick(a, "large_targets", min_ha=params["min_ha"]),
             Step("within_distance",
                  {"targets": "large_targets", "references": "references",
                   "distance_m": params["distance_m"]},
                  "clipped"),
             agg("sum_area_ha", "clipped")],
        )
    if qtype == "complex_average":
        return Plan(
            "number",
            [seg([params["class"]]),
             pick(params["class"], "kept", min_ha=params["min_ha"]),
             agg("average_ha", "kept")],
        )
    raise DomainError(f"unknown question type {qtype!r}")


def build_mock_table(records: list[QuestionRecord]) -> dict[str, str]:
    """Canned generations (question id -> plan text) for offline evaluation."""
    return {r.id: serialize_plan(canonical_plan(r.type, r.params)) for r in records}


# ---------------------------------------------------------------------------
# Candidate enumeration and generation
# ---------------------------------------------------------------------------

def _candidate_params(
    qtype: str, classes: list[str], thresholds: dict[str, float]
) -> list[dict]:
    """All parameter combinations a type admits on one image, fixed order."""
    have = set(classes)
    land = [c for c in (*SEMANTIC_CLASSES, "vegetation") if c in have]
    thr = lambda c: thresholds[c]

    if qtype in ("percentage",):
        return [{"class": c} for c in land]
    if qtype in ("count", "size", "total_area", "binary_presence", "fragmentation"):
        return [{"class": c, "min_ha": thr(c)} for c in land]
    if qtype == "binary_multiple":
        return [{"class": c, "min_ha": thr(c)} for c in land]
    if qtype == "binary_threshold":
        return [{"class": c, "min_ha": thr(c), "threshold_ha": t} for c in land for t in (1.0, 5.0)]
    if qtype == "binary_comparison":
        return [{"class_a": a, "class_b": b} for a in land for b in land if a != b]
    if qtype in ("proximity_percentage", "proximity_area", "binary_proximity"):
        return [
            {"class_a": a, "class_b": b, "distance_m": d}
            for a in land for b in land if a != b
            for d in PROXIMITY_DISTANCES_M
        ]
    if qtype == "connectivity":
        return [{"class": c, "min_ha": thr(c), "max_ha": CONNECTIVITY_MAX_HA} for c in land]
    if qtype == "building_proximity":
        if "roof" not in have:
            return []
        return [
            {"ref_class": b, "min_ha": thresholds["roof"], "distance_m": d}
            for b in land for d in BUILDING_PROXIMITY_DISTANCES_M
        ]
    if qtype == "building_fire_risk":
        if "roof" not in have or "forest" not in have:
            return []
        return [{"ref_class": "forest", "min_ha": thresholds["roof"], "distance_m": 50.0}]
    if qtype == "building_flood_risk":
        if "roof" not in have or "water" not in have:
            return []
        return [{"ref_class": "water", "min_ha": thresholds["roof"], "distance_m": 100.0}]
    if qtype == "power_calculation":
        if "solar" not in have:
            return []
        return [{"w_per_m2": SOLAR_POWER_W_PER_M2}]
    if qtype == "complex_multi_condition":
        return [
            {"class_a": a, "class_b": b, "min_ha": x, "distance_m": d}
            for a in land for b in land if a != b
            for x in COMPLEX_MIN_HA for d in (100.0, 200.0)
        ]
    if qtype == "complex_agriculture_water_access":
        if "agric" not in have or "water" not in have:
            return []
        return [{"class_a": "agric", "class_b": "water", "min_ha": 2.0, "distance_m": 200.0}]
    if qtype == "complex_vegetation_water_access":
        if "vegetation" not in have or "water" not in have:
            return []
        return [{"class_a": "vegetation", "class_b": "water", "min_ha": 2.0, "distance_m": 200.0}]
    if qtype == "complex_urban_fire_risk":
        if "urban" not in have or "vegetation" not in have:
            return []
        return [{"class_a": "urban", "class_b": "vegetation", "min_ha": 1.0, "distance_m": 50.0}]
    if qtype == "complex_urban_flood_risk":
        if "urban" not in have or "water" not in have:
            return []
        return [{"class_a": "urban", "class_b": "water", "min_ha": 1.0, "distance_m": 100.0}]
    if qtype == "complex_average":
        return [{"class": c, "min_ha": thr(c)} for c in land]
    if qtype == "complex_size_filter":
        return [{"class": c, "min_ha": UTILITY_SCALE_HA} for c in land]
    raise DomainError(f"unknown question type {qtype!r}")


def _apportion(size: int, mix: dict[str, int], min_per_type: int) -> dict[str, int]:
    """Largest-remainder apportionment of ``size`` over the type mix."""
    total = sum(mix.values())
    quotas = {t: size * n / total for t, n in mix.items()}
    counts = {t: max(int(q), min_per_type) for t, q in quotas.items()}
    # Adjust to the requested size, preferring types with large remainders.
    remainders = sorted(mix, key=lambda t: (quotas[t] - int(quotas[t])), reverse=True)
    i = 0
    while sum(counts.values()) < size:
        counts[remainders[i % len(remainders)]] += 1
        i += 1
    shrinkable = sorted(mix, key=lambda t: counts[t], reverse=True)
    while sum(counts.values()) > size:
        progressed = False
        for t in shrinkable:
            if sum(counts.values()) <= size:
                break
            if counts[t] > min_per_type:
                counts[t] -= 1
                progressed = True
        if not progressed:  # size smaller than one-per-type floor
            break
    return counts


def _round_answer(value: float | int | str, qtype: str) -> float | int | str:
    if isinstance(value, str):
        return value
    if qtype in ("count", "connectivity", "building_proximity",
                 "building_fire_risk", "building_flood_risk"):
        return int(value)
    return round(float(value), 2)


def generate_questions(
    corpus: GroundTruthCorpus,
    size: int,
    seed: int,
    thresholds: Optional[dict[str, float]] = None,
    constants: CalibrationConstants = CalibrationConstants(),
    type_mix: Optional[dict[str, int]] = None,
    min_per_type: int = 1,
    source: str = "synthetic",
    workers: int = 0,
) -> list[QuestionRecord]:
    """Generate a benchmark from ground-truth masks, reproducibly.

    The per-type mix follows the reference proportions scaled to ``size``
    (with at least ``min_per_type`` of each when the corpus allows it).
    Candidates are sampled uniformly under the seed.  Zero-valued answers
    are legitimate and kept; if sampling produced none, one is swapped in
    so absence-of-feature cases are always represented.  A question is
    only emitted when its exact (unrounded) answer lies inside its own
    acceptable range, so range validation holds end to end.

    ``workers`` > 1 extracts per-image components in parallel up front;
    sampling stays sequential, so the output is identical at any count.
    """
    thresholds = dict(DEFAULT_THRESHOLDS, **(thresholds or {}))
    mix = type_mix or TYPE_MIX
    rng = random.Random(seed)
    targets = _apportion(size, mix, min_per_type)

    analyses = {img: ImageAnalysis(corpus, img) for img in corpus.image_ids()}
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        def warm(img: str) -> None:
            for cls in corpus.available_classes(img):
                analyses[img].shapes(cls)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(warm, corpus.image_ids()))
    records: list[QuestionRecord] = []
    zero_pool: list[QuestionRecord] = []

    for qtype in ALL_TYPES:
        want = targets.get(qtype, 0)
        candidates = []
        for img in corpus.image_ids():
            for params in _candidate_params(
                qtype, corpus.available_classes(img), thresholds
            ):
                candidates.append((img, params))
        rng.shuffle(candidates)
        made = 0
        for img, params in candidates:
            if made >= want:
                break
            try:
                record = _make_record(qtype, params, analyses[img], constants, source)
            except (GenerationSkip, StoreError):
                continue
            records.append(record)
            made += 1
            if _is_zero(record):
                zero_pool.append(record)

    # Guarantee at least one zero-valued answer when the corpus admits one.
    if not zero_pool:
        replacement = _find_zero_candidate(corpus, analyses, thresholds, constants, source)
        if replacement is not None and records:
            victims = [i for i, r in enumerate(records) if r.type == replacement.type]
            records[victims[-1] if victims else -1] = replacement

    records.sort(key=lambda r: (r.tier, r.type, r.image, r.question))
    return [
        QuestionRecord(
            id=f"SQuID_{i:04d}",
            image=r.image,
            question=r.question,
            answer=r.answer,
            type=r.type,
            tier=r.tier,
            gsd=r.gsd,
            acceptable_range=r.acceptable_range,
            source=r.source,
            params=r.params,
        )
        for i, r in enumerate(records)
    ]


def _is_zero(record: QuestionRecord) -> bool:
    return not isinstance(record.answer, str) and float(record.answer) == 0.0


def _make_record(
    qtype: str,
    params: dict,
    analysis: ImageAnalysis,
    constants: CalibrationConstants,
    source: str,
) -> QuestionRecord:
    exact_value = compute_ground_truth(qtype, params, analysis)
    answer = _round_answer(exact_value, qtype)
    rng_spec = acceptable_range(answer if isinstance(answer, str) else float(answer),
                                qtype, constants)
    if rng_spec != RANGE_EXACT:
        lo, hi = rng_spec
        # Range validation: both the stored answer and the exact value a
        # faithful pipeline reproduces must score correct.
        if isinstance(exact_value, str) or not (lo <= float(exact_value) <= hi):
            raise GenerationSkip("exact value falls outside its own range")
        if not (lo <= float(answer) <= hi):
            raise GenerationSkip("rounded answer falls outside its own range")
    question = render_question(qtype, params, analysis.gsd)
    return QuestionRecord(
        id="",
        image=analysis.image_id,
        question=question,
        answer=answer,
        type=qtype,
        tier=TYPE_TIERS[qtype],
        gsd=analysis.gsd,
        acceptable_range=rng_spec,
        source=source,
        params=dict(params),
    )


def _find_zero_candidate(corpus, analyses, thresholds, constants, source):
    """Deterministically look for any question with a zero-valued answer."""
    for qtype in ("building_flood_risk", "count", "connectivity", "complex_size_filter",
                  "percentage", "total_area"):
        for img in corpus.image_ids():
            for params in _candidate_params(qtype, corpus.available_classes(img), thresholds):
                try:
                    record = _make_record(qtype, params, analyses[img], constants, source)
                except (GenerationSkip, StoreError):
                    continue
                if _is_zero(record):
                    return record
    return None


# ---------------------------------------------------------------------------
# Dataset files
# ---------------------------------------------------------------------------

DATASET_FIELDS = ("id", "image", "question", "answer", "type", "tier", "gsd", "acceptable_range")


def emit_dataset(records: list[QuestionRecord], path: str | Path) -> None:
    """Write the benchmark as a JSON array with the canonical field set."""
    entries = []
    for r in records:
        rng = r.acceptable_range
        entries.append(
            {
                "id": r.id,
                "image": r.image,
                "question": r.question,
                "answer": r.answer,
                "type": r.type,
                "tier": r.tier,
                "gsd": r.gsd,
                "acceptable_range": rng if rng == RANGE_EXACT else list(rng),
            }
        )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(entries, indent=2, ensure_ascii=False) + "\n")


def load_dataset(path: str | Path) -> list[QuestionRecord]:
    """Read a dataset file, enforcing the record invariants."""
    entries = json.loads(Path(path).read_text())
    records = []
    problems = []
    for e in entries:
        missing = [f for f in DATASET_FIELDS if f not in e]
        if missing:
            problems.append(f"{e.get('id', '?')}: missing fields {missing}")
            continue
        rng = e["acceptable_range"]
        if rng == RANGE_EXACT:
            rng_val: tuple | str = RANGE_EXACT
            if not isinstance(e["answer"], str):
                problems.append(f"{e['id']}: exact-match range with a numeric answer")
        else:
            rng_val = (rng[0], rng[1])
            if isinstance(e["answer"], str):
                problems.append(f"{e['id']}: numeric range with a categorical answer")
            elif not (rng[0] <= e["answer"] <= rng[1]):
                problems.append(f"{e['id']}: answer {e['answer']} outside range {rng}")
            if rng[0] < 0:
                problems.append(f"{e['id']}: range extends below zero")
        if e["type"] not in TYPE_TIERS:
            problems.append(f"{e['id']}: unknown type {e['type']!r}")
        elif TYPE_TIERS[e["type"]] != e["tier"]:
            problems.append(f"{e['id']}: type {e['type']!r} belongs to tier {TYPE_TIERS[e['type']]}")
        records.append(
            QuestionRecord(
                id=e["id"],
                image=e["image"],
                question=e["question"],
                answer=e["answer"],
                type=e["type"],
                tier=e["tier"],
                gsd=e["gsd"],
                acceptable_range=rng_val,
            )
        )
    if problems:
        raise DomainError("invalid dataset: " + "; ".join(problems))
    return records
