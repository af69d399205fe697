"""Multi-model logit fusion, label smoothing, and per-class mask extraction.

Several segmentation models can each score a subset of classes.  Fusion
merges them into one label map: each output class takes the maximum weighted
logit over its declared inputs, and each pixel takes the arg-max output
class (ties resolved by rule declaration order).  A mode box filter then
removes speckle from the semantic map.  Instance-style classes are expected
to bypass both fusion and filtering and go straight to component splitting,
which keeps object boundaries crisp.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, StructuralError
from .raster import BinaryMask, Shape, connected_components


@dataclass(frozen=True)
class LogitMap:
    """Per-pixel, per-class scores from one model.

    ``values`` has shape (n_classes, height, width), float32 or float64.
    """

    model_id: str
    classes: list[str]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.values.ndim != 3 or self.values.shape[0] != len(self.classes):
            raise StructuralError(
                f"logit planes {self.values.shape} do not match {len(self.classes)} classes"
            )

    @property
    def height(self) -> int:
        return int(self.values.shape[1])

    @property
    def width(self) -> int:
        return int(self.values.shape[2])

    def plane(self, class_name: str) -> np.ndarray:
        return self.values[self.classes.index(class_name)]


@dataclass(frozen=True)
class ClassMergeRule:
    """How one output class is assembled from model logits.

    ``inputs`` is a list of (model_id, class_name, weight) triples; a weight
    of zero disables that input without touching the model.  ``kind`` marks
    the class as semantic (fused + smoothed) or instance (kept crisp).
    """

    output_class: str
    inputs: list[tuple[str, str, float]]
    kind: str = "semantic"

    def __post_init__(self):
        if not self.inputs:
            raise DomainError(f"rule for {self.output_class!r} has no inputs")
        if self.kind not in ("semantic", "instance"):
            raise DomainError(f"rule kind must be semantic or instance, got {self.kind!r}")
        for _, _, w in self.inputs:
            if not np.isfinite(w) or w < 0:
                raise DomainError(f"weights must be finite and >= 0, got {w}")


@dataclass(frozen=True)
class ClassMap:
    """Per-pixel output-class indices plus the class name table."""

    classes: list[str]
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.labels.ndim != 2:
            raise StructuralError("label map must be 2-D")
        if self.labels.size and int(self.labels.max()) >= len(self.classes):
            raise StructuralError("label map indexes an undeclared class")

    @property
    def height(self) -> int:
        return int(self.labels.shape[0])

    @property
    def width(self) -> int:
        return int(self.labels.shape[1])


def fuse_logits(maps: Sequence[LogitMap], rules: Sequence[ClassMergeRule]) -> ClassMap:
    """Combine model logits into one label map by weighted max-logit fusion.

    score(output_class) = max over rule inputs of weight * logit, per pixel;
    the label is the arg-max output class, ties broken by rule order.
    Scaling all weights by one positive constant leaves the result unchanged.
    """
    if not maps or not rules:
        raise DomainError("fusion needs at least one logit map and one rule")
    by_model = {m.model_id: m for m in maps}
    shape = (maps[0].height, maps[0].width)
    for m in maps:
        if (m.height, m.width) != shape:
            raise StructuralError(
                f"logit map {m.model_id!r} is {m.width}x{m.height}, expected {shape[1]}x{shape[0]}"
            )

    scores = np.full((len(rules), *shape), -np.inf)
    for i, rule in enumerate(rules):
        for model_id, class_name, weight in rule.inputs:
            model = by_model.get(model_id)
            if model is None:
                raise DomainError(f"rule {rule.output_class!r} names unknown model {model_id!r}")
            if class_name not in model.classes:
                raise DomainError(
                    f"rule {rule.output_class!r} names unknown class "
                    f"{model_id!r}[{class_name!r}]"
                )
            np.maximum(scores[i], weight * model.plane(class_name), out=scores[i])
    labels = scores.argmax(axis=0).astype(np.int32)  # first max wins ties
    return ClassMap([r.output_class for r in rules], labels)


def mode_filter(class_map: ClassMap, k: int = 5) -> ClassMap:
    """Replace each label with the most frequent one in its k x k window.

    The window is clipped at image borders.  Ties go to the pixel's
    pre-filter label when it participates in the tie, then to the lowest
    class index.  k must be odd; k = 1 is the identity.
    """
    if k < 1 or k % 2 == 0:
        raise DomainError(f"window size must be odd and >= 1, got {k}")
    if k == 1:
        return class_map
    labels = class_map.labels
    h, w = labels.shape
    n_classes = len(class_map.classes)
    r = k // 2

    # Per-class occupancy counts via summed-area tables.
    counts = np.empty((n_classes, h, w), dtype=np.int32)
    for c in range(n_classes):
        occ = (labels == c).astype(np.int32)
        sat = occ.cumsum(axis=0).cumsum(axis=1)
        padded = np.zeros((h + 1, w + 1), dtype=np.int64)
        padded[1:, 1:] = sat
        y0 = np.clip(np.arange(h) - r, 0, h)
        y1 = np.clip(np.arange(h) + r + 1, 0, h)
        x0 = np.clip(np.arange(w) - r, 0, w)
        x1 = np.clip(np.arange(w) + r + 1, 0, w)
        counts[c] = (
            padded[np.ix_(y1, x1)]
            - padded[np.ix_(y0, x1)]
            - padded[np.ix_(y1, x0)]
            + padded[np.ix_(y0, x0)]
        )

    best = counts.max(axis=0)
    winner = counts.argmax(axis=0).astype(np.int32)  # lowest index among maxima
    own = np.take_along_axis(counts, labels[None].astype(np.int64), axis=0)[0]
    out = np.where(own == best, labels, winner)
    return ClassMap(class_map.classes, out.astype(np.int32))


def masks_from_classmap(class_map: ClassMap) -> dict[str, BinaryMask]:
    """Split a label map into pairwise-disjoint per-class masks covering it."""
    return {
        name: BinaryMask(name, class_map.labels == idx)
        for idx, name in enumerate(class_map.classes)
    }


def split_instances(
    mask: BinaryMask, min_area_pixels: int = 0, gsd: float = 1.0, connectivity: int = 8
) -> list[Shape]:
    """Split an instance-class mask into one shape per object."""
    return connected_components(mask, connectivity, min_area_pixels, gsd)


# ---------------------------------------------------------------------------
# Rule configuration files
# ---------------------------------------------------------------------------

def load_merge_rules(path: str | Path) -> list[ClassMergeRule]:
    """Read merge rules from a JSON config.

    Format::

        {"rules": [{"output_class": "urban", "kind": "semantic",
                    "inputs": [{"model": "DG", "class": "urban", "weight": 1.0}]}]}
    """
    doc = json.loads(Path(path).read_text())
    return rules_from_config(doc)


def rules_from_config(doc: dict) -> list[ClassMergeRule]:
    rules = []
    for entry in doc.get("rules", []):
        inputs = [
            (i["model"], i["class"], float(i.get("weight", 1.0)))
            for i in entry["inputs"]
        ]
        rules.append(
            ClassMergeRule(
                output_class=entry["output_class"],
                inputs=inputs,
                kind=entry.get("kind", "semantic"),
            )
        )
    return rules
