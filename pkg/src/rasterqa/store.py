"""File-backed segmentation store: the evidence behind the segment API.

The store holds precomputed per-class masks and/or per-model logit planes on
disk, described by one manifest.  It answers the same contract a neural
segmentation server would (give me shapes for these topics on this image),
which lets every consumer - query plans, benchmark generation, the HTTP
service - run fully offline against frozen evidence.

Manifest layout (manifest.json at the store root)::

    {
      "topics": ["urban", "forest", ...],
      "images": {
        "img_0001": {
          "gsd": 0.3, "width": 384, "height": 384,
          "masks":   {"agric": "img_0001/agric.png"},
          "derived": {"vegetation": ["agric", "grass", "forest"]},
          "models":  {"dg": {"file": "img_0001/dg.f32",
                              "classes": ["urban", "water"]}},
          "fusion":  {"rules": [...], "mode_filter_k": 5}
        }
      }
    }

Topic resolution order: direct mask file, then derived union, then the
fused semantic class map.  Instance-style topics come from direct masks so
object boundaries stay crisp.
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .errors import StoreError
from .fusion import fuse_logits, masks_from_classmap, mode_filter, rules_from_config
from .maskio import read_logit_planes, read_mask_png
from .raster import BinaryMask, SegmentationResult, Shape, connected_components


class UnknownImageError(StoreError):
    def __init__(self, image: str):
        super().__init__(f"unknown image {image!r}")
        self.image = image


class UnknownTopicError(StoreError):
    def __init__(self, topic: str):
        super().__init__(f"unknown topic {topic!r}")
        self.topic = topic


class BackendStore:
    """Read-only view over a store directory; doubles as the plan backend
    and as the ground-truth corpus for benchmark generation."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        manifest_path = self.root / "manifest.json"
        if not manifest_path.exists():
            raise StoreError(f"no manifest.json under {self.root}")
        self.manifest = json.loads(manifest_path.read_text())
        self._images: dict = self.manifest.get("images", {})
        self._mask_cache: dict[tuple[str, str], BinaryMask] = {}
        self._classmap_cache: dict[str, dict[str, BinaryMask]] = {}
        self._component_cache: dict[tuple[str, str, float], list[Shape]] = {}

    # -- corpus interface -------------------------------------------------

    def image_ids(self) -> list[str]:
        return sorted(self._images)

    def _entry(self, image_id: str) -> dict:
        entry = self._images.get(image_id)
        if entry is None:
            raise UnknownImageError(image_id)
        return entry

    def gsd(self, image_id: str) -> float:
        return float(self._entry(image_id)["gsd"])

    def dims(self, image_id: str) -> tuple[int, int]:
        entry = self._entry(image_id)
        return int(entry["height"]), int(entry["width"])

    @property
    def topics(self) -> list[str]:
        return list(self.manifest.get("topics", []))

    def available_classes(self, image_id: str) -> list[str]:
        entry = self._entry(image_id)
        names = set(entry.get("masks", {}))
        names.update(entry.get("derived", {}))
        fusion = entry.get("fusion")
        if fusion:
            names.update(
                r["output_class"] for r in fusion.get("rules", [])
                if r.get("kind", "semantic") == "semantic"
            )
        return sorted(names)

    def class_mask(self, image_id: str, class_name: str) -> BinaryMask:
        return self.topic_mask(image_id, class_name)

    # -- topic resolution ---------------------------------------------------

    def topic_mask(self, image_id: str, topic: str) -> BinaryMask:
        key = (image_id, topic)
        if key in self._mask_cache:
            return self._mask_cache[key]
        entry = self._entry(image_id)
        mask = self._resolve_topic(image_id, entry, topic, seen=set())
        h, w = self.dims(image_id)
        if mask.data.shape != (h, w):
            raise StoreError(
                f"{image_id}/{topic}: mask is {mask.data.shape}, manifest says {(h, w)}"
            )
        self._mask_cache[key] = mask
        return mask

    def _resolve_topic(self, image_id: str, entry: dict, topic: str, seen: set) -> BinaryMask:
        if topic in seen:
            raise StoreError(f"derived topic cycle at {topic!r}")
        seen.add(topic)
        masks = entry.get("masks", {})
        if topic in masks:
            return read_mask_png(self.root / masks[topic], topic)
        derived = entry.get("derived", {})
        if topic in derived:
            parts = []
            for constituent in derived[topic]:
                try:
                    parts.append(self._resolve_topic(image_id, entry, constituent, seen))
                except UnknownTopicError:
                    continue
            if not parts:
                raise UnknownTopicError(topic)
            union = parts[0].data.copy()
            for p in parts[1:]:
                union |= p.data
            return BinaryMask(topic, union)
        fused = self._fused_masks(image_id, entry)
        if topic in fused:
            return fused[topic]
        raise UnknownTopicError(topic)

    def _fused_masks(self, image_id: str, entry: dict) -> dict[str, BinaryMask]:
        if image_id in self._classmap_cache:
            return self._classmap_cache[image_id]
        fusion = entry.get("fusion")
        models = entry.get("models")
        if not fusion or not models:
            self._classmap_cache[image_id] = {}
            return {}
        h, w = self.dims(image_id)
        maps = [
            read_logit_planes(self.root / spec["file"], model_id, spec["classes"], w, h)
            for model_id, spec in sorted(models.items())
        ]
        rules = [r for r in rules_from_config(fusion) if r.kind == "semantic"]
        class_map = fuse_logits(maps, rules)
        k = int(fusion.get("mode_filter_k", 5))
        class_map = mode_filter(class_map, k)
        masks = masks_from_classmap(class_map)
        self._classmap_cache[image_id] = masks
        return masks

    # -- segmentation backend -------------------------------------------------

    def _components(self, image_id: str, topic: str, gsd: float) -> list[Shape]:
        key = (image_id, topic, gsd)
        if key not in self._component_cache:
            mask = self.topic_mask(image_id, topic)
            self._component_cache[key] = connected_components(mask, 8, 0, gsd)
        return self._component_cache[key]

    def segment(
        self,
        image: str,
        topics: Sequence[str],
        min_area_pixels: int = 0,
        gsd: Optional[float] = None,
    ) -> SegmentationResult:
        """Resolve topics to shapes; ids are unique across the whole result.

        ``gsd`` defaults to the manifest value for the image; passing one
        overrides the metric conversion (pixel geometry is unaffected).
        """
        entry = self._entry(image)
        use_gsd = float(gsd) if gsd else float(entry["gsd"])
        declared = set(self.topics) | set(self.available_classes(image))
        for t in topics:
            if t not in declared:
                raise UnknownTopicError(t)
        h, w = self.dims(image)

        shapes: list[Shape] = []
        next_id = 0
        for topic in topics:
            for s in self._components(image, topic, use_gsd):
                if s.area_pixels < max(min_area_pixels, 1):
                    continue
                shapes.append(replace(s, id=next_id))
                next_id += 1
        return SegmentationResult(
            shapes=shapes,
            image_width=w,
            image_height=h,
            total_pixels=h * w,
            gsd=use_gsd,
        )


def write_manifest(root: str | Path, manifest: dict) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    path = root / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
