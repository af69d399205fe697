"""Synthetic mask corpora for demos and verification.

Real imagery cannot ship with the toolkit, so these builders paint
deterministic random land-cover layouts (rectangles and ellipses per class,
sized relative to each class's minimum-area threshold) and write them as a
regular backend store.  The corpus is tuned so every question type finds
valid candidates: some images omit classes entirely (zero-valued answers),
some carry many patches (fragmentation), gsd 1.0 images host hectare-scale
blobs for the complex types, and every seventh image is a large solar farm.

``build_showcase_store`` recreates the worked single-image scenario used in
documentation and the end-to-end test: one agricultural region and thirteen
buildings, seven of them above 0.01 ha, everything within 200 m.
"""

from __future__ import annotations

import math
import random
from pathlib import Path

import numpy as np

from .questions import DEFAULT_THRESHOLDS, QuestionRecord, render_question
from .maskio import write_mask_png
from .store import write_manifest

TOPICS = ["urban", "forest", "agric", "grass", "barren", "water", "solar", "roof"]
SEMANTIC = ["urban", "forest", "agric", "grass", "barren", "water", "solar"]

# (gsd m/px, image side px); thresholds stay paintable at each scale.
PROFILES = [(0.3, 384), (0.5, 256), (1.0, 224)]
LARGE_PROFILE = (1.0, 320)  # solar-farm images: 5+ ha installations fit


def _threshold_side(class_name: str, gsd: float) -> int:
    px_per_ha = 10_000.0 / (gsd * gsd)
    return int(math.ceil(math.sqrt(DEFAULT_THRESHOLDS[class_name] * px_per_ha)))


def _paint_blob(mask: np.ndarray, rng: random.Random, w: int, h: int) -> None:
    """One rectangle or ellipse of roughly w x h pixels, anywhere it fits."""
    side = mask.shape[0]
    w, h = min(w, side - 2), min(h, side - 2)
    x0 = rng.randint(0, side - w - 1)
    y0 = rng.randint(0, side - h - 1)
    if rng.random() < 0.5:
        mask[y0 : y0 + h, x0 : x0 + w] = True
    else:
        yy, xx = np.mgrid[0:side, 0:side]
        cx, cy = x0 + w / 2, y0 + h / 2
        ellipse = ((xx - cx) / (w / 2)) ** 2 + ((yy - cy) / (h / 2)) ** 2 <= 1.0
        mask |= ellipse


def _paint_class(
    mask: np.ndarray, rng: random.Random, class_name: str, gsd: float, many: bool
) -> None:
    t = _threshold_side(class_name, gsd)
    side = mask.shape[0]
    n_large = rng.randint(4, 7) if many else rng.randint(0, 2)
    for _ in range(n_large):
        # Wide enough that even elliptical blobs stay above the threshold.
        _paint_blob(mask, rng, int(t * rng.uniform(1.3, 1.8)), int(t * rng.uniform(1.25, 1.6)))
    for _ in range(rng.randint(0, 3)):  # sub-threshold specks
        small = max(2, int(t * rng.uniform(0.15, 0.45)))
        _paint_blob(mask, rng, small, small)
    # Occasionally one hectare-scale region so complex filters have matter.
    if gsd >= 1.0 and rng.random() < 0.5:
        ha_side = int(math.sqrt(2.2 * 10_000 / (gsd * gsd)))
        if ha_side < side - 4:
            _paint_blob(mask, rng, ha_side, ha_side)


def _paint_image(rng: random.Random, side: int, gsd: float, solar_farm: bool) -> dict[str, np.ndarray]:
    masks = {c: np.zeros((side, side), dtype=bool) for c in TOPICS}
    fragmented_class = rng.choice(SEMANTIC) if (gsd >= 1.0 and rng.random() < 0.4) else None
    for c in SEMANTIC:
        if rng.random() < 0.22:
            continue  # class absent: zero-valued questions stay represented
        _paint_class(masks[c], rng, c, gsd, many=(c == fragmented_class))
    if solar_farm:
        farm_side = int(math.sqrt(5.3 * 10_000 / (gsd * gsd)))
        _paint_blob(masks["solar"], rng, farm_side, farm_side)
    # Buildings: crisp separated rectangles, above and below 0.01 ha.
    if rng.random() < 0.9:
        t = _threshold_side("roof", gsd)
        for _ in range(rng.randint(1, 8)):
            big = rng.random() < 0.6
            s = int(t * rng.uniform(1.05, 1.4)) if big else max(3, int(t * rng.uniform(0.3, 0.6)))
            _paint_blob(masks["roof"], rng, s, s)
    return masks


def build_fixture_corpus(root: str | Path, n_images: int = 56, seed: int = 20240811) -> dict:
    """Write a deterministic synthetic store; returns its manifest."""
    root = Path(root)
    images: dict[str, dict] = {}
    for i in range(n_images):
        image_id = f"img_{i:04d}"
        solar_farm = i % 7 == 3
        gsd, side = LARGE_PROFILE if solar_farm else PROFILES[i % 3]
        rng = random.Random(seed * 7919 + i)
        masks = _paint_image(rng, side, gsd, solar_farm)
        mask_files = {}
        for c, arr in masks.items():
            rel = f"{image_id}/{c}.png"
            write_mask_png(arr, root / rel)
            mask_files[c] = rel
        images[image_id] = {
            "gsd": gsd,
            "width": side,
            "height": side,
            "masks": mask_files,
            "derived": {"vegetation": ["agric", "grass", "forest"]},
        }
    manifest = {"topics": TOPICS, "images": images}
    write_manifest(root, manifest)
    return manifest


# ---------------------------------------------------------------------------
# Showcase image: 1 agric region, 13 buildings, 7 above 0.01 ha
# ---------------------------------------------------------------------------

SHOWCASE_IMAGE_ID = "showcase_0000"
SHOWCASE_GSD = 0.3
_SHOWCASE_SIDE = 512


def showcase_masks() -> dict[str, np.ndarray]:
    side = _SHOWCASE_SIDE
    masks = {c: np.zeros((side, side), dtype=bool) for c in TOPICS}
    masks["agric"][180:330, 180:330] = True  # one 150x150 region

    roof = masks["roof"]
    # Seven large roofs: 34x34 px = 0.0104 ha at 0.3 m/px (above 0.01).
    large_at = [(20, 20), (20, 120), (20, 220), (120, 20), (120, 120), (420, 40), (420, 140)]
    for y, x in large_at:
        roof[y : y + 34, x : x + 34] = True
    # Six small roofs: 20x20 px = 0.0036 ha (below threshold).
    small_at = [(60, 380), (100, 420), (160, 400), (380, 300), (420, 360), (460, 300)]
    for y, x in small_at:
        roof[y : y + 20, x : x + 20] = True
    return masks


def build_showcase_store(root: str | Path) -> dict:
    """Write the showcase image as a one-image store; returns the manifest."""
    root = Path(root)
    masks = showcase_masks()
    mask_files = {}
    for c, arr in masks.items():
        rel = f"{SHOWCASE_IMAGE_ID}/{c}.png"
        write_mask_png(arr, root / rel)
        mask_files[c] = rel
    manifest = {
        "topics": TOPICS,
        "images": {
            SHOWCASE_IMAGE_ID: {
                "gsd": SHOWCASE_GSD,
                "width": _SHOWCASE_SIDE,
                "height": _SHOWCASE_SIDE,
                "masks": mask_files,
                "derived": {"vegetation": ["agric", "grass", "forest"]},
            }
        },
    }
    write_manifest(root, manifest)
    return manifest


def showcase_record() -> QuestionRecord:
    """The benchmark entry the showcase image answers.

    The stored answer (6) and range [4, 8] come from the reference entry;
    the mask layout yields 7, which the range accepts.
    """
    params = {"ref_class": "agric", "min_ha": 0.01, "distance_m": 200.0}
    return QuestionRecord(
        id="SQuID_1144",
        image=SHOWCASE_IMAGE_ID,
        question=render_question("building_proximity", params, SHOWCASE_GSD),
        answer=6,
        type="building_proximity",
        tier=2,
        gsd=SHOWCASE_GSD,
        acceptable_range=(4, 8),
        params=params,
    )


def percentage_mask() -> np.ndarray:
    """A 1024x1024 mask with exactly 143,267 foreground pixels (one region)."""
    mask = np.zeros((1024, 1024), dtype=bool)
    mask[10:388, 10:389] = True  # 378 rows x 379 cols = 143,262
    mask[10:15, 389] = True  # plus a 5-pixel strip on the right edge
    assert int(mask.sum()) == 143_267
    return mask
