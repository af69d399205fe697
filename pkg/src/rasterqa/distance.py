"""Distance-based spatial operations: buffering, clipping, and separations.

Distances are Euclidean between pixel centers, computed with an exact
distance transform (never a chamfer approximation), and thresholds are
inclusive: a pixel is "within d meters" when dist_px * resolution <= d.

The two public operations mirror the spatial analysis API that query plans
compose: ``find_shapes_within_distance`` cuts target shapes to the parts
lying within a distance of any reference shape, and
``calculate_shape_distances`` annotates each target with the minimum
separation from the reference set.  Both are pure; clipped outputs are new
shapes whose ``provenance`` names the parent target.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import DomainError, StructuralError
from .raster import BinaryMask, Shape, shape_from_mask

_STRUCTURE8 = np.ones((3, 3), dtype=bool)
_STRUCTURE4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class DistanceField:
    """Per-pixel Euclidean distance (in pixels) to the nearest source pixel.

    ``degenerate`` marks the all-infinite field produced by an empty source
    mask, so callers can distinguish "no sources" from "everything far".
    """

    width: int
    height: int
    values: np.ndarray
    degenerate: bool = False


def distance_transform(mask: BinaryMask) -> DistanceField:
    """Exact Euclidean distance from every pixel to the nearest true pixel."""
    data = mask.data
    if not data.any():
        values = np.full(data.shape, np.inf)
        return DistanceField(mask.width, mask.height, values, degenerate=True)
    values = ndimage.distance_transform_edt(~data)
    return DistanceField(mask.width, mask.height, values, degenerate=False)


# ---------------------------------------------------------------------------
# Window helpers
# ---------------------------------------------------------------------------

def _frame_of(shapes: Sequence[Shape]) -> tuple[int, int]:
    h, w = shapes[0].pixels.height, shapes[0].pixels.width
    for s in shapes:
        if (s.pixels.height, s.pixels.width) != (h, w):
            raise StructuralError("shapes do not share an image frame")
    return h, w


def _union_bbox(shapes: Sequence[Shape]) -> tuple[int, int, int, int]:
    xmin = min(s.bbox[0] for s in shapes)
    ymin = min(s.bbox[1] for s in shapes)
    xmax = max(s.bbox[2] for s in shapes)
    ymax = max(s.bbox[3] for s in shapes)
    return xmin, ymin, xmax, ymax


def _window_mask(
    shapes: Sequence[Shape], x0: int, y0: int, h: int, w: int
) -> np.ndarray:
    """Rasterize shape pixel sets into a window offset by (x0, y0)."""
    out = np.zeros((h, w), dtype=bool)
    for s in shapes:
        width = s.pixels.width
        rows = (s.pixels.starts // width) - y0
        cols = (s.pixels.starts % width) - x0
        for r, c, n in zip(rows.tolist(), cols.tolist(), s.pixels.lengths.tolist()):
            out[r, c : c + n] = True
    return out


def _reference_distance_window(
    targets: Sequence[Shape], references: Sequence[Shape]
) -> tuple[np.ndarray, int, int]:
    """Distance field (pixels) over the joint bbox window of both shape sets.

    Every reference pixel lies inside the window, so distances at target
    pixels are exact; no padding is needed.
    """
    xmin, ymin, xmax, ymax = _union_bbox(list(targets) + list(references))
    h, w = ymax - ymin + 1, xmax - xmin + 1
    ref_mask = _window_mask(references, xmin, ymin, h, w)
    dist = ndimage.distance_transform_edt(~ref_mask)
    return dist, xmin, ymin


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def find_shapes_within_distance(
    targets: Sequence[Shape],
    references: Sequence[Shape],
    distance_meters: float,
    resolution: float,
    connectivity: int = 8,
) -> list[Shape]:
    """Clip targets to the parts within ``distance_meters`` of any reference.

    Builds the buffer {pixels : dist_px * resolution <= distance_meters}
    around the reference union and intersects each target with it.  Clipped
    pixel sets are re-labelled into connected components, so one target can
    yield several output shapes.  Outputs get fresh sequential ids, keep the
    target's class, record the parent id in ``provenance``, and have their
    areas and polygons recomputed.  Empty clips are dropped.

    An empty reference list means "no reference features exist" and yields
    an empty result rather than an error.
    """
    if distance_meters < 0:
        raise DomainError(f"distance_meters must be >= 0, got {distance_meters}")
    if resolution <= 0:
        raise DomainError(f"resolution must be > 0, got {resolution}")
    if not references or not targets:
        return []
    frame_h, frame_w = _frame_of(list(targets) + list(references))

    dist, x0, y0 = _reference_distance_window(targets, references)
    buffer = dist * resolution <= distance_meters
    win_h, win_w = buffer.shape

    structure = _STRUCTURE4 if connectivity == 4 else _STRUCTURE8
    out: list[Shape] = []
    next_id = 0
    for target in targets:
        tmask = _window_mask([target], x0, y0, win_h, win_w)
        clipped = tmask & buffer
        if not clipped.any():
            continue
        labels, n_labels = ndimage.label(clipped, structure=structure)
        flat = labels.ravel()
        first = np.full(n_labels + 1, flat.size, dtype=np.int64)
        np.minimum.at(first, flat, np.arange(flat.size, dtype=np.int64))
        order = sorted(range(1, n_labels + 1), key=lambda lab: first[lab])
        for lab in order:
            full = np.zeros((frame_h, frame_w), dtype=bool)
            full[y0 : y0 + win_h, x0 : x0 + win_w] = labels == lab
            out.append(
                shape_from_mask(
                    full,
                    next_id,
                    target.class_type,
                    resolution,
                    connectivity,
                    provenance=target.id,
                )
            )
            next_id += 1
    return out


def calculate_shape_distances(
    targets: Sequence[Shape],
    references: Sequence[Shape],
    resolution: float,
) -> list[Shape]:
    """Annotate each target with its minimum distance (meters) to the references.

    Distance is the nearest-pixel separation: zero when a target overlaps a
    reference.  Returns new shapes with ``distance_meters`` set; input order
    is preserved.  An empty reference list is an error, distinct from "the
    distance is merely large".
    """
    if resolution <= 0:
        raise DomainError(f"resolution must be > 0, got {resolution}")
    if not references:
        raise DomainError("cannot measure distances against an empty reference list")
    if not targets:
        return []
    _frame_of(list(targets) + list(references))

    dist, x0, y0 = _reference_distance_window(targets, references)
    win_h, win_w = dist.shape
    out = []
    for target in targets:
        tmask = _window_mask([target], x0, y0, win_h, win_w)
        d_px = float(dist[tmask].min())
        out.append(target.with_distance(d_px * resolution))
    return out
