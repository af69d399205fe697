"""Binary mask substrate: pixel sets, connected components, and metric areas.

Everything downstream reasons over :class:`Shape` values extracted here.  A
shape's pixel set is kept run-length encoded so megapixel regions stay
compact; its polygon is the traced outer boundary of that exact pixel set
(holes as separate inner rings, see :mod:`rasterqa.boundary`).

All functions are pure: they never mutate their inputs and are safe to call
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import ndimage

from .boundary import trace_rings
from .errors import DomainError, StructuralError

SQ_METERS_PER_HECTARE = 10_000.0

# 4-connectivity: edge neighbours only; 8-connectivity adds diagonals.
_STRUCTURE = {
    4: np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool),
    8: np.ones((3, 3), dtype=bool),
}


# ---------------------------------------------------------------------------
# Metric conversions
# ---------------------------------------------------------------------------

def area_hectares(area_pixels: int, gsd: float) -> float:
    """Convert a pixel count to hectares at the given ground-sampling distance.

    One pixel covers gsd x gsd square meters, so area = n * gsd^2 / 10^4 ha.
    """
    if gsd <= 0:
        raise DomainError(f"gsd must be > 0, got {gsd}")
    return area_pixels * gsd * gsd / SQ_METERS_PER_HECTARE


def coverage_percentage(shapes: Sequence["Shape"], total_pixels: int) -> float:
    """Percentage of the image covered by the given shapes (one class).

    Shapes of one class are disjoint by construction, so their pixel counts
    sum without double counting.
    """
    if total_pixels <= 0:
        raise DomainError(f"total_pixels must be > 0, got {total_pixels}")
    covered = sum(s.area_pixels for s in shapes)
    return 100.0 * covered / total_pixels


def filter_by_area(
    shapes: Sequence["Shape"],
    min_ha: Optional[float] = None,
    max_ha: Optional[float] = None,
) -> list["Shape"]:
    """Keep shapes with min_ha < area_hectares <= max_ha.

    The lower bound is strict (a "larger than X ha" question excludes X
    exactly); the upper bound is inclusive.  Order and ids are preserved.
    """
    if min_ha is not None and max_ha is not None and min_ha > max_ha:
        raise DomainError(f"inverted area bounds: min {min_ha} > max {max_ha}")
    out = []
    for s in shapes:
        if min_ha is not None and not s.area_hectares > min_ha:
            continue
        if max_ha is not None and not s.area_hectares <= max_ha:
            continue
        out.append(s)
    return out


# ---------------------------------------------------------------------------
# Run-length encoded pixel sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PixelRuns:
    """A set of pixels in a fixed (height, width) frame, encoded as row runs.

    ``starts`` holds flat row-major indices, ``lengths`` the run lengths;
    runs never cross row boundaries.  Both arrays are int64 and sorted by
    start index.
    """

    height: int
    width: int
    starts: np.ndarray
    lengths: np.ndarray

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "PixelRuns":
        """Encode a 2-D boolean array."""
        h, w = mask.shape
        # Pad a background column on the right so no run crosses a row edge.
        padded = np.zeros((h, w + 1), dtype=bool)
        padded[:, :w] = mask
        flat = padded.ravel()
        diff = np.diff(flat.astype(np.int8), prepend=np.int8(0))
        starts_p = np.flatnonzero(diff == 1)
        ends_p = np.flatnonzero(diff == -1)
        # Every run terminates at the pad column at the latest.
        rows = starts_p // (w + 1)
        cols = starts_p % (w + 1)
        starts = rows * w + cols
        lengths = ends_p - starts_p
        return cls(h, w, starts.astype(np.int64), lengths.astype(np.int64))

    def to_mask(self) -> np.ndarray:
        """Decode back to a 2-D boolean array."""
        flat = np.zeros(self.height * self.width, dtype=bool)
        for s, n in zip(self.starts, self.lengths):
            flat[s : s + n] = True
        return flat.reshape(self.height, self.width)

    @property
    def count(self) -> int:
        return int(self.lengths.sum())

    def bbox(self) -> tuple[int, int, int, int]:
        """Tight (xmin, ymin, xmax, ymax) bounds, max coordinates inclusive."""
        if len(self.starts) == 0:
            raise ValueError("empty pixel set has no bbox")
        rows = self.starts // self.width
        col_start = self.starts % self.width
        col_end = col_start + self.lengths - 1
        return (
            int(col_start.min()),
            int(rows.min()),
            int(col_end.max()),
            int(rows.max()),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, PixelRuns):
            return NotImplemented
        return (
            self.height == other.height
            and self.width == other.width
            and np.array_equal(self.starts, other.starts)
            and np.array_equal(self.lengths, other.lengths)
        )


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeoImage:
    """A flat raster with a uniform ground-sampling distance."""

    id: str
    width: int
    height: int
    gsd: float
    pixel_data: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image dimensions must be positive, got {self.width}x{self.height}")
        if self.gsd <= 0:
            raise ValueError(f"gsd must be > 0, got {self.gsd}")

    @property
    def total_pixels(self) -> int:
        return self.width * self.height


@dataclass(frozen=True)
class BinaryMask:
    """Per-pixel membership of one class, as a 2-D boolean array."""

    class_label: str
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.dtype != bool:
            raise StructuralError("mask data must be a 2-D boolean array")

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])


@dataclass(frozen=True)
class Shape:
    """One connected region of a class mask, with pixel and metric geometry.

    ``polygon`` is the outer boundary in pixel-corner coordinates; ``holes``
    are inner rings.  ``provenance`` is set on shapes produced by clipping
    and names the parent shape's id.  ``distance_meters`` is attached by
    the minimum-distance operation.
    """

    id: int
    class_type: str
    pixels: PixelRuns = field(repr=False)
    area_pixels: int
    area_hectares: float
    polygon: list[tuple[int, int]] = field(repr=False)
    holes: list[list[tuple[int, int]]] = field(repr=False)
    bbox: tuple[int, int, int, int]
    provenance: Optional[int] = None
    distance_meters: Optional[float] = None

    def to_dict(self) -> dict:
        """Wire representation used by the segmentation endpoint.

        ``pixel_runs`` carries the exact pixel set (flat row-major start and
        length pairs) so distance operations on the client side work on the
        same pixels the server extracted.
        """
        d = {
            "id": self.id,
            "class_type": self.class_type,
            "area_pixels": self.area_pixels,
            "area_hectares": self.area_hectares,
            "polygon": [[int(x), int(y)] for x, y in self.polygon],
            "holes": [[[int(x), int(y)] for x, y in ring] for ring in self.holes],
            "bbox": list(self.bbox),
            "pixel_runs": [
                [int(s), int(n)] for s, n in zip(self.pixels.starts, self.pixels.lengths)
            ],
        }
        if self.provenance is not None:
            d["provenance"] = self.provenance
        if self.distance_meters is not None:
            d["distance_meters"] = self.distance_meters
        return d

    @classmethod
    def from_dict(cls, d: dict, height: int, width: int) -> "Shape":
        """Rebuild a shape from its wire representation and image frame."""
        runs = d["pixel_runs"]
        pixels = PixelRuns(
            height,
            width,
            np.array([s for s, _ in runs], dtype=np.int64),
            np.array([n for _, n in runs], dtype=np.int64),
        )
        return cls(
            id=d["id"],
            class_type=d["class_type"],
            pixels=pixels,
            area_pixels=d["area_pixels"],
            area_hectares=d["area_hectares"],
            polygon=[(int(x), int(y)) for x, y in d["polygon"]],
            holes=[[(int(x), int(y)) for x, y in ring] for ring in d.get("holes", [])],
            bbox=tuple(d["bbox"]),
            provenance=d.get("provenance"),
            distance_meters=d.get("distance_meters"),
        )

    def with_distance(self, meters: float) -> "Shape":
        return replace(self, distance_meters=meters)


@dataclass(frozen=True)
class SegmentationResult:
    """Everything the spatial API returns for one image + topic list."""

    shapes: list[Shape]
    image_width: int
    image_height: int
    total_pixels: int
    gsd: float

    def __post_init__(self):
        if self.total_pixels != self.image_width * self.image_height:
            raise StructuralError(
                f"total_pixels {self.total_pixels} != {self.image_width}x{self.image_height}"
            )

    def of_class(self, class_type: str) -> list[Shape]:
        return [s for s in self.shapes if s.class_type == class_type]

    def to_dict(self) -> dict:
        return {
            "shapes": [s.to_dict() for s in self.shapes],
            "image_width": self.image_width,
            "image_height": self.image_height,
            "total_pixels": self.total_pixels,
        }


# ---------------------------------------------------------------------------
# Connected components
# ---------------------------------------------------------------------------

def shape_from_mask(
    mask: np.ndarray,
    shape_id: int,
    class_type: str,
    gsd: float,
    connectivity: int = 8,
    provenance: Optional[int] = None,
) -> Shape:
    """Build a Shape from a single-component boolean mask (full frame)."""
    runs = PixelRuns.from_mask(mask)
    n = runs.count
    if n == 0:
        raise ValueError("cannot build a shape from an empty mask")
    bbox = runs.bbox()
    outer, holes = trace_rings(mask, bbox, connectivity)
    return Shape(
        id=shape_id,
        class_type=class_type,
        pixels=runs,
        area_pixels=n,
        area_hectares=area_hectares(n, gsd),
        polygon=outer,
        holes=holes,
        bbox=bbox,
        provenance=provenance,
    )


def connected_components(
    mask: BinaryMask,
    connectivity: int = 8,
    min_area_pixels: int = 0,
    gsd: float = 1.0,
) -> list[Shape]:
    """Extract maximal connected regions of the mask as shapes.

    Components smaller than ``min_area_pixels`` are dropped before
    polygonization.  Ids run 0..n-1 in scan order of each component's first
    pixel, which makes extraction deterministic.
    """
    if connectivity not in _STRUCTURE:
        raise DomainError(f"connectivity must be 4 or 8, got {connectivity}")
    if min_area_pixels < 0:
        raise DomainError(f"min_area_pixels must be >= 0, got {min_area_pixels}")
    data = mask.data
    labels, n_labels = ndimage.label(data, structure=_STRUCTURE[connectivity])
    if n_labels == 0:
        return []

    flat = labels.ravel()
    counts = np.bincount(flat, minlength=n_labels + 1)
    # First flat index per label fixes scan order regardless of how the
    # labeller numbered the components.
    first = np.full(n_labels + 1, flat.size, dtype=np.int64)
    np.minimum.at(first, flat, np.arange(flat.size, dtype=np.int64))
    order = sorted(
        (lab for lab in range(1, n_labels + 1) if counts[lab] >= max(min_area_pixels, 1)),
        key=lambda lab: first[lab],
    )

    slices = ndimage.find_objects(labels)
    shapes: list[Shape] = []
    h, w = data.shape
    for new_id, lab in enumerate(order):
        sl = slices[lab - 1]
        full = np.zeros((h, w), dtype=bool)
        full[sl] = labels[sl] == lab
        shapes.append(shape_from_mask(full, new_id, mask.class_label, gsd, connectivity))
    return shapes


def rasterize_shapes(shapes: Iterable[Shape], height: int, width: int) -> np.ndarray:
    """Union of the shapes' pixel sets as a boolean array in the given frame."""
    out = np.zeros((height, width), dtype=bool)
    for s in shapes:
        if s.pixels.height > height or s.pixels.width > width:
            raise StructuralError(
                f"shape frame {s.pixels.width}x{s.pixels.height} exceeds {width}x{height}"
            )
        flat = out.ravel()
        if s.pixels.width == width:
            for st, n in zip(s.pixels.starts, s.pixels.lengths):
                flat[st : st + n] = True
        else:
            m = s.pixels.to_mask()
            out[: s.pixels.height, : s.pixels.width] |= m
    return out
