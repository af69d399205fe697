"""Mask substrate: components, RLE pixel sets, metric areas, polygons."""

import numpy as np
import pytest

from rasterqa.errors import DomainError
from rasterqa.raster import (
    BinaryMask,
    PixelRuns,
    Shape,
    area_hectares,
    connected_components,
    coverage_percentage,
    filter_by_area,
    shape_from_mask,
)

from conftest import random_mask
from oracles import fill_polygon_even_odd, flood_fill_components


def shapes_of(mask: np.ndarray, connectivity: int = 8, min_area: int = 0, gsd: float = 1.0):
    return connected_components(BinaryMask("t", mask), connectivity, min_area, gsd)


# ---------------------------------------------------------------------------
# connected_components
# ---------------------------------------------------------------------------

def test_all_false_mask_yields_no_shapes():
    assert shapes_of(np.zeros((8, 8), dtype=bool)) == []


def test_all_true_mask_is_one_component():
    shapes = shapes_of(np.ones((4, 4), dtype=bool))
    assert len(shapes) == 1
    assert shapes[0].area_pixels == 16
    assert shapes[0].bbox == (0, 0, 3, 3)


def test_diagonal_pair_connectivity():
    mask = np.zeros((3, 3), dtype=bool)
    mask[0, 0] = mask[1, 1] = True
    assert len(shapes_of(mask, 8)) == 1
    assert len(shapes_of(mask, 4)) == 2


def test_ids_follow_scan_order():
    mask = np.zeros((5, 5), dtype=bool)
    mask[4, 0] = True  # later in scan order
    mask[0, 4] = True  # earlier
    shapes = shapes_of(mask)
    assert [s.bbox[:2] for s in shapes] == [(4, 0), (0, 4)]
    assert [s.id for s in shapes] == [0, 1]


def test_min_area_filter_applies_before_ids():
    mask = np.zeros((6, 6), dtype=bool)
    mask[0, 0] = True
    mask[3:5, 3:5] = True
    shapes = shapes_of(mask, min_area=2)
    assert len(shapes) == 1
    assert shapes[0].id == 0
    assert shapes[0].area_pixels == 4


def test_components_match_flood_fill_on_random_masks():
    rng = np.random.RandomState(11)
    for trial in range(60):
        h, w = rng.randint(3, 64), rng.randint(3, 64)
        mask = random_mask(rng, h, w, rng.choice([0.2, 0.4, 0.6]))
        for conn in (4, 8):
            expected = flood_fill_components(mask, conn)
            got = shapes_of(mask, conn)
            assert len(got) == len(expected)
            for shape, comp in zip(got, expected):
                pix = shape.pixels.to_mask()
                assert {(y, x) for y, x in np.argwhere(pix).tolist()} == comp


def test_partition_with_threshold():
    rng = np.random.RandomState(12)
    for _ in range(20):
        mask = random_mask(rng, 32, 32, 0.35)
        comps = flood_fill_components(mask, 8)
        kept = shapes_of(mask, 8, min_area=3)
        expected = [c for c in comps if len(c) >= 3]
        assert len(kept) == len(expected)
        union = np.zeros_like(mask)
        for s in kept:
            m = s.pixels.to_mask()
            assert not (union & m).any()  # disjointness
            union |= m
        small = sum(len(c) for c in comps if len(c) < 3)
        assert union.sum() + small == mask.sum()


def test_bad_connectivity_rejected():
    with pytest.raises(DomainError):
        shapes_of(np.ones((2, 2), dtype=bool), connectivity=6)


# ---------------------------------------------------------------------------
# Metric conversions
# ---------------------------------------------------------------------------

def test_area_hectares_zero_pixels():
    assert area_hectares(0, 0.5) == 0.0


def test_area_hectares_known_values():
    assert area_hectares(143267, 0.3) == pytest.approx(1.289403, abs=1e-9)
    assert area_hectares(111112, 0.3) == pytest.approx(1.0, abs=1e-3)


def test_area_hectares_rejects_bad_gsd():
    with pytest.raises(DomainError):
        area_hectares(10, 0.0)
    with pytest.raises(DomainError):
        area_hectares(10, -1.0)


def test_area_linear_in_pixels_quadratic_in_gsd():
    rng = np.random.RandomState(3)
    for _ in range(50):
        a = int(rng.randint(1, 10**6))
        g = float(rng.uniform(0.05, 10))
        assert area_hectares(3 * a, g) == pytest.approx(3 * area_hectares(a, g), rel=1e-12)
        assert area_hectares(a, 2 * g) == pytest.approx(4 * area_hectares(a, g), rel=1e-12)


def test_coverage_percentage_cases():
    mask = np.zeros((8, 8), dtype=bool)
    assert coverage_percentage([], 64) == 0.0
    mask[:, :] = True
    assert coverage_percentage(shapes_of(mask), 64) == 100.0
    with pytest.raises(DomainError):
        coverage_percentage([], 0)


def test_coverage_percentage_paper_value():
    # 143267 of 1048576 pixels: the worked percentage example.
    assert 143267 / 1048576 * 100 == pytest.approx(13.663005828857422, abs=1e-12)


# ---------------------------------------------------------------------------
# filter_by_area
# ---------------------------------------------------------------------------

def _shape_with_ha(idx: int, ha: float) -> Shape:
    from dataclasses import replace

    mask = np.zeros((2, 2), dtype=bool)
    mask[0, 0] = True
    return replace(shape_from_mask(mask, idx, "c", 1.0), area_hectares=ha)


def test_filter_by_area_no_bounds_is_identity():
    shapes = [_shape_with_ha(i, ha) for i, ha in enumerate([0.009, 0.02, 1.5])]
    assert filter_by_area(shapes) == shapes


def test_filter_by_area_strict_lower_bound():
    shapes = [_shape_with_ha(i, ha) for i, ha in enumerate([0.009, 0.01, 0.02, 1.5])]
    kept = filter_by_area(shapes, min_ha=0.01)
    assert [s.area_hectares for s in kept] == [0.02, 1.5]  # 0.01 itself excluded


def test_filter_by_area_range_semantics():
    # (0.125, 10]: strict lower, inclusive upper.
    values = [0.125, 0.2, 9.9, 10.0, 10.1]
    shapes = [_shape_with_ha(i, ha) for i, ha in enumerate(values)]
    kept = filter_by_area(shapes, min_ha=0.125, max_ha=10.0)
    assert [s.area_hectares for s in kept] == [0.2, 9.9, 10.0]


def test_filter_by_area_inverted_bounds():
    with pytest.raises(DomainError):
        filter_by_area([], min_ha=2.0, max_ha=1.0)


# ---------------------------------------------------------------------------
# PixelRuns
# ---------------------------------------------------------------------------

def test_pixel_runs_round_trip_random():
    rng = np.random.RandomState(21)
    for _ in range(50):
        h, w = rng.randint(1, 40), rng.randint(1, 40)
        mask = random_mask(rng, h, w, rng.choice([0.1, 0.5, 0.9]))
        runs = PixelRuns.from_mask(mask)
        assert np.array_equal(runs.to_mask(), mask)
        assert runs.count == int(mask.sum())


def test_pixel_runs_never_cross_rows():
    mask = np.ones((3, 5), dtype=bool)
    runs = PixelRuns.from_mask(mask)
    assert len(runs.starts) == 3
    assert runs.lengths.tolist() == [5, 5, 5]


def test_pixel_runs_bbox():
    mask = np.zeros((6, 7), dtype=bool)
    mask[2, 1:4] = True
    mask[4, 5] = True
    assert PixelRuns.from_mask(mask).bbox() == (1, 2, 5, 4)


# ---------------------------------------------------------------------------
# Polygons
# ---------------------------------------------------------------------------

def test_polygon_fill_recovers_pixels_random():
    rng = np.random.RandomState(31)
    checked = 0
    while checked < 120:
        h, w = rng.randint(3, 32), rng.randint(3, 32)
        mask = random_mask(rng, h, w, rng.choice([0.3, 0.5, 0.7]))
        conn = int(rng.choice([4, 8]))
        for s in shapes_of(mask, conn):
            rings = [s.polygon] + s.holes
            recovered = fill_polygon_even_odd(rings, h, w)
            assert np.array_equal(recovered, s.pixels.to_mask())
            checked += 1


def test_polygon_holes_detected():
    mask = np.ones((5, 5), dtype=bool)
    mask[2, 2] = False
    (s,) = shapes_of(mask)
    assert len(s.holes) == 1
    assert s.holes[0] == [(2, 2), (2, 3), (3, 3), (3, 2)] or len(s.holes[0]) == 4


def test_geoimage_invariants():
    from rasterqa.raster import GeoImage

    img = GeoImage("i1", 1024, 1024, 0.3)
    assert img.total_pixels == 1024 * 1024
    with pytest.raises(ValueError):
        GeoImage("i2", 0, 5, 0.3)
    with pytest.raises(ValueError):
        GeoImage("i3", 5, 5, 0.0)


def test_shape_wire_round_trip():
    rng = np.random.RandomState(41)
    mask = random_mask(rng, 12, 17, 0.45)
    for s in shapes_of(mask, 8, gsd=0.5):
        back = Shape.from_dict(s.to_dict(), 12, 17)
        assert back.pixels == s.pixels
        assert back.polygon == s.polygon
        assert back.holes == s.holes
        assert back.area_hectares == s.area_hectares
        assert back.bbox == s.bbox
