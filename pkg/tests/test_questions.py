"""Question generation: ground truths, templates, dataset files."""

import json
import re

import numpy as np
import pytest

from rasterqa.calib import RANGE_EXACT
from rasterqa.errors import DomainError
from rasterqa.plans import validate_plan
from rasterqa.questions import (
    ALL_TYPES,
    GenerationSkip,
    ImageAnalysis,
    SimpleCorpus,
    build_mock_table,
    canonical_plan,
    compute_ground_truth,
    emit_dataset,
    generate_questions,
    load_dataset,
    render_question,
)

from oracles import within_distance_pixels


def blob(h, w, boxes):
    m = np.zeros((h, w), dtype=bool)
    for y0, y1, x0, x1 in boxes:
        m[y0:y1, x0:x1] = True
    return m


@pytest.fixture()
def corpus():
    """One hand-built 224x224 image at 1.0 m/px with known geometry."""
    side = 224
    masks = {
        # Two above-threshold water bodies (36x36 = 0.1296 ha > 0.1).
        "water": blob(side, side, [(10, 46, 10, 46), (120, 156, 120, 156)]),
        # Forest: 6 patches of 36x36 (> 0.125 ha): fragmented.
        "forest": blob(side, side, [
            (0, 36, 60, 96), (0, 36, 110, 146), (0, 36, 160, 196),
            (60, 96, 60, 96), (60, 96, 110, 146), (60, 96, 160, 196),
        ]),
        # Grass: one big patch plus one speck below threshold.
        "grass": blob(side, side, [(170, 220, 10, 60), (100, 102, 10, 12)]),
        # Agric: a 150x150 region (2.25 ha > 2).
        "agric": blob(side, side, [(60, 210, 60, 210)]),
        # Urban: 110x110 = 1.21 ha.
        "urban": blob(side, side, [(110, 220, 110, 220)]),
        "barren": np.zeros((side, side), dtype=bool),
        # Solar: one 60x60 (0.36 ha) and one 4x4 speck.
        "solar": blob(side, side, [(10, 70, 150, 210), (200, 204, 200, 204)]),
        # Roofs: two 12x12 (0.0144 ha > 0.01) and one 5x5 speck.
        "roof": blob(side, side, [(0, 12, 0, 12), (0, 12, 30, 42), (210, 215, 0, 5)]),
    }
    return SimpleCorpus({"img_a": (1.0, masks)})


@pytest.fixture()
def analysis(corpus):
    return ImageAnalysis(corpus, "img_a")


# ---------------------------------------------------------------------------
# compute_ground_truth semantics
# ---------------------------------------------------------------------------

def test_percentage(analysis):
    got = compute_ground_truth("percentage", {"class": "agric"}, analysis)
    assert got == pytest.approx(100.0 * 150 * 150 / 224 / 224, abs=1e-12)


def test_percentage_of_absent_class_is_zero(analysis):
    assert compute_ground_truth("percentage", {"class": "barren"}, analysis) == 0.0


def test_count_applies_strict_threshold(analysis):
    got = compute_ground_truth("count", {"class": "roof", "min_ha": 0.01}, analysis)
    assert got == 2  # the 5x5 speck is below 0.01 ha


def test_size_is_largest_kept_percent(analysis):
    got = compute_ground_truth("size", {"class": "solar", "min_ha": 0.01}, analysis)
    assert got == pytest.approx(100.0 * 3600 / (224 * 224), abs=1e-12)


def test_fragmentation_rule_strictly_more_than_five(analysis):
    got = compute_ground_truth("fragmentation", {"class": "forest", "min_ha": 0.125}, analysis)
    assert got == "fragmented"  # 6 patches
    got = compute_ground_truth("fragmentation", {"class": "water", "min_ha": 0.1}, analysis)
    assert got == "connected"  # 2 patches


def test_fragmentation_exactly_five_is_connected(corpus):
    side = 224
    masks = {"forest": blob(side, side, [
        (0, 36, 0, 36), (0, 36, 50, 86), (0, 36, 100, 136),
        (0, 36, 150, 186), (60, 96, 0, 36),
    ])}
    analysis = ImageAnalysis(SimpleCorpus({"x": (1.0, masks)}), "x")
    got = compute_ground_truth("fragmentation", {"class": "forest", "min_ha": 0.125}, analysis)
    assert got == "connected"


def test_binary_family(analysis):
    assert compute_ground_truth(
        "binary_comparison", {"class_a": "agric", "class_b": "water"}, analysis) == "yes"
    assert compute_ground_truth(
        "binary_comparison", {"class_a": "barren", "class_b": "water"}, analysis) == "no"
    assert compute_ground_truth(
        "binary_presence", {"class": "solar", "min_ha": 0.01}, analysis) == "yes"
    assert compute_ground_truth(
        "binary_multiple", {"class": "solar", "min_ha": 0.01}, analysis) == "no"
    assert compute_ground_truth(
        "binary_threshold", {"class": "solar", "min_ha": 0.01, "threshold_ha": 1.0},
        analysis) == "no"


def test_proximity_area_matches_pixel_oracle(corpus, analysis):
    params = {"class_a": "water", "class_b": "grass", "distance_m": 50.0}
    got = compute_ground_truth("proximity_area", params, analysis)
    expected_mask = within_distance_pixels(
        corpus.images["img_a"][1]["water"], corpus.images["img_a"][1]["grass"], 50.0, 1.0
    )
    assert got == pytest.approx(int(expected_mask.sum()) * 1.0 / 1e4, rel=1e-12)


def test_building_proximity_counts_clips(analysis):
    got = compute_ground_truth(
        "building_proximity",
        {"ref_class": "agric", "min_ha": 0.01, "distance_m": 500.0},
        analysis,
    )
    assert got == 2  # both large roofs within 500 m on a 224 px image


def test_power_calculation(analysis):
    got = compute_ground_truth("power_calculation", {"w_per_m2": 200.0}, analysis)
    assert got == pytest.approx((3600 + 16) * 200 / 1e6, rel=1e-12)


def test_complex_average_and_skip(analysis):
    got = compute_ground_truth("complex_average", {"class": "solar", "min_ha": 0.01}, analysis)
    assert got == pytest.approx(0.36)
    with pytest.raises(GenerationSkip):
        compute_ground_truth("complex_average", {"class": "barren", "min_ha": 0.125}, analysis)


def test_complex_clip_sum(analysis, corpus):
    params = {"class_a": "agric", "class_b": "water", "min_ha": 2.0, "distance_m": 100.0}
    got = compute_ground_truth("complex_multi_condition", params, analysis)
    masks = corpus.images["img_a"][1]
    expected = within_distance_pixels(masks["agric"], masks["water"], 100.0, 1.0)
    assert got == pytest.approx(int(expected.sum()) / 1e4, rel=1e-12)


def test_vegetation_is_union(analysis):
    veg = compute_ground_truth("percentage", {"class": "vegetation"}, analysis)
    agric = compute_ground_truth("percentage", {"class": "agric"}, analysis)
    assert veg > agric  # union adds grass and forest pixels


# ---------------------------------------------------------------------------
# Question text
# ---------------------------------------------------------------------------

def test_templates_state_threshold_and_gsd():
    q = render_question("count", {"class": "urban", "min_ha": 0.1}, 0.5)
    assert q == (
        "How many separate urban area regions are there? When counting, "
        "ignore patches smaller than 0.1 hectares. (GSD: 0.5m)"
    )
    q = render_question(
        "building_flood_risk", {"ref_class": "water", "min_ha": 0.01, "distance_m": 100.0}, 0.3
    )
    assert q == (
        "How many buildings (larger than 0.01 hectares) are located within "
        "100m of water bodies (flood risk assessment)? (GSD: 0.3m)"
    )


def test_every_type_renders_with_gsd_and_numbers():
    sample_params = {
        "percentage": {"class": "water"},
        "count": {"class": "urban", "min_ha": 0.1},
        "size": {"class": "vegetation", "min_ha": 0.125},
        "total_area": {"class": "solar", "min_ha": 0.01},
        "binary_comparison": {"class_a": "water", "class_b": "barren"},
        "binary_threshold": {"class": "solar", "min_ha": 0.01, "threshold_ha": 1.0},
        "binary_presence": {"class": "solar", "min_ha": 0.01},
        "binary_multiple": {"class": "solar", "min_ha": 0.01},
        "proximity_percentage": {"class_a": "urban", "class_b": "vegetation", "distance_m": 500.0},
        "proximity_area": {"class_a": "vegetation", "class_b": "barren", "distance_m": 200.0},
        "connectivity": {"class": "agric", "min_ha": 0.125, "max_ha": 10.0},
        "fragmentation": {"class": "forest", "min_ha": 0.125},
        "binary_proximity": {"class_a": "barren", "class_b": "urban", "distance_m": 100.0},
        "building_proximity": {"ref_class": "agric", "min_ha": 0.01, "distance_m": 500.0},
        "building_fire_risk": {"ref_class": "forest", "min_ha": 0.01, "distance_m": 50.0},
        "building_flood_risk": {"ref_class": "water", "min_ha": 0.01, "distance_m": 100.0},
        "power_calculation": {"w_per_m2": 200.0},
        "complex_multi_condition": {"class_a": "barren", "class_b": "forest",
                                    "min_ha": 1.0, "distance_m": 200.0},
        "complex_agriculture_water_access": {"class_a": "agric", "class_b": "water",
                                             "min_ha": 2.0, "distance_m": 200.0},
        "complex_vegetation_water_access": {"class_a": "vegetation", "class_b": "water",
                                            "min_ha": 2.0, "distance_m": 200.0},
        "complex_urban_fire_risk": {"class_a": "urban", "class_b": "vegetation",
                                    "min_ha": 1.0, "distance_m": 50.0},
        "complex_urban_flood_risk": {"class_a": "urban", "class_b": "water",
                                     "min_ha": 1.0, "distance_m": 100.0},
        "complex_average": {"class": "solar", "min_ha": 0.01},
        "complex_size_filter": {"class": "solar", "min_ha": 5.0},
    }
    assert set(sample_params) == set(ALL_TYPES)
    for qtype, params in sample_params.items():
        text = render_question(qtype, params, 0.3)
        assert re.search(r"\(GSD: [0-9.]+m\)$", text), text
        if "min_ha" in params and qtype != "complex_size_filter":
            assert str(params["min_ha"]).rstrip("0").rstrip(".") in text or \
                str(params["min_ha"]) in text, text


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def test_generation_deterministic_bytes(corpus, tmp_path):
    a = generate_questions(corpus, size=24, seed=7)
    b = generate_questions(corpus, size=24, seed=7)
    emit_dataset(a, tmp_path / "a.json")
    emit_dataset(b, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_generation_seed_changes_output(corpus):
    a = generate_questions(corpus, size=24, seed=7)
    b = generate_questions(corpus, size=24, seed=8)
    assert [r.question for r in a] != [r.question for r in b]


def test_single_class_corpus_fires_only_eligible_templates():
    side = 224
    masks = {"water": blob(side, side, [(10, 60, 10, 60)])}
    corpus = SimpleCorpus({"only": (1.0, masks)})
    records = generate_questions(corpus, size=30, seed=3)
    assert records, "water alone still admits tier-1 questions"
    assert all(r.tier == 1 or "water" in r.question for r in records)
    assert all("roof" not in r.question for r in records)


def test_ids_are_sequential_and_prefixed(corpus):
    records = generate_questions(corpus, size=20, seed=5)
    assert [r.id for r in records] == [f"SQuID_{i:04d}" for i in range(len(records))]


def test_answers_inside_their_ranges(corpus):
    for r in generate_questions(corpus, size=40, seed=11):
        if r.acceptable_range == RANGE_EXACT:
            assert isinstance(r.answer, str)
        else:
            lo, hi = r.acceptable_range
            assert lo <= float(r.answer) <= hi


def test_distance_questions_state_gsd(corpus):
    for r in generate_questions(corpus, size=40, seed=11):
        assert f"(GSD: {r.gsd}m)" in r.question


# ---------------------------------------------------------------------------
# Canonical plans and mock tables
# ---------------------------------------------------------------------------

def test_canonical_plans_validate(corpus):
    topics = corpus.available_classes("img_a")
    for r in generate_questions(corpus, size=40, seed=13):
        plan = canonical_plan(r.type, r.params)
        assert validate_plan(plan, topics) == []
        expected = "category" if r.acceptable_range == RANGE_EXACT else "number"
        assert plan.answer_kind == expected


def test_mock_table_keys_are_question_ids(corpus):
    records = generate_questions(corpus, size=12, seed=2)
    table = build_mock_table(records)
    assert set(table) == {r.id for r in records}
    assert all(text.startswith("answer:") for text in table.values())


# ---------------------------------------------------------------------------
# Dataset files
# ---------------------------------------------------------------------------

def test_dataset_round_trip(corpus, tmp_path):
    records = generate_questions(corpus, size=16, seed=9)
    path = tmp_path / "dataset.json"
    emit_dataset(records, path)
    loaded = load_dataset(path)
    assert len(loaded) == len(records)
    for a, b in zip(records, loaded):
        assert (a.id, a.question, a.answer, a.type, a.tier, a.gsd) == (
            b.id, b.question, b.answer, b.type, b.tier, b.gsd
        )
        assert a.acceptable_range == b.acceptable_range
    # Emitted entries carry exactly the canonical field set.
    entries = json.loads(path.read_text())
    assert all(
        list(e) == ["id", "image", "question", "answer", "type", "tier", "gsd",
                    "acceptable_range"]
        for e in entries
    )
    # Load -> save is byte-stable.
    again = tmp_path / "again.json"
    emit_dataset(loaded, again)
    assert again.read_bytes() == path.read_bytes()


def test_generated_text_states_thresholds(corpus):
    from rasterqa.questions import _num

    for r in generate_questions(corpus, size=40, seed=21):
        if "min_ha" in r.params and r.type != "complex_size_filter":
            assert _num(r.params["min_ha"]) in r.question, r.question
        if "distance_m" in r.params:
            assert f"{_num(r.params['distance_m'])}m" in r.question, r.question


def test_empty_dataset_round_trip(tmp_path):
    emit_dataset([], tmp_path / "empty.json")
    assert json.loads((tmp_path / "empty.json").read_text()) == []
    assert load_dataset(tmp_path / "empty.json") == []


def test_loader_rejects_answer_outside_range(tmp_path):
    bad = [{
        "id": "SQuID_0000", "image": "x", "question": "q? (GSD: 0.3m)", "answer": 50,
        "type": "count", "tier": 1, "gsd": 0.3, "acceptable_range": [3, 5],
    }]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    with pytest.raises(DomainError) as e:
        load_dataset(path)
    assert "outside range" in str(e.value)


def test_loader_rejects_tier_type_mismatch(tmp_path):
    bad = [{
        "id": "SQuID_0000", "image": "x", "question": "q? (GSD: 0.3m)", "answer": 4,
        "type": "count", "tier": 3, "gsd": 0.3, "acceptable_range": [3, 5],
    }]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    with pytest.raises(DomainError):
        load_dataset(path)
