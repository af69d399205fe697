"""Logit fusion, mode filtering, and class-map splitting."""

import numpy as np
import pytest

from rasterqa.errors import DomainError, StructuralError
from rasterqa.fusion import (
    ClassMap,
    ClassMergeRule,
    LogitMap,
    fuse_logits,
    masks_from_classmap,
    mode_filter,
    split_instances,
)
from rasterqa.raster import BinaryMask

from oracles import fuse_logits_per_pixel, mode_filter_per_pixel


def logit_map(model_id, classes, values):
    return LogitMap(model_id, classes, np.asarray(values, dtype=float))


# ---------------------------------------------------------------------------
# fuse_logits
# ---------------------------------------------------------------------------

def test_single_model_identity_rules_is_argmax():
    rng = np.random.RandomState(5)
    values = rng.randn(3, 8, 8)
    m = logit_map("a", ["c0", "c1", "c2"], values)
    rules = [ClassMergeRule(c, [("a", c, 1.0)]) for c in m.classes]
    fused = fuse_logits([m], rules)
    assert np.array_equal(fused.labels, values.argmax(axis=0))


def test_cross_model_max_combination():
    # urban <- max(A.urban, B.road): the higher logit of the two wins.
    a = logit_map("A", ["urban"], [[[2.0]]])
    b = logit_map("B", ["road", "grass"], [[[3.0]], [[0.1]]])
    rules = [
        ClassMergeRule("urban", [("A", "urban", 1.0), ("B", "road", 1.0)]),
        ClassMergeRule("grass", [("B", "grass", 1.0)]),
    ]
    fused = fuse_logits([a, b], rules)
    assert fused.labels[0, 0] == 0  # urban scored 3.0 via B.road


def test_zero_weight_disables_an_input():
    a = logit_map("A", ["solar", "other"], [[[5.0]], [[0.5]]])
    rules_on = [
        ClassMergeRule("solar", [("A", "solar", 1.0)]),
        ClassMergeRule("other", [("A", "other", 1.0)]),
    ]
    rules_off = [
        ClassMergeRule("solar", [("A", "solar", 0.0)]),
        ClassMergeRule("other", [("A", "other", 1.0)]),
    ]
    assert fuse_logits([a], rules_on).labels[0, 0] == 0
    assert fuse_logits([a], rules_off).labels[0, 0] == 1  # falls to next best


def test_tie_broken_by_rule_order():
    a = logit_map("A", ["x", "y"], [[[1.0]], [[1.0]]])
    rules = [ClassMergeRule("first", [("A", "y", 1.0)]), ClassMergeRule("second", [("A", "x", 1.0)])]
    assert fuse_logits([a], rules).labels[0, 0] == 0


def test_unresolved_rule_input_is_configuration_error():
    a = logit_map("A", ["x"], [[[1.0]]])
    with pytest.raises(DomainError):
        fuse_logits([a], [ClassMergeRule("x", [("B", "x", 1.0)])])
    with pytest.raises(DomainError):
        fuse_logits([a], [ClassMergeRule("x", [("A", "nope", 1.0)])])


def test_dimension_mismatch_rejected():
    a = logit_map("A", ["x"], np.zeros((1, 4, 4)))
    b = logit_map("B", ["y"], np.zeros((1, 5, 4)))
    with pytest.raises(StructuralError):
        fuse_logits([a, b], [ClassMergeRule("x", [("A", "x", 1.0)])])


def test_weight_scaling_leaves_argmax_unchanged():
    rng = np.random.RandomState(6)
    a = logit_map("A", ["p", "q"], rng.randn(2, 10, 10))
    b = logit_map("B", ["r"], rng.randn(1, 10, 10))
    weights = [0.7, 1.3, 0.4]
    for scale in (1.0, 3.5):
        rules = [
            ClassMergeRule("p", [("A", "p", weights[0] * scale)]),
            ClassMergeRule("q", [("A", "q", weights[1] * scale), ("B", "r", weights[2] * scale)]),
        ]
        if scale == 1.0:
            base = fuse_logits([a, b], rules).labels
        else:
            assert np.array_equal(fuse_logits([a, b], rules).labels, base)


def test_fusion_matches_per_pixel_oracle():
    rng = np.random.RandomState(17)
    for _ in range(10):
        a = logit_map("A", ["u", "v", "w"], rng.randn(3, 12, 12))
        b = logit_map("B", ["m", "n"], rng.randn(2, 12, 12))
        rules = [
            ClassMergeRule("one", [("A", "u", 1.0), ("B", "m", 0.5)]),
            ClassMergeRule("two", [("A", "v", 2.0)]),
            ClassMergeRule("three", [("A", "w", 1.0), ("B", "n", 1.5)]),
        ]
        fused = fuse_logits([a, b], rules)
        oracle = fuse_logits_per_pixel(
            {"A": (a.classes, a.values), "B": (b.classes, b.values)},
            [(r.output_class, r.inputs) for r in rules],
        )
        assert np.array_equal(fused.labels, oracle)


# ---------------------------------------------------------------------------
# mode_filter
# ---------------------------------------------------------------------------

def test_mode_filter_k1_is_identity():
    rng = np.random.RandomState(18)
    cm = ClassMap(["a", "b"], rng.randint(0, 2, (9, 9)).astype(np.int32))
    assert np.array_equal(mode_filter(cm, 1).labels, cm.labels)


def test_mode_filter_uniform_map_unchanged():
    cm = ClassMap(["a", "b"], np.zeros((7, 7), dtype=np.int32))
    for k in (1, 3, 5, 7):
        assert np.array_equal(mode_filter(cm, k).labels, cm.labels)


def test_mode_filter_removes_speck():
    labels = np.zeros((3, 3), dtype=np.int32)
    labels[1, 1] = 1
    cm = ClassMap(["a", "b"], labels)
    assert mode_filter(cm, 3).labels[1, 1] == 0  # 8 votes beat 1


def test_mode_filter_even_k_rejected():
    cm = ClassMap(["a"], np.zeros((3, 3), dtype=np.int32))
    with pytest.raises(DomainError):
        mode_filter(cm, 2)


def test_mode_filter_matches_per_pixel_oracle():
    rng = np.random.RandomState(19)
    for _ in range(12):
        n_classes = int(rng.randint(2, 5))
        labels = rng.randint(0, n_classes, (rng.randint(4, 20), rng.randint(4, 20)))
        cm = ClassMap([f"c{i}" for i in range(n_classes)], labels.astype(np.int32))
        for k in (3, 5):
            got = mode_filter(cm, k).labels
            expected = mode_filter_per_pixel(labels, k, n_classes)
            assert np.array_equal(got, expected)


def test_mode_filter_tie_prefers_prefilter_label():
    # 2x2 window world: a 1x2 map has a 1-1 tie inside any 3x3 window.
    labels = np.array([[0, 1]], dtype=np.int32)
    out = mode_filter(ClassMap(["a", "b"], labels), 3).labels
    assert out.tolist() == [[0, 1]]  # each keeps its own label on the tie


def _banded_map(rng, side, k, n_classes):
    """Random band partition whose windows all have strict majorities."""
    labels = np.zeros((side, side), dtype=np.int32)
    pos, label = 0, 0
    while pos < side:
        width = int(rng.randint(k + 1, k + 6))
        labels[:, pos : pos + width] = label % n_classes
        pos += width
        label += 1
    if rng.rand() < 0.5:
        labels = labels.T
    return labels


def test_mode_filter_fixed_point_on_tie_free_maps():
    # On maps without window ties, a second pass changes nothing.
    rng = np.random.RandomState(23)
    for _ in range(10):
        for k in (3, 5):
            labels = _banded_map(rng, 24, k, 3)
            cm = ClassMap(["a", "b", "c"], labels)
            once = mode_filter(cm, k)
            twice = mode_filter(once, k)
            assert np.array_equal(twice.labels, once.labels)


# ---------------------------------------------------------------------------
# masks_from_classmap / split_instances
# ---------------------------------------------------------------------------

def test_masks_partition_the_image():
    rng = np.random.RandomState(20)
    labels = rng.randint(0, 3, (15, 15)).astype(np.int32)
    cm = ClassMap(["a", "b", "c"], labels)
    masks = masks_from_classmap(cm)
    total = sum(int(m.data.sum()) for m in masks.values())
    assert total == labels.size
    union = np.zeros_like(labels, dtype=bool)
    for m in masks.values():
        assert not (union & m.data).any()
        union |= m.data
    assert union.all()


def test_masks_round_trip_to_classmap():
    rng = np.random.RandomState(22)
    labels = rng.randint(0, 4, (10, 10)).astype(np.int32)
    cm = ClassMap(["a", "b", "c", "d"], labels)
    masks = masks_from_classmap(cm)
    rebuilt = np.zeros_like(labels)
    for idx, name in enumerate(cm.classes):
        rebuilt[masks[name].data] = idx
    assert np.array_equal(rebuilt, labels)


def test_uniform_map_one_full_mask():
    cm = ClassMap(["a", "b"], np.zeros((4, 4), dtype=np.int32))
    masks = masks_from_classmap(cm)
    assert masks["a"].data.all()
    assert not masks["b"].data.any()


def test_merge_rules_load_from_config_file(tmp_path):
    from rasterqa.fusion import load_merge_rules

    path = tmp_path / "rules.json"
    path.write_text(
        """{"rules": [
          {"output_class": "urban", "kind": "semantic",
           "inputs": [{"model": "DG", "class": "urban"},
                       {"model": "EV", "class": "road", "weight": 0.8},
                       {"model": "EV", "class": "building", "weight": 0.8}]},
          {"output_class": "building", "kind": "instance",
           "inputs": [{"model": "AIRS", "class": "roof"}]}
        ]}"""
    )
    rules = load_merge_rules(path)
    assert [r.output_class for r in rules] == ["urban", "building"]
    assert rules[0].inputs == [("DG", "urban", 1.0), ("EV", "road", 0.8), ("EV", "building", 0.8)]
    assert rules[1].kind == "instance"


def test_split_instances_counts():
    mask = np.zeros((8, 8), dtype=bool)
    assert split_instances(BinaryMask("roof", mask)) == []
    mask[0:2, 0:2] = True
    mask[5:7, 5:7] = True
    assert len(split_instances(BinaryMask("roof", mask))) == 2
    # Touching blobs merge under 8-connectivity.
    mask[2, 2] = True  # diagonal bridge between the two
    mask[3, 3] = True
    mask[4, 4] = True
    assert len(split_instances(BinaryMask("roof", mask))) == 1
