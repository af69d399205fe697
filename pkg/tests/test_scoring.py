"""Range-based scoring, aggregation, sensitivity, and report files."""

import pytest

from rasterqa.errors import DomainError
from rasterqa.questions import ALL_TYPES, QuestionRecord
from rasterqa.scoring import (
    Prediction,
    aggregate,
    emit_report,
    emit_sensitivity,
    load_predictions,
    load_report,
    range_sensitivity,
    save_predictions,
    score_prediction,
)


def question(qid, answer, qrange, qtype="percentage", tier=1):
    return QuestionRecord(
        id=qid, image="img", question="q?", answer=answer,
        type=qtype, tier=tier, gsd=0.3, acceptable_range=qrange,
    )


# ---------------------------------------------------------------------------
# score_prediction
# ---------------------------------------------------------------------------

def test_value_inside_range_is_correct():
    q = question("q1", 14.6, (12.86, 16.34))
    assert score_prediction(Prediction("q1", 13.66), q) is True


def test_value_outside_range_is_incorrect():
    q = question("q1", 5, (4, 6), qtype="count")
    assert score_prediction(Prediction("q1", 9), q) is False


def test_range_bounds_inclusive():
    q = question("q1", 5, (4, 6), qtype="count")
    assert score_prediction(Prediction("q1", 6), q) is True
    assert score_prediction(Prediction("q1", 4), q) is True
    assert score_prediction(Prediction("q1", 6.0000001), q) is False


def test_categorical_match_is_forgiving_about_case_and_space():
    q = question("q1", "yes", "exact", qtype="binary_comparison")
    assert score_prediction(Prediction("q1", " YES "), q) is True
    assert score_prediction(Prediction("q1", "no"), q) is False


def test_type_mismatch_is_incorrect_not_crash():
    numeric = question("q1", 5, (4, 6), qtype="count")
    assert score_prediction(Prediction("q1", "five"), numeric) is False
    categorical = question("q2", "yes", "exact", qtype="binary_presence")
    assert score_prediction(Prediction("q2", 1.0), categorical) is False


def test_failed_statuses_score_incorrect():
    q = question("q1", 5, (4, 6), qtype="count")
    assert score_prediction(Prediction("q1", None, "unparseable"), q) is False
    assert score_prediction(Prediction("q1", None, "execution_error"), q) is False


def test_id_mismatch_is_an_error():
    q = question("q1", 5, (4, 6), qtype="count")
    with pytest.raises(DomainError):
        score_prediction(Prediction("q2", 5), q)


# ---------------------------------------------------------------------------
# aggregate
# ---------------------------------------------------------------------------

def ten_question_set():
    qs = [
        question("q0", 10.0, (8.0, 12.0), "percentage", 1),
        question("q1", 3, (2, 4), "count", 1),
        question("q2", "yes", "exact", "binary_comparison", 1),
        question("q3", 20.0, (18.0, 22.0), "size", 1),
        question("q4", 5.0, (2.75, 7.25), "proximity_percentage", 2),
        question("q5", 7, (5, 9), "building_proximity", 2),
        question("q6", "connected", "exact", "fragmentation", 2),
        question("q7", 4.0, (3.91, 4.09), "complex_multi_condition", 3),
        question("q8", 1.5, (1.47, 1.53), "complex_average", 3),
        question("q9", 0.0, (0.0, 0.0), "complex_size_filter", 3),
    ]
    preds = [
        Prediction("q0", 10.5),          # correct
        Prediction("q1", 5),             # wrong
        Prediction("q2", "yes"),         # correct
        Prediction("q3", 30.0),          # wrong
        Prediction("q4", 7.25),          # correct (boundary)
        Prediction("q5", 6),             # correct
        Prediction("q6", "fragmented"),  # wrong
        Prediction("q7", None, "unparseable"),
        Prediction("q8", 1.5),           # correct
        # q9 left unpredicted: counted incorrect, not dropped
    ]
    return qs, preds


def test_aggregate_hand_computed_cells():
    qs, preds = ten_question_set()
    table = aggregate(preds, qs)
    assert table.overall.correct == 5 and table.overall.total == 10
    assert table.tiers[1].correct == 2 and table.tiers[1].total == 4
    assert table.tiers[2].correct == 2 and table.tiers[2].total == 3
    assert table.tiers[3].correct == 1 and table.tiers[3].total == 3
    assert table.types["count"].correct == 0
    assert table.types["percentage"].correct == 1
    assert sum(c.correct for c in table.tiers.values()) == table.overall.correct


def test_aggregate_all_correct_everywhere():
    qs = [question(f"q{i}", 1.0, (0.5, 1.5)) for i in range(4)]
    preds = [Prediction(q.id, 1.0) for q in qs]
    table = aggregate(preds, qs)
    assert table.overall.accuracy == 1.0
    assert table.tiers[1].accuracy == 1.0


def test_aggregate_rejects_orphan_predictions():
    qs = [question("q0", 1.0, (0.5, 1.5))]
    with pytest.raises(DomainError) as e:
        aggregate([Prediction("ghost", 1.0)], qs)
    assert "ghost" in str(e.value)


def test_aggregate_covers_all_types_even_empty():
    qs, preds = ten_question_set()
    table = aggregate(preds, qs)
    assert set(table.types) == set(ALL_TYPES)
    assert table.types["power_calculation"].total == 0


# ---------------------------------------------------------------------------
# range_sensitivity
# ---------------------------------------------------------------------------

def sensitivity_fixture():
    """Predictions with hand-placed distances to their ranges.

    Answers are 100 with range [90, 110] (half-width 10); predictions sit at
    known multiples so each multiplier step flips exactly one to correct.
    """
    qs = [question(f"q{i}", 100.0, (90.0, 110.0), "proximity_area", 2) for i in range(6)]
    values = [100.0, 111.0, 113.0, 117.0, 119.0, 150.0]
    # offsets 0, 11, 13, 17, 19, 50 -> correct at f >= 1.0/1.1/1.3/1.7/1.9/5.0
    preds = [Prediction(q.id, v) for q, v in zip(qs, values)]
    return qs, preds


def test_sensitivity_baseline_and_hand_values():
    qs, preds = sensitivity_fixture()
    points = range_sensitivity(preds, qs, [1.0, 1.2, 1.4, 1.6, 1.8, 2.0])
    acc = {p.multiplier: p.accuracy for p in points}
    assert acc[1.0] == pytest.approx(1 / 6)
    assert acc[1.2] == pytest.approx(2 / 6)
    assert acc[1.4] == pytest.approx(3 / 6)
    assert acc[1.6] == pytest.approx(3 / 6)
    assert acc[1.8] == pytest.approx(4 / 6)
    assert acc[2.0] == pytest.approx(5 / 6)
    assert points[0].delta == 0.0
    assert points[-1].delta == pytest.approx(4 / 6)


def test_sensitivity_monotone_non_decreasing():
    qs, preds = sensitivity_fixture()
    points = range_sensitivity(preds, qs, [1.0, 1.1, 1.25, 1.5, 1.75, 2.0, 3.0])
    accs = [p.accuracy for p in points]
    assert all(b >= a for a, b in zip(accs, accs[1:]))


def test_sensitivity_categorical_unchanged():
    qs = [question("q0", "yes", "exact", "binary_presence")]
    preds = [Prediction("q0", "no")]
    points = range_sensitivity(preds, qs, [1.0, 2.0])
    assert [p.accuracy for p in points] == [0.0, 0.0]


def test_sensitivity_rejects_bad_multipliers():
    qs, preds = sensitivity_fixture()
    with pytest.raises(DomainError):
        range_sensitivity(preds, qs, [0.9, 1.0])
    with pytest.raises(DomainError):
        range_sensitivity(preds, qs, [2.0, 1.0])


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------

def test_predictions_round_trip(tmp_path):
    preds = [
        Prediction("q0", 13.66, "answered", trace="Initial agric shapes: 1"),
        Prediction("q1", "yes"),
        Prediction("q2", None, "unparseable"),
    ]
    path = tmp_path / "preds.jsonl"
    save_predictions(preds, path)
    assert load_predictions(path) == preds


def test_report_round_trip(tmp_path):
    qs, preds = ten_question_set()
    table = aggregate(preds, qs)
    emit_report(table, tmp_path)
    assert load_report(tmp_path) == table


def test_empty_run_produces_header_only_files(tmp_path):
    table = aggregate([], [])
    paths = emit_report(table, tmp_path)
    lines = paths["results"].read_text().strip().splitlines()
    assert lines == ["question_id,tier,type,status,correct"]
    report_lines = paths["report"].read_text().strip().splitlines()
    assert report_lines[0] == "scope,key,correct,total,accuracy"
    # All 24 types still get a row, at zero counts.
    assert sum(1 for l in report_lines if l.startswith("type,")) == len(ALL_TYPES)


def test_sensitivity_csv(tmp_path):
    qs, preds = sensitivity_fixture()
    points = range_sensitivity(preds, qs, [1.0, 2.0])
    emit_sensitivity(points, tmp_path / "sens.csv")
    lines = (tmp_path / "sens.csv").read_text().strip().splitlines()
    assert lines[0] == "multiplier,accuracy,delta"
    assert len(lines) == 3


def test_figures_render(tmp_path):
    from rasterqa import figures

    qs, preds = ten_question_set()
    table = aggregate(preds, qs)
    out = figures.render_report_figures(table, tmp_path)
    for p in out:
        assert p.exists() and p.stat().st_size > 0
    points = range_sensitivity(preds, qs, [1.0, 1.5, 2.0])
    fig = figures.render_sensitivity_figure(points, tmp_path / "sens.png")
    assert fig.exists() and fig.stat().st_size > 0
