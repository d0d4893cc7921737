import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiertree import ValidationError, coverage_report, parse_predictions, serialize_jsonl
from hiertree.ingest import LabelRegistry

SAMPLE_VIDEO = {
    "video_id": "sample",
    "truth": None,
    "top": [
        {"label": "shooting goal (soccer)", "score": 0.58},
        {"label": "passing soccer ball", "score": 0.18},
        {"label": "playing field hockey", "score": 0.06},
        {"label": "kicking soccer ball", "score": 0.06},
        {"label": "juggling soccer ball", "score": 0.04},
    ],
}


def test_sample_video_record():
    ds = parse_predictions(json.dumps(SAMPLE_VIDEO), "jsonl", k=5)
    (rec,) = ds.records
    names = [ds.registry.names[lab] for lab in rec.labels]
    assert names == [e["label"] for e in SAMPLE_VIDEO["top"]]
    assert [s for _, s in rec.top] == [0.58, 0.18, 0.06, 0.06, 0.04]
    assert ds.k == 5 and rec.truth is None


def test_empty_stream():
    with pytest.raises(ValidationError, match="no records"):
        parse_predictions("", "jsonl", k=5)
    with pytest.raises(ValidationError, match="no records"):
        parse_predictions("video_id,truth,label1,score1\n", "csv", k=1)


def test_truncates_to_highest_scores():
    raw = [("a", 0.05), ("b", 0.3), ("c", 0.01), ("d", 0.2), ("e", 0.15), ("f", 0.25), ("g", 0.04)]
    line = json.dumps({"video_id": "x", "truth": "b", "top": [{"label": l, "score": s} for l, s in raw]})
    ds = parse_predictions(line, "jsonl", k=5)
    expected = [lab for lab, _ in sorted(raw, key=lambda e: -e[1])[:5]]
    rec = ds.records[0]
    assert [ds.registry.names[lab] for lab in rec.labels] == expected


def test_equal_scores_keep_listed_order():
    line = json.dumps({"video_id": "x", "top": [{"label": "p", "score": 0.2}, {"label": "q", "score": 0.2},
                                                {"label": "r", "score": 0.6}]})
    ds = parse_predictions(line, "jsonl", k=3)
    assert [ds.registry.names[lab] for lab in ds.records[0].labels] == ["r", "p", "q"]


def test_csv_format_and_empty_truth():
    text = "video_id,truth,label1,score1,label2,score2\nv1,cat,cat,0.7,dog,0.2\nv2,,dog,0.6,cat,0.3\n"
    ds = parse_predictions(text, "csv", k=2)
    assert ds.registry.names == ("cat", "dog")
    assert ds.records[0].truth == 0 and ds.records[1].truth is None
    assert ds.records[1].labels == (1, 0)


@pytest.mark.parametrize(
    "line, match",
    [
        ('{"video_id": "x", "top": [', "line 2: malformed JSON"),
        ('{"video_id": "x", "top": [{"label": "a", "score": 0.5}, {"label": "a", "score": 0.4}]}', "duplicate"),
        ('{"video_id": "x", "top": [{"label": "a", "score": 1.5}, {"label": "b", "score": 0.4}]}', "outside"),
        ('{"video_id": "x", "top": [{"label": "a", "score": -0.1}, {"label": "b", "score": 0.4}]}', "outside"),
        ('{"video_id": "x", "top": [{"label": "a", "score": 0.5}, {"label": "b"}]}', "all entries or none"),
        ('{"video_id": "x", "top": [{"label": "a", "score": 0.5}]}', "fewer than k"),
    ],
)
def test_malformed_lines_report_line_number(line, match):
    good = '{"video_id": "ok", "top": [{"label": "a", "score": 0.5}, {"label": "b", "score": 0.4}]}'
    with pytest.raises(ValidationError, match=match) as err:
        parse_predictions(good + "\n" + line, "jsonl", k=2)
    assert "line 2" in str(err.value)


def test_pad_short_accepts_smaller_sets():
    text = '{"video_id": "a", "top": [{"label": "x", "score": 0.9}]}\n' \
           '{"video_id": "b", "top": [{"label": "x", "score": 0.5}, {"label": "y", "score": 0.4}]}\n'
    ds = parse_predictions(text, "jsonl", k=2, pad_short=True)
    assert [len(r.top) for r in ds.records] == [1, 2]


def test_registry_first_appearance_order():
    text = '{"video_id": "a", "truth": "t", "top": [{"label": "z", "score": 0.1}, {"label": "y", "score": 0.9}]}\n' \
           '{"video_id": "b", "truth": "z", "top": [{"label": "w", "score": 0.5}, {"label": "t", "score": 0.4}]}\n'
    ds = parse_predictions(text, "jsonl", k=2)
    # truth first, then predictions in rank order
    assert ds.registry.names == ("t", "y", "z", "w")


def test_explicit_label_universe():
    text = '{"video_id": "a", "top": [{"label": "x"}, {"label": "y"}]}\n'
    ds = parse_predictions(text, "jsonl", k=2, labels=["y", "x", "never"])
    assert ds.registry.names == ("y", "x", "never")
    report = coverage_report(ds)
    assert report.uncovered == ["never"]
    with pytest.raises(ValidationError, match="not in the label universe"):
        parse_predictions(text, "jsonl", k=2, labels=["x", "q"])


def test_registry_invariants():
    with pytest.raises(ValidationError):
        LabelRegistry(("a",))
    with pytest.raises(ValidationError):
        LabelRegistry(("a", "a"))
    with pytest.raises(ValidationError):
        LabelRegistry(("a", ""))


def test_coverage_counts(f1_dataset):
    assert coverage_report(f1_dataset).as_dict() == {"a": 3, "b": 3, "c": 2}


def test_coverage_label_in_every_record():
    text = "".join(
        json.dumps({"video_id": str(i), "top": [{"label": "common"}, {"label": f"x{i}"}]}) + "\n" for i in range(7)
    )
    counts = coverage_report(parse_predictions(text, "jsonl", k=2)).as_dict()
    assert counts["common"] == 7


def test_label_only_as_truth_is_flagged():
    text = json.dumps({"video_id": "1", "truth": "ghost", "top": [{"label": "a"}, {"label": "b"}]})
    report = coverage_report(parse_predictions(text, "jsonl", k=2))
    assert report.as_dict()["ghost"] == 0 and report.uncovered == ["ghost"]


label_names = st.sampled_from(["a", "b", "c", "d e", "f,g", "h'i", "ünï", "j"])


@st.composite
def prediction_logs(draw):
    k = draw(st.integers(1, 4))
    n = draw(st.integers(1, 12))
    lines = []
    for i in range(n):
        labels = draw(st.lists(label_names, min_size=k, max_size=6, unique=True))
        scores = draw(st.lists(st.floats(0, 1), min_size=len(labels), max_size=len(labels)))
        truth = draw(st.one_of(st.none(), label_names))
        top = [{"label": lab, "score": s} for lab, s in zip(labels, scores)]
        lines.append(json.dumps({"video_id": f"v{i}", "truth": truth, "top": top}))
    return "\n".join(lines), k


@settings(max_examples=150, deadline=None)
@given(prediction_logs())
def test_jsonl_round_trip(log):
    text, k = log
    try:
        ds = parse_predictions(text, "jsonl", k)
    except ValidationError:
        return  # registry of fewer than two labels
    assert parse_predictions(serialize_jsonl(ds), "jsonl", k) == ds


@settings(max_examples=150, deadline=None)
@given(prediction_logs())
def test_truncation_preserves_relative_order(log):
    text, k = log
    try:
        ds = parse_predictions(text, "jsonl", k)
    except ValidationError:
        return
    wide = parse_predictions(text, "jsonl", 6, pad_short=True)
    for narrow_rec, wide_rec in zip(ds.records, wide.records):
        narrow_names = [ds.registry.names[x] for x in narrow_rec.labels]
        wide_names = [wide.registry.names[x] for x in wide_rec.labels]
        assert narrow_names == wide_names[:k]
