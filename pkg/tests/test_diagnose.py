import json

import numpy as np
import pytest

from helpers import dataset_from_sets
from hiertree import (
    ValidationError,
    agglomerate,
    cluster_profile,
    confidence_distance,
    count_cooccurrences,
    late_merger_report,
)
from hiertree.diagnose import balance_entropy, placement_steps
from hiertree.synth import chained_outlier_distances


def test_outlier_ranks_last():
    # a, b, c close together, d far from everything
    sets = [("a", "b"), ("a", "c"), ("b", "c"), ("a", "b", "c"), ("a", "d"), ("b", "c")]
    stats = count_cooccurrences(dataset_from_sets(sets, k=3))
    t = agglomerate(confidence_distance(stats), "average")
    report = late_merger_report(t, stats, m=3, q=1)
    assert report.late == ("d",)
    assert report.labels[-1].label == "d"
    assert report.labels[-1].merge_step == 3


def test_zero_appearance_label_ranks_last():
    from hiertree.cooccur import DistanceMatrix

    sets = [("a", "b"), ("a", "c"), ("b", "c"), ("c", "d")]
    stats = count_cooccurrences(dataset_from_sets(sets, truths=["ghost", None, None, None]))
    # a distance matrix from elsewhere that places "ghost" right next to "a"
    n = stats.n_labels
    values = np.full((n, n), 0.8)
    np.fill_diagonal(values, 0.0)
    g, a = stats.index("ghost"), stats.index("a")
    values[g, a] = values[a, g] = 0.1
    t = agglomerate(DistanceMatrix("confidence", stats.labels, values), "single")
    report = late_merger_report(t, stats, m=2, q=2)
    assert report.labels[-1].label == "ghost" and report.labels[-1].appearances == 0
    assert report.late[0] == "ghost"


def test_placement_steps_on_chain():
    # single linkage on a line adds one leaf per merge
    x = np.array([0.0, 1.0, 3.0, 6.0, 10.0])
    t = agglomerate(np.abs(x[:, None] - x[None, :]), "single")
    step, height = placement_steps(t, 3)
    assert step.tolist() == [1, 1, 1, 2, 3]
    assert height.tolist() == [2.0, 2.0, 2.0, 3.0, 4.0]


def test_report_fields_and_medians(f1_dataset):
    stats = count_cooccurrences(f1_dataset)
    t = agglomerate(confidence_distance(stats), "single")
    report = late_merger_report(t, stats, m=2, q=1)
    assert [d.label for d in report.labels] == ["a", "b", "c"]
    assert [d.merge_step for d in report.labels] == [1, 1, 2]
    assert report.well_placed == ("a",) and report.late == ("c",)
    assert (report.well_placed_median, report.late_median, report.overall_median) == (3.0, 2.0, 3.0)
    doc = json.loads(report.to_json())
    assert list(doc) == ["hiertree_version", "m", "q", "medians", "well_placed", "late", "labels"]
    assert doc["labels"][2] == {"label": "c", "appearances": 2, "top1": 0, "merge_step": 2,
                                "merge_height": pytest.approx(0.591751709536)}


def test_report_parameter_checks(f1_dataset):
    stats = count_cooccurrences(f1_dataset)
    t = agglomerate(confidence_distance(stats), "single")
    for m, q in [(1, 1), (4, 1), (2, 0), (2, 4)]:
        with pytest.raises(ValidationError):
            late_merger_report(t, stats, m=m, q=q)


def test_balance_entropy():
    assert balance_entropy([5, 5, 5, 5]) == pytest.approx(1.0)
    assert balance_entropy([7]) == 1.0
    assert balance_entropy([997, 1, 1, 1]) < 0.05
    p = np.array([2, 1]) / 3
    assert balance_entropy([2, 1]) == pytest.approx(-(p * np.log(p)).sum() / np.log(2))


def test_cluster_profile(f1_dataset):
    t = agglomerate(confidence_distance(count_cooccurrences(f1_dataset)), "single")
    prof = cluster_profile(t, 2)
    assert prof.sizes == (2, 1) and prof.members == (("a", "b"), ("c",))
    assert prof.balance == pytest.approx(balance_entropy([2, 1]))
    doc = json.loads(prof.to_json())
    assert doc["clusters"] == [{"size": 2, "members": ["a", "b"]}, {"size": 1, "members": ["c"]}]


def test_ward_more_balanced_than_single_on_chain():
    D, part = chained_outlier_distances(seed=3)
    k = len(set(part)) - 1
    ward = cluster_profile(agglomerate(D, "ward"), k).balance
    single = cluster_profile(agglomerate(D, "single"), k).balance
    assert ward > single
