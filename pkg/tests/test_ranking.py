import json

import numpy as np
import pytest

from cqa_rank import ranking
from cqa_rank.corpus import Label
from cqa_rank.exceptions import ConfigError, FormatError, IntegrityError
from cqa_rank.ranking import RankedThread, ScoredComment

G, P, B = Label.GOOD, Label.POTENTIALLY_USEFUL, Label.BAD


def ranked(query_id, labels, scores=None):
    scores = scores or [1.0 - 0.1 * i for i in range(len(labels))]
    items = [ScoredComment(f"{query_id}_C{i + 1}", score, i + 1, label)
             for i, (label, score) in enumerate(zip(labels, scores))]
    return RankedThread(query_id, items)


def brute_force_ap(relevances):
    """Precision at every relevant position, summed directly."""
    positions = [k for k, relevant in enumerate(relevances, start=1) if relevant]
    if not positions:
        return None
    return sum(sum(relevances[:k]) / k for k in positions) / len(positions)


def test_rank_thread():
    result = ranking.rank_thread("Q1", [ScoredComment("c2", 0.1, 2), ScoredComment("c1", 0.9, 1)])
    assert result.comment_ids == ["c1", "c2"]
    result = ranking.rank_thread("Q1", [ScoredComment("c3", 0.5, 3), ScoredComment("c1", 0.5, 1),
                                        ScoredComment("c2", 0.5, 2)])
    assert result.comment_ids == ["c1", "c2", "c3"]
    assert ranking.rank_thread("Q1", [ScoredComment("c1", 0.3, 1)]).comment_ids == ["c1"]


@pytest.mark.parametrize("prob, search_rank, expected", [
    (0.8, 1, 0.8),
    (0.8, 4, 0.2),
    (0.0, 7, 0.0),
])
def test_subtask_c_score(prob, search_rank, expected):
    assert ranking.subtask_c_score(prob, search_rank) == pytest.approx(expected)


def test_subtask_c_score_monotone():
    probs = np.linspace(0.0, 1.0, 11)
    for search_rank in range(1, 11):
        scores = [ranking.subtask_c_score(p, search_rank) for p in probs]
        assert scores == sorted(scores)
    for prob in probs:
        scores = [ranking.subtask_c_score(prob, rank) for rank in range(1, 11)]
        assert scores == sorted(scores, reverse=True)
    with pytest.raises(ValueError):
        ranking.subtask_c_score(0.5, 0)


def test_combiners():
    assert ranking.make_combiner("sum")(0.5, 2) == pytest.approx(1.0)
    assert ranking.make_combiner("weighted", 0.25)(0.8, 4) == pytest.approx(0.25 * 0.8 + 0.75 * 0.25)
    with pytest.raises(ConfigError):
        ranking.make_combiner("max")
    with pytest.raises(ConfigError):
        ranking.weighted_combiner(1.5)


def test_rank_subtask_c():
    comments = [
        ScoredComment("r1_c1", 0.3, 1, G, thread_id="r1", search_rank=1),
        ScoredComment("r2_c1", 0.8, 1, B, thread_id="r2", search_rank=4),
        ScoredComment("r2_c2", 0.9, 2, G, thread_id="r2", search_rank=4),
    ]
    result = ranking.rank_subtask_c("O1", comments)
    assert result.comment_ids == ["r1_c1", "r2_c2", "r2_c1"]
    assert [item.score for item in result.items] == pytest.approx([0.3, 0.225, 0.2])
    assert [item.predicted_good for item in result.items] == [False, True, True]


@pytest.mark.parametrize("threads, expected", [
    ([[G, B]], 1.0),
    ([[B, G]], 0.5),
    ([[G, B], [B, G]], 0.75),
    ([[P, G, B, G]], (1 / 2 + 2 / 4) / 2),
])
def test_map_score(threads, expected):
    assert ranking.map_score([ranked(f"Q{i}", labels) for i, labels in enumerate(threads)]) == pytest.approx(expected)


def test_map_score_no_good():
    threads = [ranked("Q1", [G, B]), ranked("Q2", [B, P])]
    assert ranking.map_score(threads) == 1.0
    assert ranking.map_score(threads, exclude_no_good=False) == 0.5


def test_map_score_missing_label():
    thread = RankedThread("Q1", [ScoredComment("c1", 0.5, 1, G), ScoredComment("c2", 0.4, 2)])
    with pytest.raises(IntegrityError):
        ranking.map_score([thread])


def test_map_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        threads = []
        expected = []
        for q in range(int(rng.integers(1, 11))):
            labels = [[G, P, B][int(j)] for j in rng.integers(0, 3, size=int(rng.integers(1, 21)))]
            threads.append(ranked(f"Q{q}", labels))
            ap = brute_force_ap([label is G for label in labels])
            if ap is not None:
                expected.append(ap)
        oracle = sum(expected) / len(expected) if expected else 0.0
        assert abs(ranking.map_score(threads) - oracle) <= 1e-12


def test_map_reversed_perfect_ranking():
    # g Good comments ranked last among n
    n, g = 7, 3
    labels = [B] * (n - g) + [G] * g
    expected = sum(k / (n - g + k) for k in range(1, g + 1)) / g
    assert ranking.map_score([ranked("Q1", labels)]) == pytest.approx(expected, abs=1e-12)
    assert ranking.map_score([ranked("Q1", list(reversed(labels)))]) == 1.0


def test_map_invariant_below_last_relevant():
    first = ranked("Q1", [B, G, G, B, P, B])
    second = ranked("Q1", [B, G, G, P, B, B])
    assert ranking.map_score([first]) == ranking.map_score([second])


def test_accuracy():
    assert ranking.accuracy([True, False], [True, False]) == 1.0
    assert ranking.accuracy([True, True], [True, False]) == 0.5
    with pytest.raises(ValueError):
        ranking.accuracy([], [])


def test_evaluate():
    report = ranking.evaluate([ranked("Q1", [G, B], scores=[0.9, 0.2]), ranked("Q2", [B, G], scores=[0.6, 0.4])])
    assert report.map == pytest.approx(0.75)
    assert report.accuracy == pytest.approx(0.5)
    assert report.comments == 4
    assert report.per_query == {"Q1": 1.0, "Q2": 0.5}


def test_baselines():
    threads = [ranked("Q1", [B, B, G, B]), ranked("Q2", [G, B, B])]
    assert ranking.random_baseline_map(threads, 50, seed=1) == ranking.random_baseline_map(threads, 50, seed=1)
    assert 0.0 < ranking.random_baseline_map(threads, 50, seed=1) < 1.0
    shuffled = RankedThread("Q1", list(reversed(threads[0].items)))
    assert ranking.thread_order_baseline([shuffled])[0].comment_ids == threads[0].comment_ids


def test_predictions_file(tmp_path):
    path = str(tmp_path / "predictions.tsv")
    threads = [ranked("Q1", [G, B], scores=[0.75, 0.25])]
    ranking.write_predictions(path, threads)
    lines = (tmp_path / "predictions.tsv").read_text().splitlines()
    assert lines == ["Q1\tQ1_C1\t1\t0.750000\ttrue", "Q1\tQ1_C2\t2\t0.250000\tfalse"]
    assert ranking.read_predictions(path)[0].comment_ids == ["Q1_C1", "Q1_C2"]


def test_evaluate_predictions(tmp_path):
    path = tmp_path / "predictions.tsv"
    path.write_text("Q1\tc2\t2\t0.1\tfalse\nQ1\tc1\t1\t0.9\ttrue\n")
    gold = {("Q1", "c1"): B, ("Q1", "c2"): G}
    report = ranking.evaluate_predictions(str(path), gold)
    assert report.map == 0.5
    assert report.accuracy == 0.0
    report_path = tmp_path / "report.json"
    ranking.write_report(report, str(report_path))
    assert json.loads(report_path.read_text()) == {
        "map": 0.5, "acc": 0.0, "comments": 2, "per_query": [{"query_id": "Q1", "ap": 0.5}]}
    with pytest.raises(IntegrityError):
        ranking.evaluate_predictions(str(path), {("Q1", "c1"): B})


def test_read_predictions_errors(tmp_path):
    path = tmp_path / "predictions.tsv"
    path.write_text("Q1\tc1\t1\t0.9\n")
    with pytest.raises(FormatError):
        ranking.read_predictions(str(path))
    path.write_text("Q1\tc1\tfirst\t0.9\ttrue\n")
    with pytest.raises(FormatError):
        ranking.read_predictions(str(path))


def test_format_report():
    report = ranking.evaluate([ranked("Q1", [G, B], scores=[0.9, 0.2])])
    lines = ranking.format_report(report, "Subtask A")
    assert len({len(line) for line in lines}) == 1
    assert any("MAP" in line and "100.00" in line for line in lines)
