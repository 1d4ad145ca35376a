import json
import os

import pytest

from cqa_rank import cli
from cqa_rank.config import load_config
from cqa_rank.pipeline import iter_pairs, load_splits
from cqa_rank.ranking import RankedThread, ScoredComment, random_baseline_map


def run(*argv):
    return cli.main(list(argv))


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    directory = tmp_path_factory.mktemp("synth")
    assert run("synth", "-o", str(directory), "--seed", "7", "--threads", "50") == 0
    return directory


@pytest.fixture(scope="module")
def pipeline_dir(synth_dir):
    config = str(synth_dir / "synth_config.json")
    for stage in ("train-embeddings", "cluster", "train-lda", "extract", "train", "predict", "evaluate"):
        assert run(stage, "-c", config) == 0, stage
    return synth_dir


def test_synth_files(synth_dir):
    assert (synth_dir / "synth.jsonl").exists()
    assert (synth_dir / "synth_corpus.txt").exists()
    assert load_config(str(synth_dir / "synth_config.json")).seed == 7


def test_end_to_end(pipeline_dir):
    work = pipeline_dir / "work"
    for name in ("embeddings.bin", "clusters.txt", "lda.txt", "lda.txt.vocab", "features_train.csv",
                 "features_test.csv", "features_test.csv.schema.json", "model.json", "predictions.tsv",
                 "report.json", "train.run.json"):
        assert (work / name).exists(), name

    report = json.loads((work / "report.json").read_text())
    config = load_config(str(pipeline_dir / "synth_config.json"))
    _, test_items = load_splits(config)
    grouped = {}
    for key, _, _, label in iter_pairs(test_items, "A"):
        grouped.setdefault(key.query_id, []).append(ScoredComment(key.comment_id, 0.0, key.rank_in_thread, label))
    baseline = random_baseline_map([RankedThread(query_id, items) for query_id, items in grouped.items()], 100, 7)

    assert report["map"] >= 0.85
    assert report["map"] >= baseline + 0.2
    assert report["comments"] == sum(len(items) for items in grouped.values())


def test_predict_refuses_other_schema(pipeline_dir, tmp_path):
    config = str(pipeline_dir / "synth_config.json")
    model = json.loads((pipeline_dir / "work" / "model.json").read_text())
    model["schema_hash"] = "0" * 64
    (pipeline_dir / "work" / "model.json").write_text(json.dumps(model))
    try:
        assert run("predict", "-c", config, "-o", str(tmp_path / "predictions.tsv")) == cli.ExitIntegrity
        assert not (tmp_path / "predictions.tsv").exists()
    finally:
        assert run("train", "-c", config) == 0


def test_ablate(pipeline_dir):
    config = str(pipeline_dir / "synth_config.json")
    assert run("ablate", "-c", config, "--remove", "Word vectors", "--remove", "LDA", "--train-fixed-c", "1") == 0
    lines = (pipeline_dir / "work" / "ablation.txt").read_text().splitlines()
    assert sum(line.startswith("| All") for line in lines) == 3
    assert run("ablate", "-c", config, "--remove", "Sentiment") == cli.ExitConfig


def ablation_maps(path):
    maps = {}
    for line in path.read_text().splitlines()[3:-1]:
        name, map_value, _ = (cell.strip() for cell in line.strip("|").split("|"))
        maps[name] = float(map_value)
    return maps


def test_ablate_centroid_signal(pipeline_dir, tmp_path):
    # the synthetic centroid corpus carries its signal in centroid similarity only
    config = str(pipeline_dir / "synth_config.json")
    overrides = ["--paths-work-dir", str(tmp_path / "work"),
                 "--paths-embeddings", str(pipeline_dir / "work" / "embeddings.bin"),
                 "--features-groups", "QuestionToComment,RawVectors,Metadata"]
    assert run("extract", "-c", config, *overrides) == 0
    removal = "QuestionToComment+RawVectors"
    assert run("ablate", "-c", config, *overrides, "--remove", removal, "--train-fixed-c", "1") == 0
    maps = ablation_maps(tmp_path / "work" / "ablation.txt")
    assert set(maps) == {"All", f"All - {removal}"}
    assert maps[f"All - {removal}"] < maps["All"]
    assert list(maps) == ["All", f"All - {removal}"]


def test_ablate_defaults_skip_absent_groups(pipeline_dir, tmp_path):
    config = str(pipeline_dir / "synth_config.json")
    overrides = ["--paths-work-dir", str(tmp_path / "work"),
                 "--paths-embeddings", str(pipeline_dir / "work" / "embeddings.bin"),
                 "--features-groups", "QuestionToComment,Metadata"]
    assert run("extract", "-c", config, *overrides) == 0
    assert run("ablate", "-c", config, *overrides, "--train-fixed-c", "1") == 0
    maps = ablation_maps(tmp_path / "work" / "ablation.txt")
    assert set(maps) == {"All", "All - Q-to-C", "All - Metadata full"}
    assert run("ablate", "-c", config, *overrides, "--remove", "LDA") == cli.ExitConfig


def test_preprocess(tmp_path):
    source = tmp_path / "raw.txt"
    source.write_text("Check www.qatarliving.com for 500 flats :)\n\nThe end\n")
    target = tmp_path / "tokens.txt"
    assert run("preprocess", str(source), "-o", str(target)) == 0
    assert target.read_text().splitlines() == ["check token_url token_num flats token_emo", "", "end"]

    source.write_text("")
    assert run("preprocess", str(source), "-o", str(target)) == 0
    assert target.read_text() == ""

    assert run("preprocess", str(tmp_path / "missing.txt"), "-o", str(target)) == cli.ExitConfig


def test_train_embeddings_grid(synth_dir, tmp_path):
    config = str(synth_dir / "synth_config.json")
    work = tmp_path / "work"
    args = ["train-embeddings", "-c", config, "--paths-work-dir", str(work), "--embeddings-epochs", "1",
            "--grid", "8:2:1:2", "--grid", "10:3:2:5"]
    assert run(*args) == 0
    first = work / "embeddings_s8_w2_f1_k2.bin"
    second = work / "embeddings_s10_w3_f2_k5.bin"
    assert first.exists() and second.exists()
    content = first.read_bytes()

    first.write_bytes(b"kept")
    assert run(*args, "--resume") == 0
    assert first.read_bytes() == b"kept"

    # deterministic re-run
    assert run(*args) == 0
    assert first.read_bytes() == content

    assert run("cluster", "-c", config, "--paths-work-dir", str(work), "--kmeans-k", "5",
               "--grid", "8:2:1:2") == 0
    assert (work / "clusters_s8_w2_f1_k2.txt").exists()


def test_invalid_grid(synth_dir):
    with pytest.raises(SystemExit) as exc:
        run("train-embeddings", "-c", str(synth_dir / "synth_config.json"), "--grid", "8:2:1")
    assert exc.value.code == 2


def test_predict_without_train(synth_dir, tmp_path):
    config = str(synth_dir / "synth_config.json")
    assert run("predict", "-c", config, "--paths-work-dir", str(tmp_path)) == cli.ExitConfig


def test_missing_config(tmp_path):
    assert run("train", "-c", str(tmp_path / "missing.json")) == cli.ExitConfig


def test_numerical_exit_code(tmp_path):
    work = tmp_path / "work"
    os.makedirs(work)
    (work / "features_train.csv.schema.json").write_text(json.dumps(
        {"columns": [{"group": "Metadata", "name": "rank"}]}))
    (work / "features_train.csv").write_text(
        "query_id,thread_id,comment_id,rank_in_thread,search_rank,label,rank\n"
        "Q1,Q1,Q1_C1,1,1,Bad,1.0\n"
        "Q1,Q1,Q1_C2,2,1,Bad,2.0\n")
    assert run("train", "--paths-work-dir", str(work)) == cli.ExitNumerical
