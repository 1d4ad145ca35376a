import math

import numpy as np
import pytest

from cqa_rank import features
from cqa_rank.clustering import ClusterModel
from cqa_rank.corpus import Comment, Label, Question
from cqa_rank.embeddings import EmbeddingModel, Vocabulary
from cqa_rank.exceptions import ConfigError, IntegrityError
from cqa_rank.features import FeatureGroup, FeatureModels, PairKey
from cqa_rank.topics import LdaModel


def toy_embeddings(vectors):
    words = list(vectors)
    return EmbeddingModel(Vocabulary(words, {word: 1 for word in words}, 1),
                          np.array([vectors[word] for word in words], dtype=np.float32))


Embeddings = toy_embeddings({
    "a": [1.0, 0.0],
    "b": [1.0, 1.0],
    "x": [0.0, 1.0],
    "pool": [0.6, 0.8],
    "swim": [0.8, -0.6],
})


def question(body, subject=(), author="U1", category="Visas", pos_tags=None):
    return Question("Q1", author, " ".join(subject), " ".join(body), category, list(subject), list(body), pos_tags)


def comment(tokens, text=None, author="U2", rank=1, pos_tags=None, label=Label.GOOD):
    return Comment("Q1_C1", author, " ".join(tokens) if text is None else text, rank, label, list(tokens), pos_tags)


def full_models(categories=("Visas", "Work")):
    clusters = ClusterModel(2, np.zeros((2, 2)), {"a": 0, "b": 0, "x": 1, "pool": 1, "swim": 1})
    lda = LdaModel(0.5, 0.01, np.array([[5, 5, 0, 0, 1], [0, 0, 5, 5, 1]]), ["a", "b", "pool", "swim", "x"])
    return FeatureModels(Embeddings, clusters, lda, categories, lda_infer_iterations=4)


def test_qc_similarity():
    q = question(["a"], subject=["a"])
    assert features.qc_similarity(q, comment(["b"]), Embeddings) == pytest.approx([1 / math.sqrt(2)] * 2)
    assert features.qc_similarity(q, comment(["a"]), Embeddings)[0] == pytest.approx(1.0)
    assert features.qc_similarity(q, comment(["unknown"]), Embeddings) == [0.0, 0.0]


def test_maximized_similarity():
    model = toy_embeddings({
        "w1": [0.9, math.sqrt(1 - 0.81)],
        "w2": [0.5, math.sqrt(1 - 0.25)],
        "w3": [0.1, math.sqrt(1 - 0.01)],
    })
    body = np.array([2.0, 0.0])
    result = features.maximized_similarity(body, ["w3", "w1", "w2"], model)
    assert result == pytest.approx([0.9, 0.7, 0.5, 0.5], rel=1e-6)
    assert features.maximized_similarity(body, ["w1"], model) == pytest.approx([0.9] * 4, rel=1e-6)
    assert features.maximized_similarity(body, [], model) == [0.0] * 4


def test_maximized_similarity_matches_centroid():
    body = Embeddings["pool"].astype(np.float64)
    assert features.maximized_similarity(body, ["pool"], Embeddings) == pytest.approx([1.0] * 4)


def test_aligned_similarity():
    model = toy_embeddings({
        "a": [0.8, 0.6],
        "b": [0.2, math.sqrt(0.96)],
        "x": [1.0, 0.0],
        "y": [0.0, 1.0],
    })
    assert features.aligned_similarity(["a", "b"], ["x"], model) == pytest.approx(0.5, rel=1e-6)
    # iterates over question words, not symmetric
    assert features.aligned_similarity(["x"], ["a", "b"], model) == pytest.approx(0.8, rel=1e-6)
    assert features.aligned_similarity(["a", "b"], ["b", "a", "x"], model) == pytest.approx(1.0)
    assert features.aligned_similarity(["x"], ["y"], model) == pytest.approx(0.0)
    assert features.aligned_similarity(["x"], [], model) == 0.0


def test_pos_similarity():
    q = question(["pool", "swim"], pos_tags=[("pool", "NN"), ("swim", "XYZ")])
    c = comment(["pool"], pos_tags=[("pool", "NNS")])
    values, present = features.pos_similarity(q, c, Embeddings)
    assert present
    tags = list(features.UNIVERSAL_TAGSET)
    assert values[tags.index("NOUN")] == pytest.approx(1.0)
    assert values[tags.index("VERB")] == 0.0

    values, present = features.pos_similarity(question(["pool"]), c, Embeddings)
    assert not present
    assert values == [0.0] * len(tags)


def test_map_tag():
    assert features.map_tag("VBZ", features.UNIVERSAL_TAGSET) == "VERB"
    assert features.map_tag("NOUN", features.UNIVERSAL_TAGSET) == "NOUN"
    assert features.map_tag("XYZ", features.UNIVERSAL_TAGSET) is None
    assert features.map_tag("NN", ("NN", "VB")) == "NN"


def test_metadata_features():
    q = question(["a"] * 10, author="U7", category="Work")
    c = comment(["b"] * 4, text="Really? No idea.", author="U7", rank=3)
    scalars, one_hot = features.metadata_features(q, c, ["Visas", "Work"])
    assert scalars == [1.0, 4.0, 10.0, 2.0, 1.0, 3.0]
    assert one_hot == [0.0, 1.0]
    scalars, _ = features.metadata_features(q, comment(["b"], text="Fine.", author="U8"))
    assert scalars[0] == 0.0
    assert scalars[4] == 0.0


def test_raw_vector_features():
    assert features.raw_vector_features(question(["a"]), comment(["x"]), Embeddings) == [1.0, 0.0, 0.0, 1.0]
    assert features.raw_vector_features(question(["a"]), comment(["zzz"]), Embeddings) == [1.0, 0.0, 0.0, 0.0]


def test_assemble_metadata_only():
    vector = features.assemble(question(["a"]), comment(["b"]), FeatureModels(), [FeatureGroup.METADATA])
    assert vector.names == list(features.METADATA_NAMES)
    assert {group for group, _, _ in vector.entries} == {FeatureGroup.METADATA}


def test_assemble_all():
    models = full_models()
    q = question(["a", "pool"], subject=["b"], pos_tags=[("a", "NN"), ("pool", "NN")])
    c = comment(["b", "swim"], pos_tags=[("b", "NN"), ("swim", "VB")])
    vector = features.assemble(q, c, models, features.ALL_GROUPS)
    dim = Embeddings.dim
    assert len(vector) == 2 * dim + len(features.UNIVERSAL_TAGSET) + 4 + 2 + 1 + 1 + 1 + 6 + 2
    assert vector.names == features.build_schema(features.ALL_GROUPS, models).names
    assert len(set(vector.names)) == len(vector.names)
    assert not vector.flags
    similarities = [value for group, _, value in vector.entries
                    if group not in (FeatureGroup.METADATA, FeatureGroup.META_CATEGORIES, FeatureGroup.RAW_VECTORS)]
    assert all(-1.0 - 1e-9 <= value <= 1.0 + 1e-9 for value in similarities)


def test_assemble_flags():
    vector = features.assemble(question(["zzz"]), comment(["yyy"]), full_models(), [FeatureGroup.POS_SIM])
    assert vector.flags == {"pos_missing", "question_oov", "comment_oov"}


def test_assemble_errors():
    with pytest.raises(ConfigError):
        features.assemble(question(["a"]), comment(["b"]), full_models(), [])
    with pytest.raises(ConfigError):
        features.assemble(question(["a"]), comment(["b"]), FeatureModels(), [FeatureGroup.LDA_SIM])


def test_schema_ablation_counts():
    models = full_models()
    full = features.build_schema(features.ALL_GROUPS, models)
    for group in features.ALL_GROUPS:
        reduced = features.build_schema([g for g in features.ALL_GROUPS if g is not group], models)
        assert len(reduced) == len(full) - len(full.indices([group]))
        assert reduced.hash() != full.hash()


def test_parse_groups():
    assert features.parse_groups(["all"]) == frozenset(features.ALL_GROUPS)
    assert FeatureGroup.POS_SIM not in features.parse_groups(["primary-submission"])
    assert features.parse_groups(["ldasim", "Metadata"]) == {FeatureGroup.LDA_SIM, FeatureGroup.METADATA}
    with pytest.raises(ConfigError):
        features.parse_groups(["Sentiment"])


def test_scaler():
    params = features.fit_scaler(np.array([[2.0, 5.0], [4.0, 5.0]]))
    assert features.apply_scaler(params, np.array([[2.0, 5.0], [4.0, 5.0]])).tolist() == [[0.0, 0.0], [1.0, 0.0]]
    assert features.apply_scaler(params, np.array([6.0, 7.0])).tolist() == [1.0, 0.0]
    assert features.apply_scaler(params, np.array([3.0, 1.0])).tolist() == [0.5, 0.0]
    with pytest.raises(ValueError):
        features.apply_scaler(params, np.array([1.0]))


def sample_matrix():
    models = full_models()
    q = question(["a", "pool"], subject=["b"])
    pairs = []
    for rank, (tokens, label) in enumerate([(["a"], Label.GOOD), (["swim"], Label.BAD), (["x"], None)], start=1):
        c = Comment(f"Q1_C{rank}", "U2", " ".join(tokens), rank, label, tokens)
        pairs.append((PairKey("Q1", "Q1", c.id, rank, 1), q, c, label))
    return features.extract_matrix(pairs, models, [FeatureGroup.QUESTION_TO_COMMENT, FeatureGroup.METADATA])


def test_extract_matrix():
    matrix = sample_matrix()
    assert matrix.values.shape == (3, 2 + 6)
    assert matrix.schema.groups == [FeatureGroup.QUESTION_TO_COMMENT, FeatureGroup.METADATA]
    assert matrix.values[0, 0] == pytest.approx(features.qc_similarity(
        question(["a", "pool"], subject=["b"]), comment(["a"]), Embeddings)[0])
    with pytest.raises(IntegrityError):
        matrix.binary_labels()


def test_feature_matrix_csv(tmp_path):
    matrix = sample_matrix()
    path = str(tmp_path / "features.csv")
    matrix.to_csv(path)
    loaded = features.FeatureMatrix.read_csv(path)
    assert loaded.schema == matrix.schema
    assert loaded.keys == matrix.keys
    assert loaded.labels == matrix.labels
    assert np.array_equal(loaded.values, matrix.values)


def test_feature_matrix_select_groups():
    matrix = sample_matrix()
    selected = matrix.select_groups([FeatureGroup.METADATA])
    assert selected.schema.names == list(features.METADATA_NAMES)
    assert np.array_equal(selected.values, matrix.values[:, 2:])
    assert len(selected) == len(matrix)
