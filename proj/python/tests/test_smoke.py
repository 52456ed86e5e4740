import json
import math

import numpy as np
import pytest

import idslab


def small_data(seed=1):
    spec = idslab.SyntheticSourceSpec()
    spec.num_classes = 4
    spec.feature_dim = 6
    spec.pool_size = 500
    spec.validation_per_class = 5
    spec.test_per_class = 20
    spec.separation = 4.0
    spec.label_noise = 0.2
    spec.seed = seed
    return idslab.synth_build(spec)


def small_config(method=idslab.Method.PEAKS):
    c = idslab.IDSConfig()
    c.budget = 80
    c.initial_size = 20
    c.batch_size = 8
    c.total_updates = 40
    c.tau = 5
    c.method = method
    c.seed = 3
    return c


def test_numerics():
    p = idslab.softmax(np.array([math.log(2.0), 0.0]))
    assert p == pytest.approx([2 / 3, 1 / 3])
    assert idslab.percentile_rank(9.5, list(range(1, 11))) == pytest.approx(90.0)
    assert idslab.percentile_rank(1.0, []) == 100.0
    assert idslab.spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert idslab.jaccard({1, 2, 3}, {2, 3, 4}) == pytest.approx(0.5)
    assert idslab.auto_delta(1000, 0, 200) == 10
    assert idslab.prediction_error(np.array([0.7, 0.2, 0.1]), 0) == pytest.approx(0.6)
    with pytest.raises(ValueError):
        idslab.spearman([1, 1, 1], [1, 2, 3])


def test_exact_score_hand_case():
    model = idslab.LinearSoftmaxModel(np.array([[0.0], [math.log(3.0)]]))
    val = idslab.Dataset(np.ones((1, 1)), [0], 2)
    protos = idslab.compute_prototypes(val)
    one = np.ones(1)
    assert idslab.score_exact_delta(model, one, 0, protos) == pytest.approx(1.5)
    assert idslab.score_peaks_v(model, one, 0, protos) == pytest.approx(1.5)
    assert idslab.score(idslab.Method.PEAKS_V, model, one, 0, protos) == pytest.approx(1.5)


def test_sgd_matches_exact_logit_delta():
    rng = np.random.default_rng(0)
    model = idslab.LinearSoftmaxModel(rng.normal(size=(5, 7)))
    xp, xv = rng.normal(size=7), rng.normal(size=7)
    predicted = 0.05 * idslab.exact_logit_delta(model, xp, 2, xv)
    before = model.logits(xv)
    model.sgd_step(xp[None, :], [2], 0.05)
    assert np.max(np.abs(model.logits(xv) - before - predicted)) < 1e-9


def test_dataset_arrays_and_files(tmp_path):
    data = small_data()
    pool = data.pool
    assert len(pool) == 500
    assert pool.features.shape == (500, 6)
    assert set(pool.labels) <= set(range(4))
    path = tmp_path / "pool.pkem"
    idslab.save_embeddings(pool, path)
    back = idslab.load_embeddings(path)
    assert back.ids == pool.ids
    assert np.array_equal(back.features, pool.features)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(idslab.ParseError):
        idslab.load_embeddings(path)


def test_run_and_determinism(tmp_path):
    data = small_data()
    a = idslab.run(small_config(), data)
    b = idslab.run(small_config(), data)
    assert a.completed
    assert len(a.selected_ids) == 80
    assert a.selected_ids == b.selected_ids
    assert a.init_updates + a.selection_updates + a.finetune_updates == 40
    assert sum(a.class_counts) == 80
    assert sum(a.candidates["accepted"]) == 60
    assert 0.0 <= a.tail_acceptance_rate() <= 1.0
    random = idslab.run(small_config(idslab.Method.RANDOM), data)
    assert random.initial_ids == a.initial_ids

    idslab.write_run(a, tmp_path / "run")
    assert idslab.read_run(tmp_path / "run").selected_ids == a.selected_ids


def test_run_error_and_partial_result():
    data = small_data()
    c = small_config(idslab.Method.RANDOM)
    c.budget = 600
    c.total_updates = 400
    c.rate = 100
    with pytest.raises(idslab.RunError):
        idslab.run(c, data)
    partial = idslab.run(c, data, raise_on_error=False)
    assert not partial.completed
    assert len(partial.selected_ids) == 500


def test_rank_correlation():
    data = small_data()
    r = idslab.run(small_config(), data)
    probe = idslab.sample_probe_pool(data.pool, r.initial_ids, 200, 0)
    rep = idslab.rank_correlation_experiment(r.initial_model, probe, idslab.compute_prototypes(data.validation))
    assert rep["methods"] == ["exact_delta", "peaks_v", "peaks"]
    assert rep["spearman"][0][1] == 1.0


def test_config_errors():
    c = small_config()
    c.delta = 9
    with pytest.raises(ValueError):
        c.validate()
    with pytest.raises(ValueError):
        idslab.Method.parse("nope")
    assert idslab.Method.parse("peaks-v") == idslab.Method.PEAKS_V


def test_cli_in_process(tmp_path):
    cfg = {
        "source": {"synthetic": {"num_classes": 3, "feature_dim": 4, "pool_size": 300, "seed": 1}},
        "ids": {"budget": 60, "initial_size": 10, "batch_size": 8, "total_updates": 30, "tau": 5},
    }
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert idslab.cli_main(["run", "--config", str(path), "--out", str(tmp_path / "out")]) == 0
    result = json.loads((tmp_path / "out" / "result.json").read_text())
    assert result["completed"] is True
    assert idslab.cli_main(["run", "--config", str(path)]) == 2
