import math

import pytest

import odemm


def small_cohort(seed=7, strength=1.0, n=24):
    cfg = odemm.SynthConfig()
    cfg.n_subjects = n
    cfg.seed = seed
    cfg.signal_strength = strength
    cfg.seg_len_min = 40
    cfg.seg_len_max = 80
    cfg.mean_seq_len = 8.0
    return odemm.generate_cohort(cfg)


def build_dataset(records, metadata):
    by_pid = {m.participant_id: m for m in metadata}
    groups = odemm.build_unified_ids(records)
    seqs = []
    for _, recs in groups.items():
        seq = odemm.synchronize(recs)
        pid = recs[0].participant_id
        seq.label = 1 if by_pid[pid].professional_diagnosis else 0
        seq.age = by_pid[pid].age
        seqs.append(seq)
    return odemm.filter_cohort(seqs)


def test_cohort_generation_deterministic():
    r1, m1 = small_cohort()
    r2, m2 = small_cohort()
    assert len(r1) == len(r2) > 0
    assert len(m1) == len(m2) > 0
    assert all(a.timestamp == b.timestamp for a, b in zip(r1, r2))
    table = odemm.summarize_cohort(r1, m1)
    assert "Missing" in table


def test_synchronize_and_filter():
    records, metadata = small_cohort()
    dataset = build_dataset(records, metadata)
    assert dataset
    for seq in dataset:
        assert seq.age >= 45.0
        assert seq.total_tests() >= 5
        times = [o.time_days for o in seq.observations]
        assert times[0] == 0.0
        assert all(b > a for a, b in zip(times, times[1:]))
        assert all(o.present_count() >= 1 for o in seq.observations)


def test_metrics_worked_example():
    scores = [0.9, 0.8, 0.3, 0.2]
    labels = [1, 0, 1, 0]
    assert odemm.auc_pairwise(scores, labels) == pytest.approx(0.75)
    assert odemm.auc_trapezoid(scores, labels) == pytest.approx(0.75)
    assert 0.0 <= odemm.average_precision(scores, labels) <= 1.0
    assert odemm.f1_score(scores, labels) == pytest.approx(0.5)


def tiny_model_config():
    mc = odemm.ModelConfig()
    mc.embed_dim = 3
    mc.tcn_channels = 3
    mc.tcn_layers = 1
    mc.tcn_kernel = 2
    mc.hidden = 4
    mc.dynamics_width = 4
    mc.modal_attn_width = 3
    mc.temporal_attn_width = 3
    return mc


def test_predict_trace_normalized():
    records, metadata = small_cohort()
    dataset = build_dataset(records, metadata)
    params = odemm.ModelParams.init(tiny_model_config(), seed=1)
    out = odemm.predict(dataset[0], params)
    assert 0.0 < out["prob"] < 1.0
    for weights in out["modal_weights"]:
        assert sum(weights) == pytest.approx(1.0, abs=1e-12)
    assert sum(out["temporal_weights"]) == pytest.approx(1.0, abs=1e-12)


def test_train_and_evaluate(tmp_path):
    records, metadata = small_cohort()
    dataset = build_dataset(records, metadata)
    tc = odemm.TrainConfig()
    tc.epochs = 2
    tc.early_stop_patience = 0
    params, history = odemm.train(dataset, tiny_model_config(), tc)
    assert len(history) == 2
    assert all(math.isfinite(x) for x in history)
    metrics = odemm.evaluate(params, dataset)
    assert 0.0 <= metrics["auc"] <= 1.0

    path = str(tmp_path / "ckpt.json")
    odemm.save_checkpoint(path, params)
    reloaded = odemm.load_checkpoint(path)
    a = odemm.predict(dataset[0], params)["prob"]
    b = odemm.predict(dataset[0], reloaded)["prob"]
    assert a == b


def test_ablation_variants_listed():
    assert odemm.ablation_variants() == [
        "full",
        "no-modal",
        "no-temporal",
        "ode-rnn",
        "rnn-dt",
    ]


def test_records_roundtrip(tmp_path):
    records, metadata = small_cohort(n=4)
    rec_path = str(tmp_path / "records.ndjson")
    meta_path = str(tmp_path / "metadata.ndjson")
    odemm.write_records(rec_path, records)
    odemm.write_metadata(meta_path, metadata)
    back = odemm.read_records(rec_path)
    assert len(back) == len(records)
    assert back[0].participant_id == records[0].participant_id
    assert odemm.read_metadata(meta_path)[0].age == metadata[0].age


def test_change_points_flat_signal():
    assert odemm.detect_change_points([1.0] * 30, penalty=1.0) == []
