import math

import numpy as np
import pytest

import tcssl


def test_pseudo_label_arithmetic():
    assert tcssl.pseudo_label(3, 1421) == 3_001_421
    assert tcssl.frame_distance(tcssl.pseudo_label(2, 100), tcssl.pseudo_label(2, 91)) == 9
    assert tcssl.is_positive(2_000_100, 2_000_091, window=9)
    assert not tcssl.is_positive(2_000_100, 3_000_100, window=9)


def test_count_positives_interior_and_edge():
    assert tcssl.count_positives(0, 72, 9) == 9
    assert tcssl.count_positives(36, 72, 9) == 18
    assert tcssl.count_positives(71, 72, 9) == 9


def test_mining_matches_brute_force():
    rng = np.random.default_rng(4)
    labels = rng.integers(0, 3, size=12) * 1_000_000 + rng.integers(0, 20, size=12)
    got = tcssl.mine_batch_all_windowed(labels, window=5)
    expected = sorted(
        (a, p, n)
        for a in range(12)
        for p in range(12)
        if a != p and abs(int(labels[a]) - int(labels[p])) <= 5
        for n in range(12)
        if abs(int(labels[a]) - int(labels[n])) > 5
    )
    assert [tuple(row) for row in got] == expected


def test_triplet_loss_hand_value():
    emb = np.array([[0.0, 0.0], [0.0, 1.0], [3.0, 0.0]])
    triplets = np.array([[0, 1, 2]], dtype=np.int64)
    # d2(a,p)=1, d2(a,n)=9 -> hinge max(1-9+0.2, 0) = 0
    assert tcssl.triplet_loss(emb, triplets, margin=0.2) == 0.0
    assert tcssl.triplet_loss(emb, triplets, margin=8.5) == pytest.approx(0.5)


def test_cross_entropy_uniform_logits():
    logits = np.zeros((4, 3))
    labels = np.array([0, 1, 2, 0], dtype=np.int64)
    assert tcssl.cross_entropy(logits, labels) == pytest.approx(math.log(3.0))


def test_auc_and_sensitivity():
    scores = np.array([0.9, 0.8, 0.3, 0.2])
    labels = np.array([1, 1, 0, 0], dtype=np.int64)
    assert tcssl.auc_roc(scores, labels) == 1.0
    assert tcssl.sensitivity_at_specificity(scores, labels, 0.95) == 1.0


def test_confusion_and_derived_metrics():
    truth = np.array([0, 0, 1, 1, 1], dtype=np.int64)
    predicted = np.array([0, 1, 1, 1, 0], dtype=np.int64)
    m = tcssl.confusion_matrix(truth, predicted, 2)
    assert m.tolist() == [[1, 1], [1, 2]]
    assert tcssl.accuracy_p0(m) == pytest.approx(0.6)
    assert tcssl.f1(m, cls=1) == pytest.approx(2 * 2 / (2 * 2 + 1 + 1))
    assert -1.0 <= tcssl.mcc(m, cls=1) <= 1.0


def test_grouped_kfold_partitions_videos():
    folds = tcssl.grouped_kfold(list(range(7)), 3, seed=11)
    assert sorted(folds) == list(range(7))
    sizes = [sum(1 for f in folds.values() if f == k) for k in range(3)]
    assert sorted(sizes) == [2, 2, 3]


def test_lr_schedule():
    assert tcssl.lr_at(0.1, 5.0, 4300, 21000, 0) == 0.1
    assert tcssl.lr_at(0.1, 5.0, 4300, 21000, 4300) == pytest.approx(0.02)
    with pytest.raises(ValueError):
        tcssl.lr_at(0.1, 5.0, 4300, 21000, 21000)


def test_apportion_slots_sums_to_batch():
    slots = tcssl.apportion_slots(72, {0: 0.5, 1: 0.5})
    assert slots == {0: 36, 1: 36}
    assert sum(tcssl.apportion_slots(10, {0: 0.34, 1: 0.33, 2: 0.33}).values()) == 10


def test_generate_corpus_roundtrip(tmp_path):
    info = tcssl.generate_corpus(
        str(tmp_path / "c"), corpus_id="smoke", num_videos=2, frames_per_video=30,
        anomaly_rate=0.1, anomaly_run_length=3, labeled=True, seed=5,
    )
    assert info["corpus_id"] == "smoke"
    assert info["num_videos"] == 2
    assert info["frames_per_video"] == 30
    assert (tmp_path / "c" / "manifest.json").exists()
    assert sum(info["class_counts"].values()) == 60


def test_crc32_check_value():
    assert tcssl.crc32(b"123456789") == 0xCBF43926
