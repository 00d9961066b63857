import math

import numpy as np
import pytest

import _disturblabel as dl


def test_multinoulli_probs():
    p = dl.multinoulli_probs(3, 10, 0.1)
    assert p[3] == pytest.approx(0.91)
    assert p[0] == pytest.approx(0.01)
    assert sum(p) == pytest.approx(1.0)


def test_soft_label():
    assert dl.soft_label(2, 5, 0.5) == pytest.approx([0.1, 0.1, 0.6, 0.1, 0.1])


def test_disturb_labels_seeded():
    a = dl.disturb_labels([7] * 1000, 10, 0.2, seed=5)
    b = dl.disturb_labels([7] * 1000, 10, 0.2, seed=5)
    assert a == b
    changed = sum(1 for x in a if x != 7)
    assert 100 < changed < 260  # expectation 180

    assert dl.disturb_labels([3] * 50, 10, 0.0) == [3] * 50


def test_softmax_xent():
    logits = np.zeros((2, 10))
    targets = np.eye(10)[:2]
    loss, grad = dl.softmax_xent(logits, targets)
    assert loss == pytest.approx(math.log(10.0))
    assert grad.shape == (2, 10)
    assert grad[0, 0] == pytest.approx(-0.9 / 2)  # row-mean convention


def test_network_forward():
    net = dl.Network.parse("C3(S1P0)@2-MP2(S2)-FC10")
    net.build(1, 8, 8)
    net.init_params(seed=1)
    out = net.forward(np.random.default_rng(0).normal(size=(4, 1, 8, 8)))
    assert out.shape == (4, 10)
    assert net.class_count() == 10
    assert "FC10" in net.render()


def test_synth_digits():
    imgs, labels = dl.synth_digits(50, seed=2)
    assert imgs.shape == (50, 1, 28, 28)
    assert imgs.min() >= 0.0 and imgs.max() <= 1.0
    assert set(labels) == set(range(10))


def test_run_experiment_deterministic():
    overrides = {
        "dataset": "synth",
        "synth-train": "192",
        "synth-test": "96",
        "network": "C3(S1P0)@4-MP2(S2)-FC10",
        "epochs-scale": "50",
        "batch-size": "32",
        "alpha": "0.2",
    }
    a = dl.run_experiment(overrides=overrides)
    b = dl.run_experiment(overrides=overrides)
    assert a == b
    assert len(a["records"]) > 0
    assert 0.0 <= a["final_test_err"] <= 1.0
    assert a["best_test_err"] <= a["final_test_err"]


def test_presets_listed():
    names = dl.preset_names()
    assert "mnist-disturb" in names and "mnist-baseline" in names
