import json
import math

import numpy as np
import pytest

import semcom


def test_capacity_matches_hand_formula():
    r1, r2 = semcom.mac_equal_rate_capacity(32, 1.0, 1.0)
    assert r1 == pytest.approx(16 * math.log2(3), abs=1e-9)
    assert r1 == r2


def test_capacity_outage_gain():
    r1, _ = semcom.mac_equal_rate_capacity(32, 1.0, 1.0, h1=0j)
    assert r1 == 0.0


def test_coordinate_bits_against_erf():
    mean, scale, v = 0.3, 1.7, 2.0
    cdf = lambda x: 0.5 * (1 + math.erf((x - mean) / (scale * math.sqrt(2))))
    want = -math.log2(cdf(v + 0.5) - cdf(v - 0.5))
    assert semcom.coordinate_bits(v, mean, scale) == pytest.approx(want, abs=1e-9)


def test_noiseless_superposition():
    y = semcom.transmit_noma([1.0, 2.0], [0.5, -1.0], sigma2=0.0)
    assert y == pytest.approx([1.5, 1.0])


def test_top1_brute_force():
    rng = np.random.default_rng(3)
    gallery = rng.normal(size=(20, 5))
    gl = list(range(20))
    queries = gallery[[4, 7, 9]] + 1e-3
    assert semcom.top1_accuracy(queries, [4, 7, 1], gallery, gl) == pytest.approx(2 / 3)


def test_config_validation():
    cfg = json.loads(semcom.default_config())
    assert cfg["model"]["r"] == 64
    with pytest.raises(semcom.ValidationError, match="dataset.bogus"):
        semcom.validate_config(json.dumps({"dataset": {"bogus": 1}}))


def test_dataset_shapes_and_determinism():
    small = json.dumps({"dataset": {"n_train_ids": 10, "n_test_ids": 4}})
    a = semcom.generate_dataset(small)
    b = semcom.generate_dataset(small)
    assert a["train"]["s1"].shape == (40, 64)
    assert a["query"]["s2"].shape == (8, 64)
    np.testing.assert_array_equal(a["gallery"]["s1"], b["gallery"]["s1"])


def test_selfcheck_and_negative_control():
    assert all(r["passed"] for r in semcom.selfcheck())
    faulty = semcom.selfcheck(inject_fault=True)
    assert not all(r["passed"] for r in faulty)


def test_tiny_sweep_row_count():
    tiny = {
        "dataset": {"n_train_ids": 8, "n_test_ids": 4, "p": 16, "d": 4},
        "model": {"r": 8, "feature_hidden": [16], "encoder_hidden": [16], "decoder_hidden": [16], "af_hidden": 4},
        "channel": {"q_total": 8},
        "training": {"t1": {"epochs": 1}, "t2": {"epochs": 1}, "t3": {"epochs": 1}, "digital": {"epochs": 1}},
        "eval": {"snr_test_db": [0.0, 6.0]},
    }
    csv = semcom.sweep(json.dumps(tiny), "snr", ["single", "noma"], [1, 2])
    lines = csv.strip().splitlines()
    assert lines[0].startswith("scheme,channel,csi_mode")
    assert len(lines) == 1 + 2 * 2 * 2
