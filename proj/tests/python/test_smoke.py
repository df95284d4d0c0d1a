# Copyright 2026 The ascnet Authors
# SPDX-License-Identifier: Apache-2.0
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math

import numpy as np
import pytest

import ascnet


def test_scene_labels():
    assert len(ascnet.SCENE_LABELS) == 10
    assert ascnet.SCENE_LABELS[0] == "airport"


def test_zero_signal_features_are_floor():
    f = ascnet.extract_features(np.zeros((480000, 2), dtype=np.float32), 48000)
    assert f.shape == (256, 512)
    assert np.all(f == np.float32(math.log(1e-10)))


def test_tone_lands_near_band_76():
    t = np.arange(480000) / 48000.0
    x = (0.5 * np.sin(2 * np.pi * 1000.0 * t)).astype(np.float32)
    f = ascnet.extract_features(x, 48000)
    assert abs(int(np.argmax(f[:, 256])) - 76) <= 1


def test_feature_cache_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    f = rng.standard_normal((256, 40)).astype(np.float32)
    ascnet.write_features(tmp_path / "x.ascf", f)
    assert np.array_equal(ascnet.read_features(tmp_path / "x.ascf"), f)


def test_unsupported_rate_raises():
    with pytest.raises(ascnet.ConfigError):
        ascnet.extract_features(np.zeros(16000, dtype=np.float32), 16000)


def test_filterbank_shape_and_sign():
    fb = ascnet.mel_filterbank()
    assert fb.shape == (256, 1025)
    assert np.all(fb >= 0)


def test_schedule_anchors():
    assert ascnet.lr_schedule(50) == 0.001
    assert ascnet.lr_schedule(500) == 1e-6
    assert abs(ascnet.lr_schedule(275) - 0.0005005) < 1e-12


def test_topology_totals():
    _, total = ascnet.describe_topology("vgg")
    assert total == 3928810
    layers, total = ascnet.describe_topology("xvec", width_divisor=4)
    assert layers[-1][1] == [10]
    assert total > 0


def test_fusion_and_vote():
    rng = np.random.default_rng(1)
    labels = [i % 10 for i in range(60)]
    onehot = np.eye(10)[labels] * 4.0 + rng.standard_normal((60, 10))
    noise = rng.standard_normal((60, 10))
    fit = ascnet.fit_calibration([onehot, noise], labels)
    assert fit["final_nll"] <= fit["initial_nll"]
    assert fit["alpha"][0] > abs(fit["alpha"][1])
    fused = ascnet.apply_calibration([onehot, noise], fit["alpha"], fit["beta"])
    assert fused.shape == (60, 10)
    preds = [list(np.argmax(s, axis=1)) for s in (onehot, onehot, noise)]
    vote = ascnet.majority_vote(preds, fused)
    assert ascnet.evaluate(vote, labels)["accuracy"] >= 90.0


def test_published_per_scene_average():
    ours = [71.5, 92.7, 74.3, 75.2, 92.9, 58.6, 71.8, 60.0, 90.6, 81.9]
    assert abs(ascnet.average_accuracy(ours) - 77.0) <= 0.05


def test_cli_unknown_subcommand():
    code, _, err = ascnet.run_cli(["frobnicate"])
    assert code == 1
    assert "frobnicate" in err
