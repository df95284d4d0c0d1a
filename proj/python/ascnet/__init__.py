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

"""Acoustic scene classification toolkit."""

from ._core import (
    SCENE_LABELS,
    ConfigError,
    Error,
    InputError,
    IntegrityError,
    NumericError,
    Predictor,
    apply_calibration,
    average_accuracy,
    describe_topology,
    evaluate,
    extract_features,
    features_from_file,
    fit_calibration,
    lr_schedule,
    majority_vote,
    mel_filterbank,
    read_features,
    read_wav,
    resample,
    run_cli,
    write_features,
)

__all__ = [
    "SCENE_LABELS",
    "ConfigError",
    "Error",
    "InputError",
    "IntegrityError",
    "NumericError",
    "Predictor",
    "apply_calibration",
    "average_accuracy",
    "describe_topology",
    "evaluate",
    "extract_features",
    "features_from_file",
    "fit_calibration",
    "lr_schedule",
    "majority_vote",
    "mel_filterbank",
    "read_features",
    "read_wav",
    "resample",
    "run_cli",
    "write_features",
]
