// Copyright 2026 The ascnet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "ascnet/cli.hpp"
#include "ascnet/dataset.hpp"
#include "ascnet/dsp.hpp"
#include "ascnet/errors.hpp"
#include "ascnet/evalkit.hpp"
#include "ascnet/fusion.hpp"
#include "ascnet/topology.hpp"
#include "ascnet/trainer.hpp"
#include "ascnet/wav.hpp"

namespace py = pybind11;
using namespace ascnet;

namespace {

using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<float> features_to_numpy(const LogMelFeatures& f) {
  py::array_t<float> out({f.n_mels, f.n_frames});
  std::copy(f.values.begin(), f.values.end(), out.mutable_data());
  return out;
}

LogMelFeatures features_from_numpy(const F32Array& a) {
  if (a.ndim() != 2) throw DimensionError("features must be a 2-D (n_mels, n_frames) array");
  LogMelFeatures f;
  f.n_mels = static_cast<std::size_t>(a.shape(0));
  f.n_frames = static_cast<std::size_t>(a.shape(1));
  f.values.assign(a.data(), a.data() + a.size());
  return f;
}

RawAudio raw_from_numpy(const F32Array& samples, int sample_rate) {
  RawAudio raw;
  raw.sample_rate = sample_rate;
  if (samples.ndim() == 1) {
    raw.channels = 1;
  } else if (samples.ndim() == 2) {
    raw.channels = static_cast<int>(samples.shape(1));
  } else {
    throw DimensionError("samples must be (frames,) or (frames, channels)");
  }
  raw.samples.assign(samples.data(), samples.data() + samples.size());
  return raw;
}

ScoreMatrix scores_from_numpy(const F64Array& a, const std::vector<std::string>& ids, const std::string& name) {
  if (a.ndim() != 2 || static_cast<std::size_t>(a.shape(0)) != ids.size())
    throw DimensionError("scores must be (n_segments, n_classes) with one id per row");
  ScoreMatrix s;
  s.system = name;
  s.n_classes = static_cast<std::size_t>(a.shape(1));
  s.ids = ids;
  s.values.assign(a.data(), a.data() + a.size());
  return s;
}

std::vector<ScoreMatrix> systems_from_numpy(const std::vector<F64Array>& arrays) {
  std::vector<ScoreMatrix> out;
  if (arrays.empty()) throw ConfigError("at least one score matrix is required");
  const auto n = static_cast<std::size_t>(arrays.front().ndim() == 2 ? arrays.front().shape(0) : 0);
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(i);
  for (std::size_t s = 0; s < arrays.size(); ++s)
    out.push_back(scores_from_numpy(arrays[s], ids, "system" + std::to_string(s)));
  return out;
}

py::array_t<double> scores_to_numpy(const ScoreMatrix& s) {
  py::array_t<double> out({s.rows(), s.n_classes});
  std::copy(s.values.begin(), s.values.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Acoustic scene classification: features, networks, fusion and evaluation";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<IntegrityError>(m, "IntegrityError", base.ptr());

  m.attr("SCENE_LABELS") = std::vector<std::string>(kSceneLabels.begin(), kSceneLabels.end());

  m.def(
      "read_wav",
      [](const std::filesystem::path& path) {
        const RawAudio a = read_wav(path);
        py::array_t<float> out({a.frames(), static_cast<std::size_t>(a.channels)});
        std::copy(a.samples.begin(), a.samples.end(), out.mutable_data());
        return py::make_tuple(a.sample_rate, out);
      },
      py::arg("path"), "Decode a WAV file into (sample_rate, samples[frames, channels]).");

  m.def(
      "extract_features",
      [](const F32Array& samples, int sample_rate) {
        const RawAudio raw = raw_from_numpy(samples, sample_rate);
        py::gil_scoped_release release;
        LogMelFeatures f = extract_features(raw);
        py::gil_scoped_acquire acquire;
        return features_to_numpy(f);
      },
      py::arg("samples"), py::arg("sample_rate"),
      "Log-mel features (256 x 512) from (frames,) or (frames, channels) audio.");

  m.def(
      "features_from_file",
      [](const std::filesystem::path& path) { return features_to_numpy(extract_features(read_wav(path))); },
      py::arg("path"));

  m.def(
      "resample",
      [](const F64Array& x, int src_rate, int dst_rate) {
        return resample(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), src_rate, dst_rate);
      },
      py::arg("x"), py::arg("src_rate"), py::arg("dst_rate"));

  m.def(
      "mel_filterbank",
      [](std::size_t n_mels, std::size_t n_bins, int sample_rate) {
        const MelFilterbank fb = mel_filterbank(n_mels, n_bins, sample_rate);
        py::array_t<double> out({fb.n_mels, fb.n_bins});
        std::copy(fb.weights.begin(), fb.weights.end(), out.mutable_data());
        return out;
      },
      py::arg("n_mels") = kNumMels, py::arg("n_bins") = kNumBins, py::arg("sample_rate") = kTargetRate);

  m.def("write_features", [](const std::filesystem::path& p, const F32Array& a) { write_features(p, features_from_numpy(a)); },
        py::arg("path"), py::arg("features"));
  m.def("read_features", [](const std::filesystem::path& p) { return features_to_numpy(read_features(p)); },
        py::arg("path"));

  m.def(
      "lr_schedule", [](int epoch) { return lr_schedule(epoch, TrainConfig{}); }, py::arg("epoch"),
      "Learning rate for a 1-based epoch under the default schedule.");

  m.def(
      "describe_topology",
      [](const std::string& name, std::size_t width_divisor, std::size_t n_frames) {
        TopologyOptions opt;
        opt.width_divisor = width_divisor;
        const NetworkSpec spec = build_topology(parse_topology(name), opt);
        const auto shapes = propagate_shapes(spec, n_frames);
        const auto counts = param_count(spec);
        py::list layers;
        for (std::size_t i = 0; i < spec.layers.size(); ++i)
          layers.append(py::make_tuple(spec.layers[i].name, std::vector<std::size_t>(shapes[i].begin(), shapes[i].end()),
                                       counts.per_layer[i]));
        return py::make_tuple(layers, counts.total);
      },
      py::arg("topology"), py::arg("width_divisor") = 1, py::arg("n_frames") = 128,
      "Returns ([(layer, output_shape, params)], total_params).");

  py::class_<Predictor>(m, "Predictor")
      .def(py::init([](const std::filesystem::path& path) { return Predictor(load_checkpoint(path)); }), py::arg("path"))
      .def(
          "predict", [](Predictor& p, const F32Array& f) { return p.predict(features_from_numpy(f)); }, py::arg("features"),
          "Pre-softmax class scores for one segment.");

  m.def(
      "fit_calibration",
      [](const std::vector<F64Array>& systems, const std::vector<std::size_t>& labels) {
        const auto s = systems_from_numpy(systems);
        const auto fit = fit_calibration(s, labels);
        py::dict d;
        d["alpha"] = fit.model.alpha;
        d["beta"] = fit.model.beta;
        d["initial_nll"] = fit.initial_nll;
        d["final_nll"] = fit.final_nll;
        d["converged"] = fit.converged;
        return d;
      },
      py::arg("systems"), py::arg("labels"), "Fit fusion weights alpha (per system) and beta (per class).");

  m.def(
      "apply_calibration",
      [](const std::vector<F64Array>& systems, const std::vector<double>& alpha, const std::vector<double>& beta) {
        CalibrationModel model;
        model.alpha = alpha;
        model.beta = beta;
        for (std::size_t i = 0; i < alpha.size(); ++i) model.systems.push_back("system" + std::to_string(i));
        return scores_to_numpy(apply_calibration(model, systems_from_numpy(systems)));
      },
      py::arg("systems"), py::arg("alpha"), py::arg("beta"));

  m.def(
      "majority_vote",
      [](const std::vector<std::vector<std::size_t>>& predictions, const F64Array& fused) {
        const auto s = systems_from_numpy({fused});
        return majority_vote(predictions, s.front());
      },
      py::arg("predictions"), py::arg("fused"));

  m.def(
      "average_accuracy", [](const std::vector<double>& per_class) { return average_accuracy(per_class); },
      py::arg("per_class"));

  m.def(
      "evaluate",
      [](const std::vector<std::size_t>& predicted, const std::vector<std::size_t>& truth) {
        const EvalReport r = evaluate_predictions(predicted, truth);
        py::dict d;
        d["per_class_accuracy"] = r.per_class_accuracy;
        d["average"] = r.average;
        d["accuracy"] = r.raw_accuracy;
        d["confusion"] = r.confusion;
        return d;
      },
      py::arg("predicted"), py::arg("truth"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run one CLI subcommand in-process; returns (exit_code, stdout, stderr).");
}
