// Copyright 2026 The srcodec Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "srcodec/codec.hpp"
#include "srcodec/errors.hpp"
#include "srcodec/image.hpp"
#include "srcodec/network.hpp"
#include "srcodec/predictor.hpp"
#include "srcodec/pyramid.hpp"
#include "srcodec/trainer.hpp"

namespace py = pybind11;
using namespace srcodec;

namespace {

using Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Image to_image(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3)
    throw ConfigError("expected an (H, W, 3) uint8 array");
  Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  if (img.empty()) throw ConfigError("image must be at least 1x1");
  std::copy(a.data(), a.data() + img.data.size(), img.data.begin());
  return img;
}

Array to_array(const Image& img) {
  Array a({img.height, img.width, 3});
  std::copy(img.data.begin(), img.data.end(), a.mutable_data());
  return a;
}

std::optional<WeightStore> load_optional(const std::optional<std::string>& path) {
  if (!path) return std::nullopt;
  return load_weights(*path);
}

std::unique_ptr<Predictor> predictor_for(const std::optional<std::string>& name,
                                         const std::optional<WeightStore>& weights) {
  const PredictorKind kind =
      name ? parse_predictor(*name) : weights ? PredictorKind::kCnn : PredictorKind::kHeuristic;
  return make_predictor(kind, weights ? &*weights : nullptr);
}

py::bytes compress_py(const Array& image, const std::optional<std::string>& predictor,
                      const std::optional<std::string>& weights, std::optional<int> levels,
                      const std::string& constraints, int threads) {
  const Image img = to_image(image);
  const auto store = load_optional(weights);
  auto p = predictor_for(predictor, store);
  CodecOptions opts;
  opts.levels = levels.value_or(p->levels() != 0 ? p->levels() : 3);
  opts.constraints = parse_constraints(constraints);
  opts.threads = threads;
  std::vector<std::uint8_t> out;
  {
    py::gil_scoped_release release;
    out = compress(img, *p, opts);
  }
  return py::bytes(reinterpret_cast<const char*>(out.data()), out.size());
}

Array decompress_py(const py::bytes& data, const std::optional<std::string>& weights, int threads) {
  const std::string buf = data;
  const auto store = load_optional(weights);
  Image img;
  {
    py::gil_scoped_release release;
    img = decompress(std::span(reinterpret_cast<const std::uint8_t*>(buf.data()), buf.size()),
                     store ? &*store : nullptr, threads);
  }
  return to_array(img);
}

py::dict stats_py(const py::bytes& data) {
  const std::string buf = data;
  const StatsReport r =
      stats(std::span(reinterpret_cast<const std::uint8_t*>(buf.data()), buf.size()));
  py::list rows;
  for (const auto& row : r.rows) rows.append(py::make_tuple(row.name, row.bits, row.bpsp));
  py::dict d;
  d["width"] = r.width;
  d["height"] = r.height;
  d["rows"] = rows;
  d["total_bytes"] = r.total_bytes;
  d["total_bpsp"] = r.total_bpsp;
  d["table"] = r.format();
  return d;
}

Array sample_py(const Array& low, const std::optional<std::string>& predictor,
                const std::optional<std::string>& weights, std::optional<int> levels,
                std::uint64_t seed, bool constraints) {
  const Image img = to_image(low);
  const auto store = load_optional(weights);
  auto p = predictor_for(predictor, store);
  const int l = levels.value_or(p->levels() != 0 ? p->levels() : 3);
  Image out;
  {
    py::gil_scoped_release release;
    out = sample(img, *p, l, seed, constraints);
  }
  return to_array(out);
}

py::list pyramid_py(const Array& image, int levels) {
  const Pyramid pyr = build_pyramid(to_image(image), levels);
  py::list out;
  for (const auto& level : pyr.levels) out.append(to_array(level));
  return out;
}

py::dict evaluate_py(const std::string& weights, const std::vector<Array>& images, bool constraints) {
  const Network<float> net(load_weights(weights));
  std::vector<Image> imgs;
  for (const auto& a : images) imgs.push_back(to_image(a));
  EvalResult r;
  {
    py::gil_scoped_release release;
    r = evaluate(net, imgs, constraints);
  }
  py::dict d;
  d["nll_bpsp"] = r.nll_bpsp;
  d["total_bpsp"] = r.total_bpsp;
  return d;
}

std::vector<double> train_py(const std::vector<Array>& images, const std::string& config,
                             const std::string& output) {
  std::vector<Image> corpus;
  for (const auto& a : images) corpus.push_back(to_image(a));
  const TrainConfig cfg = parse_train_config(config);
  std::vector<double> losses;
  WeightStore w;
  {
    py::gil_scoped_release release;
    w = train(corpus, cfg, [&](const TrainProgress& p) { losses.push_back(p.loss_bpsp); });
  }
  save_weights(w, output);
  return losses;
}

}  // namespace

PYBIND11_MODULE(_srcodec, m) {
  m.doc() = "Lossless image compression with a super-resolution entropy model";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<FormatError>(m, "FormatError", base);
  py::register_exception<HashMismatchError>(m, "HashMismatchError", base);
  py::register_exception<CorruptionError>(m, "CorruptionError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);

  m.def("compress", &compress_py, py::arg("image"), py::arg("predictor") = py::none(),
        py::arg("weights") = py::none(), py::arg("levels") = py::none(),
        py::arg("constraints") = "auto", py::arg("threads") = 1,
        "Compresses an (H, W, 3) uint8 array into container bytes.");
  m.def("decompress", &decompress_py, py::arg("data"), py::arg("weights") = py::none(),
        py::arg("threads") = 1, "Decodes container bytes into an (H, W, 3) uint8 array.");
  m.def("stats", &stats_py, py::arg("data"), "Per-section size breakdown of a container.");
  m.def("sample", &sample_py, py::arg("low"), py::arg("predictor") = py::none(),
        py::arg("weights") = py::none(), py::arg("levels") = py::none(), py::arg("seed") = 0,
        py::arg("constraints") = true, "Super-resolves a low-resolution image by sampling.");
  m.def("pyramid", &pyramid_py, py::arg("image"), py::arg("levels") = 3,
        "Rounded average-pooling pyramid x^(0) .. x^(levels).");
  m.def("evaluate", &evaluate_py, py::arg("weights"), py::arg("images"),
        py::arg("constraints") = false, "Held-out model NLL and total bpsp.");
  m.def("train", &train_py, py::arg("images"), py::arg("config"), py::arg("output"),
        "Trains on the given images with a key=value config; returns per-step losses.");
}
