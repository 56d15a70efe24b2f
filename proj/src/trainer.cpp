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

#include "srcodec/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "srcodec/errors.hpp"

namespace srcodec {

namespace {

template <typename Real>
std::vector<Tensor<Real>> zeros_like(const std::vector<Tensor<Real>>& params) {
  std::vector<Tensor<Real>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p.channels, p.height, p.width);
  return out;
}

// Positions whose parameters a pass produces.
std::vector<int> pass_positions(const ModelConfig& cfg, int step) {
  if (cfg.factorized) return {step};
  return {kTopLeft, kTopRight, kBottomLeft};
}

PixelRanges block_ranges(const AveragePlane& avg, const Image& hi, const BlockGeometry& g,
                         int pos) {
  PixelRanges ranges;
  for (int c = 0; c < kChannels; ++c) {
    std::array<std::uint8_t, 3> decoded{};
    int n = 0;
    for (int q = 0; q < pos; ++q)
      if (g.present[q])
        decoded[n++] = hi.at(2 * g.j + kBlockOffsets[q][1], 2 * g.i + kBlockOffsets[q][0], c);
    ranges[c] = valid_range(avg.at(g.j, g.i, c), g.count,
                            std::span<const std::uint8_t>(decoded.data(), n));
  }
  return ranges;
}

std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  return n <= 1 ? 0 : rng() % n;
}

}  // namespace

template <typename Real>
LossBreakdown image_nll(const Network<Real>& net, const Pyramid& pyr, bool constraints,
                        std::vector<Tensor<Real>>* grads, Real grad_scale,
                        std::uint64_t* kink_signature) {
  using Var = typename GradTape<Real>::Var;
  const ModelConfig& cfg = net.config();
  if (pyr.depth() != cfg.levels)
    throw ConfigError("pyramid depth " + std::to_string(pyr.depth()) +
                      " does not match model levels " + std::to_string(cfg.levels));

  GradTape<Real> tape(grads != nullptr);
  const auto bound = net.bind(tape, grads);
  const Image& full = pyr.levels[0];

  LossBreakdown out;
  out.level_bits.assign(cfg.levels, 0.0);
  out.subpixels = static_cast<double>(full.subpixel_count());

  std::optional<Var> cross;
  std::array<double, kParamsPerPixel> g{};
  for (int l = cfg.levels - 1; l >= 0; --l) {
    const AveragePlane& avg = pyr.averages[l];
    const Image& hi = pyr.levels[l];
    std::optional<Var> prev;
    for (int s = 0; s < cfg.steps(); ++s) {
      const Var input = tape.constant(step_input<Real>(avg, hi, s));
      const auto sv = net.step(tape, bound, l, s, input, prev, s == 0 ? cross : std::nullopt);
      prev = sv.trunk;
      const Tensor<Real>& head = tape.value(sv.head);
      Tensor<Real> head_grad;
      if (grads != nullptr) head_grad = Tensor<Real>(head.channels, head.height, head.width);

      for (int i = 0; i < avg.height; ++i) {
        for (int j = 0; j < avg.width; ++j) {
          const BlockGeometry geom = block_geometry(avg.width, avg.height, hi.width, hi.height, i, j);
          for (int pos : pass_positions(cfg, s)) {
            if (!geom.coded(pos)) continue;
            const MixtureParams params = params_at(head, pos, i, j);
            const int px = 2 * j + kBlockOffsets[pos][1];
            const int py = 2 * i + kBlockOffsets[pos][0];
            const PixelTargets target{hi.at(px, py, 0), hi.at(px, py, 1), hi.at(px, py, 2)};
            PixelRanges ranges;
            if (constraints) ranges = block_ranges(avg, hi, geom, pos);
            const PixelRanges* rp = constraints ? &ranges : nullptr;
            double bits;
            if (grads != nullptr) {
              bits = nll_grad(params, target, rp, g);
              const int base = head.channels == kParamsPerPixel ? 0 : pos * kParamsPerPixel;
              for (int k = 0; k < kParamsPerPixel; ++k)
                head_grad.at(base + k, i, j) = static_cast<Real>(g[k] * grad_scale);
            } else {
              bits = nll(params, target, rp);
            }
            out.level_bits[l] += bits;
          }
        }
      }
      if (grads != nullptr) tape.accumulate_grad(sv.head, head_grad);
    }
    if (l > 0) {
      const AveragePlane& finer = pyr.averages[l - 1];
      cross = net.upsample(tape, bound, l, *prev, finer.height, finer.width);
    }
  }
  out.bits = std::accumulate(out.level_bits.begin(), out.level_bits.end(), 0.0);
  if (grads != nullptr) tape.backward();
  if (kink_signature != nullptr) *kink_signature = tape.kink_signature();
  return out;
}

template LossBreakdown image_nll<float>(const Network<float>&, const Pyramid&, bool,
                                        std::vector<Tensor<float>>*, float, std::uint64_t*);
template LossBreakdown image_nll<double>(const Network<double>&, const Pyramid&, bool,
                                         std::vector<Tensor<double>>*, double, std::uint64_t*);

double overhead_bits(const Image& image, int levels) {
  double bits = 0.0;
  int w = image.width, h = image.height;
  for (int l = 1; l <= levels; ++l) {
    w = ceil_half(w);
    h = ceil_half(h);
    bits += 2.0 * kChannels * w * h;
  }
  bits += 8.0 * kChannels * w * h;
  return bits;
}

EvalResult evaluate(const Network<float>& net, const std::vector<Image>& images, bool constraints) {
  double nll_bits = 0.0, extra = 0.0, subpixels = 0.0;
  for (const auto& img : images) {
    const auto pyr = build_pyramid(img, net.config().levels);
    nll_bits += image_nll(net, pyr, constraints).bits;
    extra += overhead_bits(img, net.config().levels);
    subpixels += static_cast<double>(img.subpixel_count());
  }
  return {nll_bits / subpixels, (nll_bits + extra) / subpixels};
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const Network<double>& net_in, const Image& tile,
                           const GradCheckOptions& opts) {
  Network<double> net = net_in;
  const Pyramid pyr = build_pyramid(tile, net.config().levels);
  const double scale = 1.0 / static_cast<double>(tile.subpixel_count());

  auto grads = zeros_like(net.params());
  std::uint64_t base_sig = 0;
  image_nll(net, pyr, opts.constraints, &grads, scale, &base_sig);

  auto loss_at = [&](std::uint64_t& sig) {
    return image_nll<double>(net, pyr, opts.constraints, nullptr, 1.0, &sig).bits * scale;
  };

  GradCheckReport report;
  std::mt19937_64 rng(opts.seed);
  for (std::size_t t = 0; t < net.params().size(); ++t) {
    auto& p = net.params()[t];
    std::vector<std::size_t> picks;
    if (static_cast<int>(p.size()) <= opts.samples_per_tensor) {
      picks.resize(p.size());
      std::iota(picks.begin(), picks.end(), 0);
    } else {
      for (int s = 0; s < opts.samples_per_tensor; ++s) picks.push_back(uniform_index(rng, p.size()));
    }
    for (std::size_t idx : picks) {
      const double orig = p.data[idx];
      std::uint64_t sig_plus = 0, sig_minus = 0;
      p.data[idx] = orig + opts.step;
      const double up = loss_at(sig_plus);
      p.data[idx] = orig - opts.step;
      const double down = loss_at(sig_minus);
      p.data[idx] = orig;
      if (sig_plus != base_sig || sig_minus != base_sig) {
        ++report.skipped_kinks;
        continue;
      }
      const double numeric = (up - down) / (2.0 * opts.step);
      const double err = relative_error(grads[t].data[idx], numeric);
      ++report.checked;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = net.names()[t] + "[" + std::to_string(idx) + "]";
      }
    }
  }
  return report;
}

double TrainConfig::lr_at(int epoch) const {
  return lr * std::pow(decay, epoch / std::max(1, decay_every));
}

namespace {

void apply_preset(TrainConfig& cfg, const std::string& name) {
  if (name == "imagenet64") {
    cfg.crop = 64;
    cfg.batch_size = 32;
    cfg.epochs = 10;
    cfg.decay_every = 1;
    cfg.lr = 1e-4;
  } else if (name == "openimages") {
    cfg.crop = 128;
    cfg.batch_size = 32;
    cfg.epochs = 50;
    cfg.decay_every = 5;
    cfg.lr = 1e-4;
  } else if (name == "desk") {
    cfg.crop = 64;
    cfg.batch_size = 8;
    cfg.epochs = 6;
    cfg.decay_every = 2;
    cfg.lr = 5e-3;
    cfg.model.width = 16;
    cfg.model.res_blocks = 1;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "preset") apply_preset(cfg, val);
      else if (key == "levels") cfg.model.levels = std::stoi(val);
      else if (key == "width") cfg.model.width = std::stoi(val);
      else if (key == "res_blocks") cfg.model.res_blocks = std::stoi(val);
      else if (key == "factorized") cfg.model.factorized = parse_bool(val);
      else if (key == "constraints") cfg.constraints = parse_bool(val);
      else if (key == "batch_size") cfg.batch_size = std::stoi(val);
      else if (key == "lr") cfg.lr = std::stod(val);
      else if (key == "clip") cfg.clip = std::stod(val);
      else if (key == "decay") cfg.decay = std::stod(val);
      else if (key == "decay_every") cfg.decay_every = std::stoi(val);
      else if (key == "epochs") cfg.epochs = std::stoi(val);
      else if (key == "crop") cfg.crop = std::stoi(val);
      else if (key == "flip") cfg.flip = parse_bool(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "threads") cfg.threads = std::stoi(val);
      else if (key == "max_steps") cfg.max_steps = std::stoi(val);
      else if (key == "init_weights") cfg.init_weights = val;
      else if (key == "checkpoint") cfg.checkpoint = val;
      else if (key == "log") cfg.log = val;
      else throw ConfigError("unknown key '" + key + "'");
    } catch (const std::logic_error&) {
      throw ConfigError("config line " + std::to_string(lineno) + ": bad value for " + key);
    }
  }
  if (cfg.batch_size < 1 || cfg.lr <= 0 || cfg.clip <= 0 || cfg.crop < 1 || cfg.epochs < 0 ||
      cfg.threads < 1)
    throw ConfigError("config: values out of range");
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_train_config(std::string(bytes.begin(), bytes.end()));
}

double clip_global_norm(std::vector<Tensor<float>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (float v : g.data) sq += static_cast<double>(v) * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const float s = static_cast<float>(max_norm / norm);
    for (auto& g : grads)
      for (auto& v : g.data) v *= s;
  }
  return norm;
}

void adam_update(std::vector<Tensor<float>>& params, const std::vector<Tensor<float>>& grads,
                 AdamState& state, double lr) {
  if (state.m.empty()) {
    state.m = zeros_like(params);
    state.v = zeros_like(params);
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  const float step = static_cast<float>(lr / c1);
  const float inv_c2 = static_cast<float>(1.0 / c2);
  const float b1 = static_cast<float>(kAdamBeta1), b2 = static_cast<float>(kAdamBeta2);
  const float eps = static_cast<float>(kAdamEps);
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& p = params[t].data;
    auto& m = state.m[t].data;
    auto& v = state.v[t].data;
    const auto& g = grads[t].data;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * g[i];
      v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
      p[i] -= step * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
    }
  }
}

std::vector<Image> cut_tiles(const std::vector<Image>& sources, int count, int size,
                             std::uint64_t seed) {
  if (sources.empty()) throw ConfigError("no source images to cut tiles from");
  std::mt19937_64 rng(seed);
  std::vector<Image> tiles;
  tiles.reserve(count);
  for (int k = 0; k < count; ++k) {
    const Image& src = sources[k % sources.size()];
    const int w = std::min(size, src.width), h = std::min(size, src.height);
    const int x0 = static_cast<int>(uniform_index(rng, src.width - w + 1));
    const int y0 = static_cast<int>(uniform_index(rng, src.height - h + 1));
    tiles.push_back(crop(src, x0, y0, w, h));
  }
  return tiles;
}

WeightStore train(const std::vector<Image>& corpus, const TrainConfig& cfg,
                  const std::function<void(const TrainProgress&)>& on_step, std::ostream* log) {
  if (corpus.empty()) throw ConfigError("training corpus is empty");
  const WeightStore init = cfg.init_weights.empty() ? init_weights(cfg.model, cfg.seed)
                                                    : load_weights(cfg.init_weights);
  Network<float> net(init);
  const int levels = net.config().levels;

  std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ull + 1);
  AdamState adam;
  auto total = zeros_like(net.params());
  std::vector<std::vector<Tensor<float>>> slots;

  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

    double epoch_bits = 0.0, epoch_subpixels = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      std::vector<Pyramid> batch;
      double subpixels = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const Image& src = corpus[order[start + b]];
        const int cw = std::min(cfg.crop, src.width);
        const int ch = std::min(cfg.crop, src.height);
        const int x0 = static_cast<int>(uniform_index(rng, src.width - cw + 1));
        const int y0 = static_cast<int>(uniform_index(rng, src.height - ch + 1));
        Image tile = crop(src, x0, y0, cw, ch);
        if (cfg.flip && (rng() & 1)) tile = flip_horizontal(tile);
        subpixels += static_cast<double>(tile.subpixel_count());
        batch.push_back(build_pyramid(tile, levels));
      }

      while (slots.size() < n) slots.push_back(zeros_like(net.params()));
      std::vector<double> bits(n, 0.0);
      const float scale = static_cast<float>(1.0 / subpixels);
      auto work = [&](std::size_t b) {
        for (auto& g : slots[b]) std::fill(g.data.begin(), g.data.end(), 0.0f);
        bits[b] = image_nll(net, batch[b], cfg.constraints, &slots[b], scale).bits;
      };
      const int threads = std::min<int>(cfg.threads, static_cast<int>(n));
      if (threads <= 1) {
        for (std::size_t b = 0; b < n; ++b) work(b);
      } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
          pool.emplace_back([&, t] {
            for (std::size_t b = t; b < n; b += threads) work(b);
          });
        for (auto& th : pool) th.join();
      }
      // Fixed reduction order keeps results independent of the thread count.
      for (std::size_t t = 0; t < total.size(); ++t) {
        auto& dst = total[t].data;
        std::fill(dst.begin(), dst.end(), 0.0f);
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += slots[b][t].data[i];
      }

      const double batch_bits = std::accumulate(bits.begin(), bits.end(), 0.0);
      const double loss = batch_bits / subpixels;
      for (std::size_t t = 0; t < total.size(); ++t)
        for (float v : total[t].data)
          if (!std::isfinite(v))
            throw ConfigError("non-finite gradient for " + net.names()[t] + " at step " +
                              std::to_string(step));
      if (!std::isfinite(loss))
        throw ConfigError("non-finite loss at step " + std::to_string(step));

      const double norm = clip_global_norm(total, cfg.clip);
      adam_update(net.params(), total, adam, lr);
      ++step;
      epoch_bits += batch_bits;
      epoch_subpixels += subpixels;

      const TrainProgress progress{step, epoch, loss, lr, norm};
      if (log != nullptr) *log << "step " << step << " loss " << loss << " lr " << lr << "\n";
      if (on_step) on_step(progress);
      if (cfg.max_steps && step >= *cfg.max_steps) break;
    }
    if (log != nullptr)
      *log << "epoch " << epoch << " bpsp " << (epoch_bits / std::max(1.0, epoch_subpixels))
           << "\n";
    if (!cfg.checkpoint.empty()) save_weights(net.to_store(), cfg.checkpoint);
    if (cfg.max_steps && step >= *cfg.max_steps) break;
  }
  return net.to_store();
}

}  // namespace srcodec
