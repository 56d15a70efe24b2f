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

#include "srcodec/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <set>

#include "srcodec/errors.hpp"

namespace srcodec {

namespace {

constexpr char kMagic[] = "SRECW1";
constexpr std::size_t kMagicSize = 6;

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw FormatError("weight file truncated");
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

std::string prefix(int level, int step) {
  return "l" + std::to_string(level) + ".s" + std::to_string(step) + ".";
}

void add_conv(std::vector<ParamSpec>& out, const std::string& name, int out_c, int in_c, int k) {
  out.push_back({name + ".w", {out_c, in_c, k, k}, in_c * k * k, false});
  out.push_back({name + ".b", {out_c}, in_c * k * k, true});
}

template <typename Real>
Tensor<Real> to_tensor(const WeightStore::Entry& e) {
  Tensor<Real> t;
  if (e.shape.size() == 4) {
    t = Tensor<Real>(e.shape[0], e.shape[1], e.shape[2] * e.shape[3]);
  } else {
    t = Tensor<Real>(e.shape[0], 1, 1);
  }
  std::copy(e.values.begin(), e.values.end(), t.data.begin());
  return t;
}

}  // namespace

const WeightStore::Entry* WeightStore::find(const std::string& name) const {
  for (const auto& e : tensors)
    if (e.name == name) return &e;
  return nullptr;
}

std::vector<std::uint8_t> WeightStore::serialize() const {
  std::vector<std::uint8_t> out(kMagic, kMagic + kMagicSize);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& e : tensors) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put_u32(out, static_cast<std::uint32_t>(e.shape.size()));
    for (int d : e.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : e.values) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      put_u32(out, bits);
    }
  }
  const std::uint64_t h = fnv1a(out);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(h >> (8 * i)));
  return out;
}

std::uint64_t WeightStore::hash() const {
  const auto bytes = serialize();
  std::uint64_t h = 0;
  for (int i = 0; i < 8; ++i) h |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + i]) << (8 * i);
  return h;
}

WeightStore WeightStore::parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagicSize + 4 + 8 || std::memcmp(bytes.data(), kMagic, kMagicSize) != 0)
    throw FormatError("not a weight file (bad magic or version)");
  const auto body = bytes.first(bytes.size() - 8);
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(bytes[body.size() + i]) << (8 * i);

  Reader r(body);
  r.bytes(kMagicSize);
  const std::uint32_t count = r.u32();
  WeightStore store;
  for (std::uint32_t t = 0; t < count; ++t) {
    WeightStore::Entry e;
    const std::uint32_t name_len = r.u32();
    if (name_len > 256) throw FormatError("weight file: tensor name too long");
    const auto name = r.bytes(name_len);
    e.name.assign(name.begin(), name.end());
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 4) throw FormatError("weight file: bad rank for " + e.name);
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = r.u32();
      if (dim == 0 || dim > (1u << 16)) throw FormatError("weight file: bad dimension for " + e.name);
      e.shape.push_back(static_cast<int>(dim));
      n *= dim;
      if (n > (1u << 28)) throw FormatError("weight file: tensor too large");
    }
    if (r.remaining() / 4 < n) throw FormatError("weight file truncated");
    const auto raw = r.bytes(n * 4);
    e.values.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      std::uint32_t bits = 0;
      for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(raw[4 * k + i]) << (8 * i);
      std::memcpy(&e.values[k], &bits, sizeof bits);
    }
    store.tensors.push_back(std::move(e));
  }
  if (r.remaining() != 0) throw FormatError("weight file: trailing bytes");
  if (fnv1a(body) != stored) throw FormatError("weight file: content hash mismatch");
  return store;
}

WeightStore load_weights(const std::filesystem::path& path) {
  return WeightStore::parse(read_file(path));
}

void save_weights(const WeightStore& store, const std::filesystem::path& path) {
  write_file(path, store.serialize());
}

std::vector<ParamSpec> parameter_layout(const ModelConfig& cfg) {
  if (cfg.levels < 1 || cfg.levels > kMaxLevels || cfg.width < 1 || cfg.res_blocks < 0)
    throw ConfigError("invalid model configuration");
  std::vector<ParamSpec> out;
  const int w = cfg.width;
  for (int l = 0; l < cfg.levels; ++l) {
    for (int s = 0; s < cfg.steps(); ++s) {
      const std::string p = prefix(l, s);
      add_conv(out, p + "in", w, kChannels * (s + 1), 1);
      for (int r = 0; r < cfg.res_blocks; ++r) {
        add_conv(out, p + "res" + std::to_string(r) + ".c1", w, w, 3);
        add_conv(out, p + "res" + std::to_string(r) + ".c2", w, w, 3);
      }
      add_conv(out, p + "head.d1", w, w, 3);
      add_conv(out, p + "head.d2", w, w, 3);
      add_conv(out, p + "head.d4", w, w, 3);
      add_conv(out, p + "head.out", cfg.head_channels(), w, 1);
    }
    add_conv(out, "l" + std::to_string(l) + ".up", 4 * w, w, 3);
  }
  return out;
}

ModelConfig infer_config(const WeightStore& store) {
  ModelConfig cfg;
  const auto* in = store.find("l0.s0.in.w");
  if (in == nullptr || in->shape.size() != 4) throw FormatError("weight file: missing l0.s0.in.w");
  cfg.width = in->shape[0];
  cfg.levels = 0;
  while (store.find("l" + std::to_string(cfg.levels) + ".up.w") != nullptr) ++cfg.levels;
  cfg.res_blocks = 0;
  while (store.find("l0.s0.res" + std::to_string(cfg.res_blocks) + ".c1.w") != nullptr)
    ++cfg.res_blocks;
  cfg.factorized = store.find("l0.s1.in.w") != nullptr;
  if (cfg.levels == 0) throw FormatError("weight file: no levels");

  const auto layout = parameter_layout(cfg);
  if (layout.size() != store.tensors.size())
    throw FormatError("weight file: tensor count does not match the architecture");
  for (const auto& spec : layout) {
    const auto* e = store.find(spec.name);
    if (e == nullptr) throw FormatError("weight file: missing tensor " + spec.name);
    if (e->shape != spec.shape) throw FormatError("weight file: wrong shape for " + spec.name);
  }
  return cfg;
}

WeightStore init_weights(const ModelConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  WeightStore store;
  for (const auto& spec : parameter_layout(config)) {
    WeightStore::Entry e{spec.name, spec.shape, {}};
    std::size_t n = 1;
    for (int d : spec.shape) n *= static_cast<std::size_t>(d);
    e.values.assign(n, 0.0f);
    if (!spec.bias) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
      for (auto& v : e.values) v = static_cast<float>((2.0 * canonical(rng) - 1.0) * bound);
    }
    store.tensors.push_back(std::move(e));
  }
  return store;
}

template <typename Real>
Tensor<Real> step_input(const AveragePlane& avg, const Image& hi, int step) {
  const int h = avg.height, w = avg.width;
  Tensor<Real> t(kChannels * (step + 1), h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < kChannels; ++c) {
        t.at(c, y, x) = static_cast<Real>(avg.at(x, y, c) / 510.0 - 1.0);
        if (step >= 1)
          t.at(kChannels + c, y, x) = static_cast<Real>(hi.at(2 * x, 2 * y, c) / 127.5 - 1.0);
        if (step >= 2) {
          const int tx = std::min(2 * x + 1, hi.width - 1);
          t.at(2 * kChannels + c, y, x) = static_cast<Real>(hi.at(tx, 2 * y, c) / 127.5 - 1.0);
        }
      }
    }
  }
  return t;
}

template <typename Real>
Network<Real>::Network(const WeightStore& store)
    : config_(infer_config(store)), model_id_(store.hash()) {
  for (const auto& spec : parameter_layout(config_)) {
    index_[spec.name] = static_cast<int>(params_.size());
    names_.push_back(spec.name);
    params_.push_back(to_tensor<Real>(*store.find(spec.name)));
  }
}

template <typename Real>
int Network<Real>::index(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("no parameter named " + name);
  return it->second;
}

template <typename Real>
WeightStore Network<Real>::to_store() const {
  WeightStore store;
  const auto layout = parameter_layout(config_);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    WeightStore::Entry e{layout[i].name, layout[i].shape, {}};
    e.values.assign(params_[i].data.begin(), params_[i].data.end());
    store.tensors.push_back(std::move(e));
  }
  return store;
}

template <typename Real>
std::vector<typename Network<Real>::Var> Network<Real>::bind(
    GradTape<Real>& tape, std::vector<Tensor<Real>>* grads) const {
  std::vector<Var> vars;
  vars.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i)
    vars.push_back(tape.parameter(params_[i], grads ? &(*grads)[i] : nullptr));
  return vars;
}

template <typename Real>
typename Network<Real>::Var Network<Real>::conv(GradTape<Real>& tape, std::span<const Var> bound,
                                                const std::string& name, Var x,
                                                int dilation) const {
  return tape.conv2d(x, bound[index(name + ".w")], bound[index(name + ".b")], dilation);
}

template <typename Real>
typename Network<Real>::StepVars Network<Real>::step(GradTape<Real>& tape,
                                                     std::span<const Var> bound, int level,
                                                     int step, Var input,
                                                     std::optional<Var> feat_prev,
                                                     std::optional<Var> feat_cross) const {
  const Real slope = static_cast<Real>(kLeakySlope);
  const std::string p = prefix(level, step);
  Var h = conv(tape, bound, p + "in", input, 1);
  if (feat_prev) h = tape.add(h, *feat_prev);
  if (feat_cross) h = tape.add(h, *feat_cross);
  for (int r = 0; r < config_.res_blocks; ++r) {
    const std::string rp = p + "res" + std::to_string(r);
    Var a = conv(tape, bound, rp + ".c1", h, 1);
    a = tape.leaky_relu(a, slope);
    a = conv(tape, bound, rp + ".c2", a, 1);
    h = tape.add(h, a);
  }
  Var head = tape.leaky_relu(conv(tape, bound, p + "head.d1", h, 1), slope);
  head = tape.leaky_relu(conv(tape, bound, p + "head.d2", head, 2), slope);
  head = tape.leaky_relu(conv(tape, bound, p + "head.d4", head, 4), slope);
  head = conv(tape, bound, p + "head.out", head, 1);
  return {head, h};
}

template <typename Real>
typename Network<Real>::Var Network<Real>::upsample(GradTape<Real>& tape,
                                                    std::span<const Var> bound, int level,
                                                    Var trunk, int out_height,
                                                    int out_width) const {
  Var u = conv(tape, bound, "l" + std::to_string(level) + ".up", trunk, 1);
  u = tape.pixel_shuffle(u);
  return tape.crop(u, out_height, out_width);
}

template <typename Real>
StepOutput<Real> forward_step(const Network<Real>& net, int level, int step,
                              const AveragePlane& avg, const Image& hi,
                              const Tensor<Real>* feat_prev, const Tensor<Real>* feat_cross) {
  GradTape<Real> tape(false);
  const auto bound = net.bind(tape, nullptr);
  const auto input = tape.constant(step_input<Real>(avg, hi, step));
  std::optional<typename GradTape<Real>::Var> prev, cross;
  if (feat_prev != nullptr) prev = tape.constant(*feat_prev);
  if (feat_cross != nullptr) cross = tape.constant(*feat_cross);
  const auto vars = net.step(tape, bound, level, step, input, prev, cross);
  return {tape.value(vars.head), tape.value(vars.trunk)};
}

template <typename Real>
Tensor<Real> upsample_features(const Network<Real>& net, int level, const Tensor<Real>& trunk,
                               int out_height, int out_width) {
  GradTape<Real> tape(false);
  const auto bound = net.bind(tape, nullptr);
  const auto t = tape.constant(trunk);
  return tape.value(net.upsample(tape, bound, level, t, out_height, out_width));
}

template <typename Real>
MixtureParams params_at(const Tensor<Real>& head, int pos, int y, int x) {
  MixtureParams p;
  const int base = head.channels == kParamsPerPixel ? 0 : pos * kParamsPerPixel;
  for (int i = 0; i < kParamsPerPixel; ++i) p.raw[i] = static_cast<double>(head.at(base + i, y, x));
  return p;
}

template <typename Real>
LevelEvaluator<Real>::LevelEvaluator(const Network<Real>& net, int level,
                                     const AveragePlane& avg, std::optional<Tensor<Real>> cross)
    : net_(net), level_(level), avg_(avg), cross_(std::move(cross)) {}

template <typename Real>
const Tensor<Real>& LevelEvaluator<Real>::params_for(int pos, const Image& hi) {
  const int steps = net_.config().steps();
  if (pos < steps) {
    if (pos != passes_done_) throw ConfigError("LevelEvaluator: passes must run in order");
    auto out = forward_step(net_, level_, pos, avg_, hi, pos > 0 ? &trunk_ : nullptr,
                            pos == 0 && cross_ ? &*cross_ : nullptr);
    head_ = std::move(out.head);
    trunk_ = std::move(out.trunk);
    ++passes_done_;
  }
  return head_;
}

template <typename Real>
Tensor<Real> LevelEvaluator<Real>::cross_features(int fine_height, int fine_width) const {
  if (passes_done_ != net_.config().steps())
    throw ConfigError("LevelEvaluator: cross features requested before the last pass");
  return upsample_features(net_, level_, trunk_, fine_height, fine_width);
}

template class Network<float>;
template class Network<double>;
template class LevelEvaluator<float>;
template class LevelEvaluator<double>;

#define SRCODEC_INSTANTIATE(Real)                                                              \
  template Tensor<Real> step_input<Real>(const AveragePlane&, const Image&, int);              \
  template StepOutput<Real> forward_step<Real>(const Network<Real>&, int, int,                 \
                                               const AveragePlane&, const Image&,              \
                                               const Tensor<Real>*, const Tensor<Real>*);      \
  template Tensor<Real> upsample_features<Real>(const Network<Real>&, int, const Tensor<Real>&, \
                                                int, int);                                     \
  template MixtureParams params_at<Real>(const Tensor<Real>&, int, int, int);

SRCODEC_INSTANTIATE(float)
SRCODEC_INSTANTIATE(double)

#undef SRCODEC_INSTANTIATE

}  // namespace srcodec
