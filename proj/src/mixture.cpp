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

#include "srcodec/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "srcodec/errors.hpp"
#include "srcodec/pyramid.hpp"

namespace srcodec {

namespace {

constexpr double kHalfBin = 1.0 / 255.0;  // half a value step in the [-1, 1] domain
const double kLogMinScale = std::log(kMinScale);

double to_unit(int x) { return x / 127.5 - 1.0; }

// log(sigmoid(z)), stable for large |z|.
double log_sigmoid(double z) {
  return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(sigmoid(u) - sigmoid(v)) for v < u, with u = +inf / v = -inf expressed
// through the open flags, and its partial derivatives.
struct IntervalLog {
  double value = 0.0;
  double du = 0.0;
  double dv = 0.0;
};

IntervalLog log_interval(double u, double v, bool upper_open, bool lower_open) {
  IntervalLog r;
  if (upper_open && lower_open) return r;
  if (upper_open) {
    r.value = log_sigmoid(-v);
    r.dv = -sigmoid(v);
    return r;
  }
  if (lower_open) {
    r.value = log_sigmoid(u);
    r.du = sigmoid(-u);
    return r;
  }
  // sigmoid(u) - sigmoid(v) = sigmoid(u) * sigmoid(-v) * (1 - exp(v - u))
  const double gap = u - v;
  const double em1 = std::expm1(gap);
  r.value = log_sigmoid(u) + log_sigmoid(-v) + std::log(-std::expm1(-gap));
  r.du = sigmoid(-u) + 1.0 / em1;
  r.dv = -sigmoid(v) - 1.0 / em1;
  return r;
}

double effective_mean(const MixtureParams& p, int channel, int k,
                      std::span<const std::uint8_t> prev) {
  double mu = p.at(kMeanR + channel, k);
  if (channel == 1) {
    mu += std::tanh(p.at(kCoeffGR, k)) * to_unit(prev[0]);
  } else if (channel == 2) {
    mu += std::tanh(p.at(kCoeffBR, k)) * to_unit(prev[0]) +
          std::tanh(p.at(kCoeffBG, k)) * to_unit(prev[1]);
  }
  return mu;
}

void log_softmax(const MixtureParams& p, int channel, std::span<double> out) {
  const int m = p.mixtures;
  double top = -INFINITY;
  for (int k = 0; k < m; ++k) top = std::max(top, p.at(kLogitR + channel, k));
  double sum = 0.0;
  for (int k = 0; k < m; ++k) sum += std::exp(p.at(kLogitR + channel, k) - top);
  const double lse = top + std::log(sum);
  for (int k = 0; k < m; ++k) out[k] = p.at(kLogitR + channel, k) - lse;
}

double log_sum_exp(std::span<const double> v) {
  const double top = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(top)) return top;
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - top);
  return top + std::log(sum);
}

void check_channel(int channel, std::span<const std::uint8_t> prev) {
  if (channel < 0 || channel > 2 || prev.size() < static_cast<std::size_t>(channel))
    throw ConfigError("channel_pmf: missing previous channel values");
}

// One channel's contribution to the pixel nll; gradient is accumulated when
// grad is non-null.
double channel_nll(const MixtureParams& p, int channel, const PixelTargets& target,
                   const TruncRange* range, std::array<double, kParamsPerPixel>* grad) {
  const int m = p.mixtures;
  std::array<double, kMixtures> alpha{}, f{}, g{}, fu{}, fv{}, gu{}, gv{}, u{}, v{}, uh{}, vl{},
      inv_s{};
  std::array<bool, kMixtures> clamped{};
  log_softmax(p, channel, std::span<double>(alpha.data(), m));

  const int x = target[channel];
  const double xn = to_unit(x);
  const bool truncated = range != nullptr && !range->full();
  const std::span<const std::uint8_t> prev(target.data(), 2);

  for (int k = 0; k < m; ++k) {
    const double mu = effective_mean(p, channel, k, prev);
    const double ls_raw = p.at(kLogScaleR + channel, k);
    clamped[k] = ls_raw < kLogMinScale;
    inv_s[k] = std::exp(-std::max(ls_raw, kLogMinScale));
    const bool up_open = x == 255;
    const bool lo_open = x == 0;
    u[k] = up_open ? 0.0 : (xn - mu + kHalfBin) * inv_s[k];
    v[k] = lo_open ? 0.0 : (xn - mu - kHalfBin) * inv_s[k];
    const IntervalLog fi = log_interval(u[k], v[k], up_open, lo_open);
    f[k] = fi.value;
    fu[k] = fi.du;
    fv[k] = fi.dv;
    if (truncated) {
      const bool hi_open = range->hi == 255;
      const bool lo_open_r = range->lo == 0;
      uh[k] = hi_open ? 0.0 : (to_unit(range->hi) - mu + kHalfBin) * inv_s[k];
      vl[k] = lo_open_r ? 0.0 : (to_unit(range->lo) - mu - kHalfBin) * inv_s[k];
      const IntervalLog gi = log_interval(uh[k], vl[k], hi_open, lo_open_r);
      g[k] = gi.value;
      gu[k] = gi.du;
      gv[k] = gi.dv;
    }
  }

  std::array<double, kMixtures> af{}, ag{};
  for (int k = 0; k < m; ++k) {
    af[k] = alpha[k] + f[k];
    ag[k] = alpha[k] + g[k];
  }
  const double lse_f = log_sum_exp(std::span<const double>(af.data(), m));
  const double lse_g = truncated ? log_sum_exp(std::span<const double>(ag.data(), m)) : 0.0;
  const double bits = -(lse_f - lse_g) / std::numbers::ln2;

  if (grad != nullptr) {
    auto& gr = *grad;
    const double inv_ln2 = 1.0 / std::numbers::ln2;
    for (int k = 0; k < m; ++k) {
      const double r = std::exp(af[k] - lse_f);
      const double q = truncated ? std::exp(ag[k] - lse_g) : std::exp(alpha[k]);
      gr[(kLogitR + channel) * m + k] += -(r - q) * inv_ln2;
      double dmu = 0.0;
      double dls = 0.0;
      if (r > 0.0) {
        dmu = r * (fu[k] + fv[k]) * inv_s[k];
        dls = r * (fu[k] * u[k] + fv[k] * v[k]);
      }
      if (truncated && q > 0.0) {
        dmu -= q * (gu[k] + gv[k]) * inv_s[k];
        dls -= q * (gu[k] * uh[k] + gv[k] * vl[k]);
      }
      dmu *= inv_ln2;
      dls *= inv_ln2;
      gr[(kMeanR + channel) * m + k] += dmu;
      if (!clamped[k]) gr[(kLogScaleR + channel) * m + k] += dls;
      if (channel == 1) {
        const double t = std::tanh(p.at(kCoeffGR, k));
        gr[kCoeffGR * m + k] += dmu * (1.0 - t * t) * to_unit(target[0]);
      } else if (channel == 2) {
        const double tr = std::tanh(p.at(kCoeffBR, k));
        const double tg = std::tanh(p.at(kCoeffBG, k));
        gr[kCoeffBR * m + k] += dmu * (1.0 - tr * tr) * to_unit(target[0]);
        gr[kCoeffBG * m + k] += dmu * (1.0 - tg * tg) * to_unit(target[1]);
      }
    }
  }
  return bits;
}

}  // namespace

double bin_prob(double mu, double s, int x) {
  const double upper = (x + 0.5 - mu) / s;
  const double lower = (x - 0.5 - mu) / s;
  if (x <= 0) return sigmoid(upper);
  if (x >= 255) return sigmoid(-lower);
  // Subtract on the side of the distribution where both terms are small.
  if (x > mu) return sigmoid(-lower) - sigmoid(-upper);
  return sigmoid(upper) - sigmoid(lower);
}

void channel_pmf(const MixtureParams& params, int channel, std::span<const std::uint8_t> prev,
                 Pmf& out, std::optional<TruncRange> range) {
  check_channel(channel, prev);
  const int m = params.mixtures;
  const TruncRange r = range.value_or(TruncRange{});
  std::array<double, kMixtures> logw{};
  log_softmax(params, channel, std::span<double>(logw.data(), m));

  out.fill(0.0);
  // t[e] = exp(-|z|) at the bin edge e - 0.5 and a[e] = 1 / (1 + t[e]). Edges
  // are equally spaced, so t is a geometric sequence on each side of the mean.
  std::array<double, kValues + 1> t{}, a{};
  for (int k = 0; k < m; ++k) {
    const double w = std::exp(logw[k]);
    if (w == 0.0) continue;
    const double mu_pix = (effective_mean(params, channel, k, prev) + 1.0) * 127.5;
    const double s_pix =
        std::exp(std::max(params.at(kLogScaleR + channel, k), kLogMinScale)) * 127.5;
    const double inv = 1.0 / s_pix;
    const double q = std::exp(-inv);
    const double one_minus_q = -std::expm1(-inv);
    auto z_at = [&](int e) { return (e - 0.5 - mu_pix) * inv; };

    if (r.lo == 0) out[0] += w * sigmoid(z_at(1));
    if (r.hi == kValues - 1) out[kValues - 1] += w * sigmoid(-z_at(kValues - 1));

    // First edge at or above the mean. Both sequences start next to it so the
    // values do not depend on the requested range; they stop once t underflows.
    const int split = std::clamp(static_cast<int>(std::ceil(mu_pix + 0.5)), 0, kValues + 1);
    int right_end = r.hi + 1;
    double v = 0.0;
    for (int e = split; e <= r.hi + 1; ++e) {
      v = e == split ? std::exp(-z_at(e)) : v * q;
      if (v < 1e-280) v = 0.0;
      t[e] = v;
      a[e] = 1.0 / (1.0 + v);
      if (v == 0.0) {
        right_end = e;
        break;
      }
    }
    int left_end = r.lo;
    for (int e = split - 1; e >= r.lo; --e) {
      v = e == split - 1 ? std::exp(z_at(e)) : v * q;
      if (v < 1e-280) v = 0.0;
      if (e <= r.hi + 1) {
        t[e] = v;
        a[e] = 1.0 / (1.0 + v);
      }
      if (v == 0.0) {
        left_end = e;
        break;
      }
    }

    // Interior bins outside [left_end, right_end) have both edges in an
    // underflowed tail and get no mass.
    const int x0 = std::max({r.lo, 1, left_end});
    const int x1 = std::min({r.hi, kValues - 2, right_end - 1});
    const double wq = w * one_minus_q;
    const int left_stop = std::min(x1, split - 2);
    for (int x = x0; x <= left_stop; ++x) out[x] += wq * t[x + 1] * a[x] * a[x + 1];
    const int mid = split - 1;
    if (mid >= x0 && mid <= x1) out[mid] += w * (a[mid + 1] - t[mid] * a[mid]);
    for (int x = std::max(x0, split); x <= x1; ++x) out[x] += wq * t[x] * a[x] * a[x + 1];
  }
}

TruncRange valid_range(int avg_quarters, int count, std::span<const std::uint8_t> decoded) {
  const int remaining = count - static_cast<int>(decoded.size());
  if (remaining < 2) throw ConfigError("valid_range: the last pixel of a block is never coded");
  const int rest = block_sum(avg_quarters, count) -
                   std::accumulate(decoded.begin(), decoded.end(), 0);
  TruncRange r{std::max(0, rest - 255 * (remaining - 1)), std::min(255, rest)};
  if (r.lo > r.hi)
    throw CorruptionError("empty admissible range [" + std::to_string(r.lo) + ", " +
                          std::to_string(r.hi) + "]");
  return r;
}

void truncate(Pmf& pmf, TruncRange range) {
  double mass = 0.0;
  for (int x = 0; x < kValues; ++x) {
    if (x < range.lo || x > range.hi) {
      pmf[x] = 0.0;
    } else {
      mass += pmf[x];
    }
  }
  if (!(mass > 1e-300) || !std::isfinite(mass)) {
    const double u = 1.0 / range.size();
    for (int x = range.lo; x <= range.hi; ++x) pmf[x] = u;
    return;
  }
  for (int x = range.lo; x <= range.hi; ++x) pmf[x] /= mass;
}

double nll(const MixtureParams& params, const PixelTargets& target, const PixelRanges* ranges) {
  double bits = 0.0;
  for (int c = 0; c < 3; ++c)
    bits += channel_nll(params, c, target, ranges ? &(*ranges)[c] : nullptr, nullptr);
  return bits;
}

double nll_grad(const MixtureParams& params, const PixelTargets& target, const PixelRanges* ranges,
                std::array<double, kParamsPerPixel>& grad) {
  grad.fill(0.0);
  double bits = 0.0;
  for (int c = 0; c < 3; ++c)
    bits += channel_nll(params, c, target, ranges ? &(*ranges)[c] : nullptr, &grad);
  return bits;
}

int sample_pmf(const Pmf& pmf, TruncRange range, std::mt19937_64& rng) {
  double total = 0.0;
  for (int x = range.lo; x <= range.hi; ++x) total += pmf[x];
  const double target = canonical(rng) * total;
  double acc = 0.0;
  for (int x = range.lo; x <= range.hi; ++x) {
    acc += pmf[x];
    if (target < acc) return x;
  }
  return range.hi;
}

int sample(const MixtureParams& params, int channel, std::span<const std::uint8_t> prev,
           std::optional<TruncRange> range, std::mt19937_64& rng) {
  Pmf pmf;
  const TruncRange r = range.value_or(TruncRange{});
  channel_pmf(params, channel, prev, pmf, r);
  truncate(pmf, r);
  return sample_pmf(pmf, r, rng);
}

}  // namespace srcodec
