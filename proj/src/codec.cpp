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

#include "srcodec/codec.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include "srcodec/errors.hpp"
#include "srcodec/range_coder.hpp"

namespace srcodec {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("container truncated in ") + what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8(const char* what) { return take(1, what)[0]; }
  std::uint32_t u32(const char* what) {
    auto s = take(4, what);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(s[k]) << (8 * k);
    return v;
  }
  std::uint64_t u64(const char* what) {
    auto s = take(8, what);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(s[k]) << (8 * k);
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::size_t residual_bytes(int w, int h) {
  return (static_cast<std::size_t>(w) * h * kChannels * 2 + 7) / 8;
}

std::vector<std::uint8_t> pack_residual(const ResidualPlane& r) {
  std::vector<std::uint8_t> out(residual_bytes(r.width, r.height), 0);
  for (std::size_t k = 0; k < r.codes.size(); ++k)
    out[k / 4] |= static_cast<std::uint8_t>(r.codes[k] << (6 - 2 * (k % 4)));
  return out;
}

ResidualPlane unpack_residual(std::span<const std::uint8_t> bytes, int w, int h) {
  ResidualPlane r{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * kChannels)};
  for (std::size_t k = 0; k < r.codes.size(); ++k)
    r.codes[k] = (bytes[k / 4] >> (6 - 2 * (k % 4))) & 3;
  const std::size_t used = r.codes.size() % 4;
  if (used != 0 && (bytes.back() & ((1u << (8 - 2 * used)) - 1)) != 0)
    throw CorruptionError("nonzero padding bits in a residual section");
  return r;
}

std::uint32_t crc_of(const Image& image) {
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), image.data.data(), static_cast<uInt>(image.data.size())));
}

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
  const std::size_t t = std::min<std::size_t>(std::max(threads, 1), n);
  if (t <= 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + t - 1) / t;
  for (std::size_t w = 0; w < t; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t k = w * chunk; k < std::min(n, (w + 1) * chunk); ++k) fn(k);
    });
  for (auto& th : pool) th.join();
}

void fill_free(const AveragePlane& avg, Image& hi, int pos, bool clamp) {
  for (int i = 0; i < avg.height; ++i) {
    for (int j = 0; j < avg.width; ++j) {
      const BlockGeometry g = block_geometry(avg.width, avg.height, hi.width, hi.height, i, j);
      if (g.free_pos != pos) continue;
      const int fx = 2 * j + kBlockOffsets[pos][1], fy = 2 * i + kBlockOffsets[pos][0];
      for (int c = 0; c < kChannels; ++c) {
        std::array<std::uint8_t, 3> decoded{};
        int n = 0;
        for (int q = 0; q < pos; ++q)
          if (g.present[q])
            decoded[n++] = hi.at(2 * j + kBlockOffsets[q][1], 2 * i + kBlockOffsets[q][0], c);
        const std::span<const std::uint8_t> d(decoded.data(), n);
        if (clamp) {
          const int v = g.count * avg.at(j, i, c) / 4 - std::accumulate(d.begin(), d.end(), 0);
          hi.at(fx, fy, c) = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
        } else {
          hi.at(fx, fy, c) = free_pixel(avg.at(j, i, c), g.count, d);
        }
      }
    }
  }
}

struct Site {
  int i, j, x, y;
};

// Walks one level in coding order: passes TL, TR, BL, then channels R, G, B,
// then blocks in raster order. `prepare(k, pmf, range)` runs in parallel over
// the sites of a plane; `commit(k, site, c, range)` runs sequentially and
// returns the pixel value.
template <typename Prepare, typename Commit>
void walk_level(Predictor& pred, int level, const AveragePlane& avg, Image& hi, bool constraints,
                bool clamp_free, int threads, Prepare&& prepare, Commit&& commit) {
  pred.begin_level(level, avg, hi.width, hi.height);
  fill_free(avg, hi, 0, clamp_free);
  std::vector<Site> sites;
  std::vector<TruncRange> ranges;
  for (int pos = 0; pos < 3; ++pos) {
    pred.begin_pass(pos, hi);
    sites.clear();
    std::vector<BlockGeometry> geoms;
    for (int i = 0; i < avg.height; ++i)
      for (int j = 0; j < avg.width; ++j) {
        const BlockGeometry g = block_geometry(avg.width, avg.height, hi.width, hi.height, i, j);
        if (!g.coded(pos)) continue;
        sites.push_back({i, j, 2 * j + kBlockOffsets[pos][1], 2 * i + kBlockOffsets[pos][0]});
        geoms.push_back(g);
      }
    ranges.assign(sites.size(), TruncRange{});
    for (int c = 0; c < kChannels; ++c) {
      parallel_for(sites.size(), threads, [&](std::size_t k) {
        const Site& s = sites[k];
        std::array<std::uint8_t, 2> prev{};
        for (int q = 0; q < c; ++q) prev[q] = hi.at(s.x, s.y, q);
        std::optional<TruncRange> range;
        if (constraints) {
          const BlockGeometry& g = geoms[k];
          std::array<std::uint8_t, 3> decoded{};
          int n = 0;
          for (int q = 0; q < pos; ++q)
            if (g.present[q])
              decoded[n++] = hi.at(2 * s.j + kBlockOffsets[q][1], 2 * s.i + kBlockOffsets[q][0], c);
          range = valid_range(avg.at(s.j, s.i, c), g.count,
                              std::span<const std::uint8_t>(decoded.data(), n));
          ranges[k] = *range;
        }
        Pmf pmf;
        pred.pmf(s.i, s.j, c, std::span<const std::uint8_t>(prev.data(), c), pmf, range);
        prepare(k, pmf, ranges[k]);
      });
      for (std::size_t k = 0; k < sites.size(); ++k)
        hi.at(sites[k].x, sites[k].y, c) = commit(k, sites[k], c, ranges[k]);
    }
    fill_free(avg, hi, pos + 1, clamp_free);
  }
  fill_free(avg, hi, 3, clamp_free);
}

bool resolve_constraints(ConstraintMode mode, const Predictor& pred) {
  switch (mode) {
    case ConstraintMode::kOn: return true;
    case ConstraintMode::kOff: return false;
    case ConstraintMode::kAuto: return pred.default_constraints();
  }
  return false;
}

std::string level_name(int level) { return "x^(" + std::to_string(level) + ")"; }

}  // namespace

ConstraintMode parse_constraints(const std::string& value) {
  if (value == "on") return ConstraintMode::kOn;
  if (value == "off") return ConstraintMode::kOff;
  if (value == "auto") return ConstraintMode::kAuto;
  throw ConfigError("--constraints must be on, off or auto");
}

std::vector<std::uint8_t> Container::serialize() const {
  std::vector<std::uint8_t> out(std::begin(kContainerMagic), std::end(kContainerMagic));
  out.push_back(kContainerVersion);
  put_u32(out, static_cast<std::uint32_t>(width));
  put_u32(out, static_cast<std::uint32_t>(height));
  out.push_back(static_cast<std::uint8_t>(levels));
  put_u64(out, model_id);
  out.push_back(static_cast<std::uint8_t>((constraints ? 1 : 0) |
                                          (static_cast<int>(predictor) << 1)));
  out.insert(out.end(), base.begin(), base.end());
  for (const auto& r : residuals) {
    put_u32(out, static_cast<std::uint32_t>(r.size()));
    out.insert(out.end(), r.begin(), r.end());
  }
  for (const auto& s : streams) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
  }
  put_u32(out, checksum);
  return out;
}

Container Container::parse(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const auto magic = in.take(sizeof(kContainerMagic), "magic");
  if (!std::equal(magic.begin(), magic.end(), std::begin(kContainerMagic)))
    throw FormatError("not an SREC1 container");
  const int version = in.u8("version");
  if (version != kContainerVersion)
    throw FormatError("unsupported container version " + std::to_string(version));
  Container c;
  const std::uint32_t w = in.u32("width"), h = in.u32("height");
  if (w == 0 || h == 0 || w > kMaxDimension || h > kMaxDimension)
    throw FormatError("invalid image dimensions");
  c.width = static_cast<int>(w);
  c.height = static_cast<int>(h);
  c.levels = in.u8("levels");
  if (c.levels > kMaxLevels) throw FormatError("too many levels");
  c.model_id = in.u64("model id");
  const int flags = in.u8("flags");
  if ((flags >> 3) != 0 || (flags >> 1) > 2) throw FormatError("unknown flags");
  c.constraints = flags & 1;
  c.predictor = static_cast<PredictorKind>(flags >> 1);

  const int bw = level_extent(c.width, c.levels), bh = level_extent(c.height, c.levels);
  const auto base = in.take(static_cast<std::size_t>(bw) * bh * kChannels, "raw base");
  c.base.assign(base.begin(), base.end());
  for (int l = c.levels; l >= 1; --l) {
    const std::uint32_t n = in.u32("residual length");
    if (n != residual_bytes(level_extent(c.width, l), level_extent(c.height, l)))
      throw FormatError("residual section " + std::to_string(l) + " has the wrong length");
    const auto r = in.take(n, "residual section");
    c.residuals.emplace_back(r.begin(), r.end());
  }
  for (int l = c.levels - 1; l >= 0; --l) {
    const std::uint32_t n = in.u32("stream length");
    const auto s = in.take(n, "level stream");
    c.streams.emplace_back(s.begin(), s.end());
  }
  c.checksum = in.u32("checksum");
  if (in.remaining() != 0) throw FormatError("trailing bytes after container");
  return c;
}

std::vector<std::uint8_t> compress(const Image& image, Predictor& predictor,
                                   const CodecOptions& opts) {
  if (image.width <= 0 || image.height <= 0) throw ConfigError("empty image");
  if (opts.levels < 0 || opts.levels > kMaxLevels)
    throw ConfigError("levels must be within [0, " + std::to_string(kMaxLevels) + "]");
  if (predictor.levels() != 0 && predictor.levels() != opts.levels)
    throw ConfigError("the model was trained for " + std::to_string(predictor.levels()) +
                      " levels, not " + std::to_string(opts.levels));
  const bool constraints = resolve_constraints(opts.constraints, predictor);
  const Pyramid pyr = build_pyramid(image, opts.levels);

  Container c;
  c.width = image.width;
  c.height = image.height;
  c.levels = opts.levels;
  c.model_id = predictor.model_id();
  c.constraints = constraints;
  c.predictor = predictor.kind();
  c.base = pyr.levels[opts.levels].data;
  for (int l = opts.levels; l >= 1; --l) c.residuals.push_back(pack_residual(pyr.residuals[l - 1]));

  std::vector<CdfTable> tables;
  for (int l = opts.levels - 1; l >= 0; --l) {
    const Image& truth = pyr.levels[l];
    Image hi(truth.width, truth.height);
    RangeEncoder enc;
    tables.resize(static_cast<std::size_t>(truth.width) * truth.height);
    walk_level(
        predictor, l, pyr.averages[l], hi, constraints, false, opts.threads,
        [&](std::size_t k, const Pmf& pmf, TruncRange r) {
          build_cdf(std::span<const double>(pmf.data() + r.lo, r.size()), tables[k]);
        },
        [&](std::size_t k, const Site& s, int ch, TruncRange r) {
          const int v = truth.at(s.x, s.y, ch);
          enc.encode(tables[k], v - r.lo);
          return static_cast<std::uint8_t>(v);
        });
    if (hi != truth) throw Error("internal error: encoder state diverged at level " + std::to_string(l));
    c.streams.push_back(enc.finish());
  }
  c.checksum = crc_of(image);
  return c.serialize();
}

Image decompress(std::span<const std::uint8_t> bytes, Predictor& predictor, int threads) {
  const Container c = Container::parse(bytes);
  if (c.predictor != predictor.kind())
    throw ConfigError(std::string("container was written with the ") +
                      predictor_name(c.predictor) + " predictor");
  if (c.model_id != predictor.model_id()) {
    std::ostringstream msg;
    msg << "model id " << std::hex << predictor.model_id() << " does not match container id "
        << c.model_id;
    throw HashMismatchError(msg.str());
  }
  if (predictor.levels() != 0 && predictor.levels() != c.levels)
    throw FormatError("container levels do not match the model");

  Image low(level_extent(c.width, c.levels), level_extent(c.height, c.levels));
  low.data = c.base;
  std::vector<CdfTable> tables;
  for (int l = c.levels - 1; l >= 0; --l) {
    const auto& res = c.residuals[c.levels - 1 - l];
    const AveragePlane avg = reconstruct_average(low, unpack_residual(res, low.width, low.height));
    Image hi(level_extent(c.width, l), level_extent(c.height, l));
    int pass = 0, channel = 0;
    try {
      RangeDecoder dec(c.streams[c.levels - 1 - l]);
      tables.resize(static_cast<std::size_t>(hi.width) * hi.height);
      walk_level(
          predictor, l, avg, hi, c.constraints, false, threads,
          [&](std::size_t k, const Pmf& pmf, TruncRange r) {
            build_cdf(std::span<const double>(pmf.data() + r.lo, r.size()), tables[k]);
          },
          [&](std::size_t k, const Site& s, int ch, TruncRange r) {
            pass = (s.y % 2) * 2 + s.x % 2;
            channel = ch;
            return static_cast<std::uint8_t>(r.lo + dec.decode(tables[k]));
          });
      if (!dec.exhausted()) throw CorruptionError("stream has unread bytes");
    } catch (const CorruptionError& e) {
      throw CorruptionError("level " + std::to_string(l) + " pass " + std::to_string(pass) +
                            " channel " + "RGB"[channel] + ": " + e.what());
    }
    low = std::move(hi);
  }
  if (crc_of(low) != c.checksum) throw CorruptionError("checksum mismatch");
  return low;
}

Image decompress(std::span<const std::uint8_t> bytes, const WeightStore* weights, int threads) {
  const Container c = Container::parse(bytes);
  auto pred = make_predictor(c.predictor, c.predictor == PredictorKind::kCnn ? weights : nullptr);
  return decompress(bytes, *pred, threads);
}

const StatsRow& StatsReport::row(const std::string& name) const {
  for (const auto& r : rows)
    if (r.name == name) return r;
  throw ConfigError("no stats row named " + name);
}

std::string StatsReport::format() const {
  std::ostringstream out;
  out << width << "x" << height << "\n";
  out << std::left << std::setw(20) << "" << std::right << std::setw(10) << "bits"
      << std::setw(10) << "bpsp" << std::setw(8) << "%" << "\n";
  out << std::fixed;
  for (const auto& r : rows)
    out << std::left << std::setw(20) << r.name << std::right << std::setw(10) << r.bits
        << std::setw(10) << std::setprecision(5) << r.bpsp << std::setw(8) << std::setprecision(1)
        << 100.0 * r.bpsp / total_bpsp << "\n";
  out << std::left << std::setw(20) << "total" << std::right << std::setw(10) << 8 * total_bytes
      << std::setw(10) << std::setprecision(5) << total_bpsp << "\n";
  return out.str();
}

StatsReport stats(std::span<const std::uint8_t> bytes) {
  const Container c = Container::parse(bytes);
  StatsReport rep;
  rep.width = c.width;
  rep.height = c.height;
  const double sub = 3.0 * c.width * c.height;
  auto add = [&](std::string name, std::size_t bits) {
    rep.rows.push_back({std::move(name), bits, bits / sub});
  };
  std::size_t codes = 0, residual_bytes = 0;
  int w = c.width, h = c.height;
  for (int l = 1; l <= c.levels; ++l) {
    w = (w + 1) / 2;
    h = (h + 1) / 2;
    codes += 3 * static_cast<std::size_t>(w) * h;
  }
  for (const auto& r : c.residuals) residual_bytes += r.size();
  const std::size_t padding = 8 * residual_bytes - 2 * codes;
  add("rounding bits", 2 * codes);
  add("metadata", 64);
  add("container",
      8 * (kHeaderBytes - 8 + 4 * (c.residuals.size() + c.streams.size()) + 4) + padding);
  add(level_name(c.levels) + " raw", 8 * c.base.size());
  for (int l = c.levels - 1; l >= 0; --l)
    add(level_name(l), 8 * c.streams[c.levels - 1 - l].size());
  rep.total_bytes = bytes.size();
  rep.total_bpsp = 8.0 * rep.total_bytes / sub;
  return rep;
}

Image sample(const Image& low, Predictor& predictor, int levels, std::uint64_t seed,
             bool constraints) {
  if (levels < 0 || levels > kMaxLevels) throw ConfigError("levels out of range");
  if (predictor.levels() != 0 && predictor.levels() != levels)
    throw ConfigError("the model was trained for " + std::to_string(predictor.levels()) + " levels");
  std::mt19937_64 rng(seed);
  Image cur = low;
  std::vector<Pmf> pmfs;
  for (int l = levels - 1; l >= 0; --l) {
    AveragePlane avg{cur.width, cur.height, std::vector<std::int32_t>(cur.data.size())};
    for (std::size_t k = 0; k < cur.data.size(); ++k) avg.quarters[k] = 4 * cur.data[k];
    Image hi(2 * cur.width, 2 * cur.height);
    pmfs.resize(static_cast<std::size_t>(cur.width) * cur.height);
    walk_level(
        predictor, l, avg, hi, constraints, !constraints, 1,
        [&](std::size_t k, const Pmf& pmf, TruncRange) { pmfs[k] = pmf; },
        [&](std::size_t k, const Site&, int, TruncRange r) {
          return static_cast<std::uint8_t>(sample_pmf(pmfs[k], r, rng));
        });
    cur = std::move(hi);
  }
  return cur;
}

}  // namespace srcodec
