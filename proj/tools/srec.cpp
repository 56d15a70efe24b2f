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

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "srcodec/codec.hpp"
#include "srcodec/errors.hpp"
#include "srcodec/trainer.hpp"

namespace fs = std::filesystem;
using namespace srcodec;

namespace {

struct Common {
  std::string input;
  std::string output;
  std::string weights;
  int levels = 3;
  std::string predictor;
  std::string constraints = "auto";
  std::uint64_t seed = 1;
  int threads = 1;
};

std::optional<WeightStore> maybe_weights(const Common& o) {
  if (o.weights.empty()) return std::nullopt;
  return load_weights(o.weights);
}

std::unique_ptr<Predictor> predictor_for(const Common& o, const std::optional<WeightStore>& w) {
  const std::string name = o.predictor.empty() ? (w ? "cnn" : "heuristic") : o.predictor;
  return make_predictor(parse_predictor(name), w ? &*w : nullptr);
}

int levels_for(const Common& o, const Predictor& p, const CLI::App& cmd) {
  if (p.levels() != 0 && cmd.count("--levels") == 0) return p.levels();
  return o.levels;
}

// Smooth synthetic content for benchmarks when no source image is given.
Image synthetic(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < kChannels; ++c) {
        const double v = 128 + 60 * std::sin(0.05 * x + c) * std::cos(0.07 * y) +
                         static_cast<int>(rng() % 9) - 4;
        img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
  return img;
}

Image tile_to(const Image& src, int w, int h) {
  Image out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < kChannels; ++c) out.at(x, y, c) = src.at(x % src.width, y % src.height, c);
  return out;
}

std::vector<Image> load_corpus(const std::vector<std::string>& paths) {
  std::vector<Image> images;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file()) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) images.push_back(read_image(f));
    } else {
      images.push_back(read_image(p));
    }
  }
  return images;
}

int selftest() {
  std::mt19937_64 rng(11);
  const WeightStore w = init_weights(ModelConfig{3, 8, 1, true}, 3);
  int failures = 0, runs = 0;
  for (auto [wd, ht] : {std::pair{1, 1}, {1, 7}, {5, 3}, {8, 8}, {33, 17}}) {
    Image img(wd, ht);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng());
    for (auto kind : {PredictorKind::kUniform, PredictorKind::kHeuristic, PredictorKind::kCnn})
      for (auto mode : {ConstraintMode::kOff, ConstraintMode::kOn}) {
        auto enc = make_predictor(kind, &w);
        auto dec = make_predictor(kind, &w);
        const auto bytes = compress(img, *enc, {3, mode, 1});
        ++runs;
        if (!(decompress(bytes, *dec) == img)) {
          ++failures;
          std::cout << "FAIL " << wd << "x" << ht << " " << predictor_name(kind) << "\n";
        }
      }
  }
  std::cout << (runs - failures) << "/" << runs << " round trips ok\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"srec: lossless image compression by super-resolution"};
  app.require_subcommand(1);
  Common o;

  auto add_io = [&](CLI::App* cmd, bool need_output) {
    cmd->add_option("-i,--input", o.input, "input file")->required();
    auto* out = cmd->add_option("-o,--output", o.output, "output file");
    if (need_output) out->required();
    cmd->add_option("-w,--weights", o.weights, "weight file");
    cmd->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  };
  auto add_model = [&](CLI::App* cmd) {
    cmd->add_option("--levels", o.levels, "super-resolution levels")->check(CLI::Range(0, kMaxLevels));
    cmd->add_option("--predictor", o.predictor, "uniform, heuristic or cnn")
        ->check(CLI::IsMember({"uniform", "heuristic", "cnn"}));
    cmd->add_option("--constraints", o.constraints, "on, off or auto")
        ->check(CLI::IsMember({"on", "off", "auto"}));
  };

  auto* c_compress = app.add_subcommand("compress", "image -> .srec");
  add_io(c_compress, true);
  add_model(c_compress);

  auto* c_decompress = app.add_subcommand("decompress", ".srec -> image");
  add_io(c_decompress, true);

  auto* c_stats = app.add_subcommand("stats", "per-section size breakdown of a container or image");
  add_io(c_stats, false);
  add_model(c_stats);

  auto* c_sample = app.add_subcommand("sample", "super-resolve a low-resolution image by sampling");
  add_io(c_sample, true);
  add_model(c_sample);
  c_sample->add_option("--seed", o.seed, "sampling seed");

  std::string config_path;
  std::vector<std::string> data;
  int tiles = 0;
  auto* c_train = app.add_subcommand("train", "train a cnn predictor");
  c_train->add_option("-c,--config", config_path, "key=value config file");
  c_train->add_option("--data", data, "images or directories")->required();
  c_train->add_option("-o,--output", o.output, "weight file to write")->required();
  c_train->add_option("--tiles", tiles, "cut a fixed corpus of this many tiles first");
  c_train->add_option("--seed", o.seed, "training seed");
  c_train->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);

  std::vector<int> sizes{64, 128, 256};
  auto* c_bench = app.add_subcommand("bench", "encode/decode timing per image size");
  c_bench->add_option("--sizes", sizes, "square sizes")->delimiter(',');
  c_bench->add_option("-i,--input", o.input, "source image, tiled to each size");
  c_bench->add_option("-w,--weights", o.weights, "weight file");
  c_bench->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  add_model(c_bench);

  auto* c_selftest = app.add_subcommand("selftest", "round-trip smoke test");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*c_compress) {
      const auto w = maybe_weights(o);
      auto pred = predictor_for(o, w);
      const Image img = read_image(o.input);
      const auto bytes = compress(img, *pred, {levels_for(o, *pred, *c_compress),
                                               parse_constraints(o.constraints), o.threads});
      write_file(o.output, bytes);
      std::cout << o.output << ": " << bytes.size() << " bytes, "
                << 8.0 * bytes.size() / img.subpixel_count() << " bpsp\n";
    } else if (*c_decompress) {
      const auto w = maybe_weights(o);
      const auto bytes = read_file(o.input);
      write_image(decompress(bytes, w ? &*w : nullptr, o.threads), o.output);
    } else if (*c_stats) {
      auto bytes = read_file(o.input);
      if (bytes.size() < sizeof(kContainerMagic) ||
          !std::equal(std::begin(kContainerMagic), std::end(kContainerMagic), bytes.begin())) {
        const auto w = maybe_weights(o);
        auto pred = predictor_for(o, w);
        bytes = compress(read_image(o.input), *pred, {levels_for(o, *pred, *c_stats),
                                                      parse_constraints(o.constraints), o.threads});
      }
      std::cout << stats(bytes).format();
    } else if (*c_sample) {
      const auto w = maybe_weights(o);
      auto pred = predictor_for(o, w);
      const ConstraintMode mode = parse_constraints(o.constraints);
      const bool constraints = mode == ConstraintMode::kAuto ? true : mode == ConstraintMode::kOn;
      write_image(sample(read_image(o.input), *pred, levels_for(o, *pred, *c_sample), o.seed,
                         constraints),
                  o.output);
    } else if (*c_train) {
      TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_train_config(config_path);
      if (c_train->count("--seed")) cfg.seed = o.seed;
      if (c_train->count("--threads")) cfg.threads = o.threads;
      std::vector<Image> corpus = load_corpus(data);
      if (tiles > 0) corpus = cut_tiles(corpus, tiles, cfg.crop, cfg.seed);
      std::ofstream log_file;
      std::ostream* log = &std::cout;
      if (!cfg.log.empty()) {
        log_file.open(cfg.log);
        if (!log_file) throw Error("cannot write " + cfg.log);
        log = &log_file;
      }
      save_weights(train(corpus, cfg, {}, log), o.output);
    } else if (*c_bench) {
      const auto w = maybe_weights(o);
      auto pred = predictor_for(o, w);
      auto dec = predictor_for(o, w);
      const Image src = o.input.empty() ? Image() : read_image(o.input);
      std::cout << "size  encode_s  decode_s  bpsp\n";
      for (int s : sizes) {
        const Image img = src.empty() ? synthetic(s, s, o.seed) : tile_to(src, s, s);
        const CodecOptions opts{levels_for(o, *pred, *c_bench), parse_constraints(o.constraints),
                                o.threads};
        const auto t0 = std::chrono::steady_clock::now();
        const auto bytes = compress(img, *pred, opts);
        const auto t1 = std::chrono::steady_clock::now();
        const Image back = decompress(bytes, *dec, o.threads);
        const auto t2 = std::chrono::steady_clock::now();
        if (!(back == img)) throw CorruptionError("bench round trip failed");
        std::cout << s << "  " << std::chrono::duration<double>(t1 - t0).count() << "  "
                  << std::chrono::duration<double>(t2 - t1).count() << "  "
                  << 8.0 * bytes.size() / img.subpixel_count() << "\n";
      }
    } else if (*c_selftest) {
      return selftest();
    }
  } catch (const Error& e) {
    std::cerr << "srec: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "srec: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
