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


#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>

#include "srcodec/image.hpp"

namespace srtest {

inline srcodec::Image random_image(int w, int h, std::mt19937_64& rng) {
  srcodec::Image img(w, h);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng());
  return img;
}

inline std::string data_path(const std::string& name) {
  return std::string(SRCODEC_TEST_DATA) + "/" + name;
}

inline const srcodec::Image& natural(const std::string& name) {
  static std::map<std::string, srcodec::Image> cache;
  auto it = cache.find(name);
  if (it == cache.end())
    it = cache.emplace(name, srcodec::read_image(data_path("natural/" + name + ".ppm"))).first;
  return it->second;
}

}  // namespace srtest
