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

#include <stdexcept>
#include <string>

namespace srcodec {

// Base of every error raised by the library. The exit code is what the
// command-line tool returns when the error escapes to main().
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, int exit_code = 1)
      : std::runtime_error(what), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

// Malformed input file: bad magic, unsupported version, truncated header,
// shape mismatch in a weight file.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(what, 2) {}
};

// The container was produced with a different model than the one supplied.
class HashMismatchError : public Error {
 public:
  explicit HashMismatchError(const std::string& what) : Error(what, 3) {}
};

// The payload is internally inconsistent: stream underrun, decoded value
// outside its admissible range, residual that breaks block divisibility.
class CorruptionError : public Error {
 public:
  explicit CorruptionError(const std::string& what) : Error(what, 4) {}
};

// Invalid configuration or a numerical failure during training.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what, 1) {}
};

}  // namespace srcodec
