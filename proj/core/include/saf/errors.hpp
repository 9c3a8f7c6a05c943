// Copyright 2026 The SAF Authors. All Rights Reserved.
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
#pragma once

#include <stdexcept>
#include <string>

namespace saf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor ranks or extents that do not fit an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class InvalidPermutationError : public Error {
 public:
  using Error::Error;
};

// A target category outside [0, C) that is not the ignore label.
class InvalidLabelError : public Error {
 public:
  using Error::Error;
};

// Transform parameters that cannot be applied to the given frame size.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent configuration. Maps to CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing or corrupt on-disk artifact; the message always names the file.
class CodecError : public Error {
 public:
  CodecError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Non-finite loss during training or attack. Maps to CLI exit code 3.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& where, int index)
      : Error(where + " diverged (non-finite loss) at index " +
              std::to_string(index)),
        index_(index) {}
  int index() const { return index_; }

 private:
  int index_;
};

}  // namespace saf
