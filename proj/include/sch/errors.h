// Copyright 2026 The SCH Codec Authors. All Rights Reserved.
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

#ifndef SCH_ERRORS_H_
#define SCH_ERRORS_H_

#include <stdexcept>
#include <string>

namespace sch {

// Base class for every error raised by the library. The CLI maps each
// subclass to a distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that violate an operation's preconditions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Inconsistent model or training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Autoregressive slice prediction invoked out of order.
class SequencingError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or corrupted bitstream.
class DecodeError : public Error {
 public:
  using Error::Error;
};

// Bitstream produced by a different model than the one decoding it.
class IncompatibleModelError : public Error {
 public:
  using Error::Error;
};

// Unsupported or unreadable input (image files, checkpoints, paths).
class InputError : public Error {
 public:
  using Error::Error;
};

// Metric preconditions (e.g. BD-rate curve sizes) not met.
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace sch

#endif  // SCH_ERRORS_H_
