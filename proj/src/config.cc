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

#include "sch/config.h"

#include <cmath>
#include <numeric>
#include <sstream>

#include "sch/errors.h"

namespace sch {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int64_t ParseInt(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("invalid integer for " + key + ": '" + v + "'");
  }
}

double ParseDouble(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("invalid number for " + key + ": '" + v + "'");
  }
}

bool ParseBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

std::string FormatDouble(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

ModelConfig ModelConfig::Toy() {
  ModelConfig c;
  c.n = 32;
  c.m = 48;
  c.z_channels = 24;
  c.sch_stack = {1, 1, 1};
  c.window_size = 4;
  c.heads = 4;
  c.slices = 4;
  c.entropy_width = 32;
  return c;
}

int64_t ModelConfig::pad_multiple() const {
  return std::lcm<int64_t>(64, 16 * window_size);
}

void ModelConfig::Validate() const {
  if (n <= 0 || n % 2 != 0) throw ConfigError("n must be positive and even");
  if (m <= 0 || m % 2 != 0) throw ConfigError("m must be positive and even");
  if (z_channels <= 0) throw ConfigError("z_channels must be positive");
  if (sch_stack.size() != 3) {
    throw ConfigError("sch_stack needs exactly three stage counts");
  }
  for (int64_t k : sch_stack) {
    if (k < 0) throw ConfigError("sch_stack counts must be non-negative");
  }
  if (window_size < 2) throw ConfigError("window_size must be at least 2");
  if (heads <= 0) throw ConfigError("heads must be positive");
  if ((n / 2) % heads != 0 || (m / 2) % heads != 0 ||
      (window_size * window_size) % heads != 0) {
    throw ConfigError("heads must divide n/2, m/2 and window_size^2");
  }
  if (mlp_ratio <= 0) throw ConfigError("mlp_ratio must be positive");
  if (slices <= 0 || m % slices != 0) {
    throw ConfigError("m must be divisible by slices");
  }
  if (entropy_width <= 0) throw ConfigError("entropy_width must be positive");
  if (lambda_index < 0 || lambda_index >= static_cast<int>(kLambdas.size())) {
    throw ConfigError("lambda_index out of range");
  }
}

std::string ModelConfig::Canonical() const {
  std::ostringstream os;
  os << "channel_attention=" << (channel_attention ? "true" : "false") << "\n";
  os << "entropy_width=" << entropy_width << "\n";
  os << "heads=" << heads << "\n";
  os << "lambda_index=" << lambda_index << "\n";
  os << "m=" << m << "\n";
  os << "mlp_ratio=" << mlp_ratio << "\n";
  os << "n=" << n << "\n";
  os << "orthonormal_wavelet=" << (orthonormal_wavelet ? "true" : "false")
     << "\n";
  os << "sch_stack=";
  for (size_t i = 0; i < sch_stack.size(); ++i) {
    os << (i ? "," : "") << sch_stack[i];
  }
  os << "\n";
  os << "slices=" << slices << "\n";
  os << "window_size=" << window_size << "\n";
  os << "z_channels=" << z_channels << "\n";
  return os.str();
}

void ModelConfig::Set(const std::string& key, const std::string& value) {
  if (key == "n") {
    n = ParseInt(key, value);
  } else if (key == "m") {
    m = ParseInt(key, value);
  } else if (key == "z_channels") {
    z_channels = ParseInt(key, value);
  } else if (key == "sch_stack") {
    sch_stack.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      sch_stack.push_back(ParseInt(key, Trim(item)));
    }
  } else if (key == "window_size") {
    window_size = ParseInt(key, value);
  } else if (key == "heads") {
    heads = ParseInt(key, value);
  } else if (key == "mlp_ratio") {
    mlp_ratio = ParseInt(key, value);
  } else if (key == "slices") {
    slices = ParseInt(key, value);
  } else if (key == "entropy_width") {
    entropy_width = ParseInt(key, value);
  } else if (key == "lambda_index") {
    lambda_index = static_cast<int>(ParseInt(key, value));
  } else if (key == "orthonormal_wavelet") {
    orthonormal_wavelet = ParseBool(key, value);
  } else if (key == "channel_attention") {
    channel_attention = ParseBool(key, value);
  } else {
    throw ConfigError("unknown model config key: " + key);
  }
}

void TrainConfig::Validate() const {
  bool known = false;
  for (double l : kLambdas) known = known || std::abs(l - lambda) < 1e-12;
  if (!known) throw ConfigError("lambda is not one of the configured values");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
  if (plateau_patience <= 0) throw ConfigError("plateau_patience must be positive");
  if (plateau_factor <= 0 || plateau_factor >= 1) {
    throw ConfigError("plateau_factor must be in (0, 1)");
  }
  if (crop_size <= 0 || crop_size % 64 != 0) {
    throw ConfigError("crop_size must be a positive multiple of 64");
  }
  if (max_steps < 0 || eval_period <= 0) {
    throw ConfigError("max_steps must be >= 0 and eval_period > 0");
  }
}

std::string TrainConfig::Canonical() const {
  std::ostringstream os;
  os << "batch_size=" << batch_size << "\n";
  os << "crop_size=" << crop_size << "\n";
  os << "eval_period=" << eval_period << "\n";
  os << "lambda=" << FormatDouble(lambda) << "\n";
  os << "learning_rate=" << FormatDouble(learning_rate) << "\n";
  os << "max_steps=" << max_steps << "\n";
  os << "min_learning_rate=" << FormatDouble(min_learning_rate) << "\n";
  os << "plateau_factor=" << FormatDouble(plateau_factor) << "\n";
  os << "plateau_patience=" << plateau_patience << "\n";
  os << "seed=" << seed << "\n";
  return os.str();
}

void TrainConfig::Set(const std::string& key, const std::string& value) {
  if (key == "lambda") {
    lambda = ParseDouble(key, value);
  } else if (key == "batch_size") {
    batch_size = ParseInt(key, value);
  } else if (key == "learning_rate") {
    learning_rate = ParseDouble(key, value);
  } else if (key == "plateau_patience") {
    plateau_patience = ParseInt(key, value);
  } else if (key == "plateau_factor") {
    plateau_factor = ParseDouble(key, value);
  } else if (key == "min_learning_rate") {
    min_learning_rate = ParseDouble(key, value);
  } else if (key == "crop_size") {
    crop_size = ParseInt(key, value);
  } else if (key == "max_steps") {
    max_steps = ParseInt(key, value);
  } else if (key == "eval_period") {
    eval_period = ParseInt(key, value);
  } else if (key == "seed") {
    seed = static_cast<uint64_t>(ParseInt(key, value));
  } else {
    throw ConfigError("unknown train config key: " + key);
  }
}

std::map<std::string, std::string> ParseKeyValues(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key=value");
    }
    const std::string key = Trim(line.substr(0, eq));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    }
    kv[key] = Trim(line.substr(eq + 1));
  }
  return kv;
}

void ApplyKeyValues(const std::map<std::string, std::string>& kv,
                    ModelConfig* model, TrainConfig* train) {
  for (const auto& [key, value] : kv) {
    if (key.rfind("model.", 0) == 0) {
      model->Set(key.substr(6), value);
    } else if (key.rfind("train.", 0) == 0) {
      train->Set(key.substr(6), value);
    } else {
      try {
        model->Set(key, value);
      } catch (const ConfigError& e) {
        if (std::string(e.what()).rfind("unknown model config key", 0) != 0) {
          throw;
        }
        train->Set(key, value);
      }
    }
  }
}

uint32_t Fnv1a(const void* data, size_t size, uint32_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint32_t h = seed;
  for (size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 16777619u;
  }
  return h;
}

}  // namespace sch
