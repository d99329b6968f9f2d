// Copyright 2026 The lobstr Authors
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

#include "lobstr/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "lobstr/error.hpp"

namespace lobstr {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(int line, const std::string& key,
                            const std::string& why) {
  throw DataError("config line " + std::to_string(line) + ": key '" + key +
                  "': " + why);
}

int64_t parse_int(const std::string& v, int line, const std::string& key) {
  int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    bad_value(line, key, "expected an integer, got '" + v + "'");
  }
  return out;
}

uint64_t parse_uint(const std::string& v, int line, const std::string& key) {
  uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    bad_value(line, key, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& v, int line, const std::string& key) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(out)) {
    bad_value(line, key, "expected a finite number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& v, int line, const std::string& key) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad_value(line, key, "expected true or false, got '" + v + "'");
}

int parse_int32(const std::string& v, int line, const std::string& key) {
  int64_t x = parse_int(v, line, key);
  if (x < INT32_MIN || x > INT32_MAX) bad_value(line, key, "out of range");
  return static_cast<int>(x);
}

using Setter = std::function<void(RunConfig&, const std::string&, int,
                                  const std::string&)>;

const std::map<std::string, Setter>& key_table() {
  static const std::map<std::string, Setter> table = {
      {"reference_angular_mode",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         RefAngular mode;
         if (v == "relative") {
           mode = RefAngular::kRelative;
         } else if (v == "literal") {
           mode = RefAngular::kLiteral;
         } else {
           bad_value(ln, k, "expected relative or literal, got '" + v + "'");
         }
         c.train.ref_mode = mode;
         c.session.ref_mode = mode;
       }},
      {"net.hidden",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.train.dims.hidden = parse_int32(v, ln, k);
       }},
      {"net.latent",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.train.dims.latent = parse_int32(v, ln, k);
       }},
      {"train.epochs",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.train.epochs = parse_int32(v, ln, k);
       }},
      {"train.batch_size",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.train.batch_size = parse_int32(v, ln, k);
       }},
      {"train.steps_per_epoch",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.train.steps_per_epoch = parse_int32(v, ln, k);
       }},
      {"train.initial_lr",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.train.initial_lr = parse_double(v, ln, k);
       }},
      {"train.lr_decay",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.train.lr_decay = parse_double(v, ln, k);
       }},
      {"train.seed",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.train.seed = parse_uint(v, ln, k);
       }},
      {"train.checkpoint_every",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.train.checkpoint_every = parse_int32(v, ln, k);
       }},
      {"train.window",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.train.window = parse_int32(v, ln, k);
       }},
      {"train.weights.pose",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.train.weights.pose = parse_double(v, ln, k);
       }},
      {"train.weights.fk",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.train.weights.fk = parse_double(v, ln, k);
       }},
      {"train.weights.velocity",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.train.weights.velocity = parse_double(v, ln, k);
       }},
      {"train.weights.contact",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.train.weights.contact = parse_double(v, ln, k);
       }},
      {"train.adam.beta1",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.train.adam.beta1 = parse_double(v, ln, k);
       }},
      {"train.adam.beta2",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.train.adam.beta2 = parse_double(v, ln, k);
       }},
      {"train.adam.epsilon",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.train.adam.eps = parse_double(v, ln, k);
       }},
      {"dataset.noise_seed",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.dataset.noise_seed = parse_uint(v, ln, k);
       }},
      {"dataset.add_noise",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.dataset.add_noise = parse_bool(v, ln, k);
       }},
      {"dataset.pos_sigma",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.dataset.pos_sigma = parse_double(v, ln, k);
       }},
      {"dataset.max_rot_deg",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.dataset.max_rot_deg = parse_double(v, ln, k);
       }},
      {"postprocess.enabled",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.session.postprocess = parse_bool(v, ln, k);
       }},
      {"postprocess.threshold",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.session.post.threshold = parse_double(v, ln, k);
       }},
      {"postprocess.hysteresis",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.session.post.hysteresis = parse_double(v, ln, k);
       }},
      {"postprocess.snap_to_floor",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.session.post.snap_to_floor = parse_bool(v, ln, k);
       }},
      {"ik.max_iterations",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.session.post.ik.max_iterations = parse_int32(v, ln, k);
       }},
      {"ik.tolerance",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.session.post.ik.tolerance = parse_double(v, ln, k);
       }},
      {"ik.damping",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.session.post.ik.damping = parse_double(v, ln, k);
       }},
      {"ik.blend_window",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.session.post.ik.blend_window = parse_int32(v, ln, k);
       }},
      {"ik.max_step",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         c.session.post.ik.max_step = parse_double(v, ln, k);
       }},
      {"serve.port",
       [](RunConfig& c, const std::string& v, int ln, const std::string& k) {
         int64_t p = parse_int(v, ln, k);
         if (p < 1 || p > 65535) {
           bad_value(ln, k, "port must be in 1..65535");
         }
         c.serve_port = static_cast<uint16_t>(p);
       }},
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  session.validate();
  if (!std::isfinite(dataset.pos_sigma) || dataset.pos_sigma < 0.0) {
    throw DataError("dataset.pos_sigma must be finite and non-negative");
  }
  if (!std::isfinite(dataset.max_rot_deg) || dataset.max_rot_deg < 0.0) {
    throw DataError("dataset.max_rot_deg must be finite and non-negative");
  }
  if (train.ref_mode != session.ref_mode) {
    throw DataError("training and session reference modes disagree");
  }
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::map<std::string, int> seen;  // key -> first line
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    size_t hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw
                                                      : raw.substr(0, hash));
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("config line " + std::to_string(line_no) +
                      ": expected 'key = value', got '" + line + "'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw DataError("config line " + std::to_string(line_no) +
                      ": empty key");
    }
    auto it = key_table().find(key);
    if (it == key_table().end()) {
      throw DataError("config line " + std::to_string(line_no) +
                      ": unknown key '" + key + "'");
    }
    auto [prev, inserted] = seen.emplace(key, line_no);
    if (!inserted) {
      throw DataError("config line " + std::to_string(line_no) +
                      ": duplicate key '" + key + "' (first set on line " +
                      std::to_string(prev->second) + ")");
    }
    it->second(cfg, value, line_no, key);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string resolve_config_path(const std::string& explicit_path) {
  if (!explicit_path.empty()) return explicit_path;
  const char* env = std::getenv("LOBSTR_CONFIG");
  return env == nullptr ? std::string() : std::string(env);
}

}  // namespace lobstr
